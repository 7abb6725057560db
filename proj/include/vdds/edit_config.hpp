// Copyright (C) 2026 The vdds Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "vdds/errors.hpp"
#include "vdds/schedule.hpp"

namespace vdds {

enum class Reduction { mean, sum };

inline const char* to_string(Reduction r) { return r == Reduction::mean ? "mean" : "sum"; }

/// Every tunable of an edit run. Defaults follow the reference recipe
/// (SGD, lr 0.1, 300 steps) plus the artifact's own choices for weights the
/// method leaves open.
struct EditConfig {
    int steps = 300;
    double lr = 0.1;
    double guidance = 7.5;  // classifier-free guidance weight w
    double w1 = 1.0;        // content preservation
    double w2 = 0.1;        // anchor semantic consistency
    Reduction preserve_reduction = Reduction::mean;

    double alpha = 0.5;
    std::size_t hops = 2;
    std::vector<double> omegas = {1.0, 0.5};
    double tau_abs = 3.0;
    double tau_rel = 0.05;

    Timestep t_min = 50;
    Timestep t_max = 950;
    std::vector<std::size_t> anchors = {0};
    std::uint64_t seed = 0;
    int semantic_stride = 1;

    /// Throws ConfigError describing the first violated constraint.
    void validate(int schedule_steps) const {
        auto fail = [](const std::string& m) { throw ConfigError("edit config: " + m); };
        if (steps < 0) fail("steps must be >= 0");
        if (!(lr > 0.0) || !std::isfinite(lr)) fail("lr must be > 0");
        if (!std::isfinite(guidance)) fail("guidance must be finite");
        if (!(w1 >= 0.0) || !std::isfinite(w1)) fail("w1 must be finite and >= 0");
        if (!(w2 >= 0.0) || !std::isfinite(w2)) fail("w2 must be finite and >= 0");
        if (!(alpha >= 0.0 && alpha <= 1.0)) fail("alpha must lie in [0, 1]");
        if (omegas.size() < hops) fail("need one hop weight per hop");
        for (double o : omegas)
            if (!(o >= 0.0) || !std::isfinite(o)) fail("hop weights must be finite and >= 0");
        if (!(tau_abs >= 0.0) || !(tau_rel >= 0.0)) fail("cycle thresholds must be >= 0");
        if (!(1 <= t_min && t_min <= t_max && t_max <= schedule_steps)) {
            fail("need 1 <= t_min <= t_max <= T (" + std::to_string(schedule_steps) + ")");
        }
        if (anchors.empty()) fail("at least one anchor frame required");
        if (semantic_stride < 1) fail("semantic_stride must be >= 1");
    }
};

}  // namespace vdds
