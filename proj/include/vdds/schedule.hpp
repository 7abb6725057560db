// Copyright (C) 2026 The vdds Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "vdds/errors.hpp"
#include "vdds/video.hpp"

namespace vdds {

/// Diffusion timestep, 1-indexed: valid values are 1..T.
using Timestep = int;

enum class BetaSchedule { linear };

/// Variance schedule and cumulative signal retention. Tables are stored in
/// double; cumulative products over ~1000 steps lose too much in float.
class DiffusionSchedule {
public:
    DiffusionSchedule() = default;

    int steps() const { return static_cast<int>(betas_.size()); }

    double beta(Timestep t) const { return betas_.at(checked(t)); }
    double alpha_bar(Timestep t) const { return alpha_bars_.at(checked(t)); }

    const std::vector<double>& betas() const { return betas_; }
    const std::vector<double>& alpha_bars() const { return alpha_bars_; }

    double beta_start() const { return betas_.empty() ? 0.0 : betas_.front(); }
    double beta_end() const { return betas_.empty() ? 0.0 : betas_.back(); }

    friend DiffusionSchedule make_schedule(int, double, double, BetaSchedule);

private:
    std::size_t checked(Timestep t) const {
        if (t < 1 || t > steps()) {
            throw IndexError("timestep " + std::to_string(t) + " outside [1, " +
                             std::to_string(steps()) + "]");
        }
        return static_cast<std::size_t>(t - 1);
    }

    std::vector<double> betas_;
    std::vector<double> alpha_bars_;
};

inline DiffusionSchedule make_schedule(int steps, double beta_start, double beta_end,
                                       BetaSchedule kind = BetaSchedule::linear) {
    if (steps < 1) throw ConfigError("schedule needs T >= 1, got " + std::to_string(steps));
    if (!(beta_start > 0.0 && beta_start <= beta_end && beta_end < 1.0)) {
        throw ConfigError("schedule needs 0 < beta_start <= beta_end < 1, got [" +
                          std::to_string(beta_start) + ", " + std::to_string(beta_end) + "]");
    }
    DiffusionSchedule s;
    s.betas_.resize(static_cast<std::size_t>(steps));
    s.alpha_bars_.resize(static_cast<std::size_t>(steps));
    switch (kind) {
        case BetaSchedule::linear:
            for (int i = 0; i < steps; ++i) {
                const double frac = steps == 1 ? 0.0 : static_cast<double>(i) / (steps - 1);
                s.betas_[i] = beta_start + (beta_end - beta_start) * frac;
            }
            break;
    }
    double prod = 1.0;
    for (int i = 0; i < steps; ++i) {
        prod *= 1.0 - s.betas_[i];
        s.alpha_bars_[i] = prod;
    }
    return s;
}

/// Forward diffusion: sqrt(abar_t) * z0 + sqrt(1 - abar_t) * eps.
inline VideoLatent perturb(const VideoLatent& z0, Timestep t, const VideoLatent& eps,
                           const DiffusionSchedule& sched) {
    const double abar = sched.alpha_bar(t);
    require_same_shape(z0, eps, "perturb: noise");
    const double signal = std::sqrt(abar);
    const double noise = std::sqrt(1.0 - abar);
    VideoLatent out(z0.shape());
    for (std::size_t i = 0; i < z0.size(); ++i) {
        out[i] = static_cast<float>(signal * z0[i] + noise * eps[i]);
    }
    return out;
}

/// One-step clean-latent estimate from a noise prediction; inverts `perturb`
/// when eps_hat is the true noise.
inline VideoLatent predict_z0(const VideoLatent& zt, const VideoLatent& eps_hat, Timestep t,
                              const DiffusionSchedule& sched) {
    const double abar = sched.alpha_bar(t);
    if (!(abar > 0.0)) {
        throw NumericError("predict_z0: alpha_bar(" + std::to_string(t) + ") is zero");
    }
    require_same_shape(zt, eps_hat, "predict_z0: noise estimate");
    const double signal = std::sqrt(abar);
    const double noise = std::sqrt(1.0 - abar);
    VideoLatent out(zt.shape());
    for (std::size_t i = 0; i < zt.size(); ++i) {
        out[i] = static_cast<float>((zt[i] - noise * eps_hat[i]) / signal);
    }
    return out;
}

}  // namespace vdds
