// Copyright (C) 2026 The vdds Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <chrono>
#include <cmath>
#include <functional>
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include "vdds/aux_losses.hpp"
#include "vdds/backend.hpp"
#include "vdds/dds.hpp"
#include "vdds/edit_config.hpp"
#include "vdds/flow.hpp"
#include "vdds/video.hpp"

namespace vdds {

struct StepRecord {
    int step = 0;
    Timestep t = 0;
    LossBreakdown losses;
    double grad_norm_dds = 0.0;      // before flow refinement
    double grad_norm_refined = 0.0;  // after flow refinement
    double grad_norm_total = 0.0;    // with auxiliary terms
};

struct EditReport {
    EditConfig config;
    std::string backend;
    std::string codec;
    std::string embedder;
    std::string eps_mode = "iid_per_element";
    std::vector<StepRecord> steps;
    double wall_clock_seconds = 0.0;  // not serialized; reruns must compare equal
};

/// Raised when a step fails. Carries the failing step and everything recorded before it.
class EditAborted : public Error {
public:
    EditAborted(ErrorKind kind, const std::string& what, int step, EditReport partial)
        : Error(kind, "step " + std::to_string(step) + ": " + what),
          step_(step),
          partial_(std::move(partial)) {}

    int step() const { return step_; }
    const EditReport& partial_report() const { return partial_; }

private:
    int step_;
    EditReport partial_;
};

/// Plain SGD: z - lr * g, no momentum. Nonfinite gradients or results abort.
inline VideoLatent sgd_step(const VideoLatent& z, const GradientField& g, double lr) {
    require_same_shape(z, g.data, "sgd_step");
    VideoLatent out(z.shape());
    std::size_t bad = 0, first_bad = 0;
    for (std::size_t i = 0; i < z.size(); ++i) {
        out[i] = static_cast<float>(z[i] - lr * g.data[i]);
        if (!std::isfinite(g.data[i]) || !std::isfinite(out[i])) {
            if (bad++ == 0) first_bad = i;
        }
    }
    if (bad > 0) {
        throw NumericError("nonfinite update in " + std::to_string(bad) + " of " +
                           std::to_string(z.size()) + " elements (first at flat index " +
                           std::to_string(first_bad) + ", gradient " +
                           std::to_string(g.data[first_bad]) + ", timestep " +
                           std::to_string(g.t) + ")");
    }
    return out;
}

struct EditResult {
    PixelVideo edited;
    VideoLatent latent;
    EditReport report;
};

using StepObserver = std::function<void(const StepRecord&, const VideoLatent&)>;

/// Draws one step's timestep and noise. t first, then eps element by element in
/// flat N x C x h x w order, all from the single run engine.
class NoiseSource {
public:
    explicit NoiseSource(std::uint64_t seed) : rng_(seed) {}

    Timestep timestep(Timestep lo, Timestep hi) {
        return std::uniform_int_distribution<Timestep>(lo, hi)(rng_);
    }
    VideoLatent noise(const Shape4& shape) {
        VideoLatent eps(shape);
        for (auto& v : eps.data()) v = static_cast<float>(normal_(rng_));
        return eps;
    }

private:
    std::mt19937_64 rng_;
    std::normal_distribution<double> normal_;
};

/// Optimizes the video's latent toward `target_prompt`. The edit latent and the
/// frozen reference both start from encode(video). Each step samples (t, eps)
/// shared by both DDS branches, refines the DDS gradient along `flows`, adds the
/// auxiliary gradients and applies one SGD update; the result is decode(z).
inline EditResult edit_video(const PixelVideo& video, std::string_view source_prompt,
                             std::string_view target_prompt, const ScoreBackend& backend,
                             const LatentCodec& codec, const FlowSet& flows,
                             const SemanticEmbedder* embedder, const EditConfig& cfg,
                             const StepObserver& observer = {}) {
    const auto started = std::chrono::steady_clock::now();
    cfg.validate(backend.schedule().steps());
    if (flows.frames() != 0 && flows.frames() != video.frames()) {
        throw ShapeError("flow set covers " + std::to_string(flows.frames()) +
                         " frames, video has " + std::to_string(video.frames()));
    }
    if (cfg.w2 > 0.0) {
        if (embedder == nullptr) throw ConfigError("w2 > 0 needs a semantic embedder");
        for (std::size_t a : cfg.anchors) {
            if (a >= video.frames()) {
                throw ConfigError("anchor " + std::to_string(a) + " outside clip of " +
                                  std::to_string(video.frames()) + " frames");
            }
        }
    }
    const PromptEmbedding y = backend.embed_prompt(source_prompt);
    const PromptEmbedding y_star = backend.embed_prompt(target_prompt);

    EditReport report;
    report.config = cfg;
    report.backend = backend.name();
    report.codec = codec.name();
    report.embedder = embedder ? embedder->name() : "none";

    const VideoLatent z_ref = codec.encode(video);
    check_latent_shape(backend, z_ref);
    VideoLatent z = z_ref;

    NoiseSource noise(cfg.seed);
    report.steps.reserve(static_cast<std::size_t>(cfg.steps));
    for (int step = 0; step < cfg.steps; ++step) {
        try {
            StepRecord rec;
            rec.step = step;
            rec.t = noise.timestep(cfg.t_min, cfg.t_max);
            const VideoLatent eps = noise.noise(z.shape());

            const GradientField dds = dds_gradient(z, z_ref, rec.t, eps, y, y_star, cfg.guidance,
                                                   backend, static_cast<std::uint64_t>(step));
            const GradientField refined = refine_gradients(dds, flows, cfg.alpha, cfg.omegas);
            const TotalGradient total =
                total_gradient(refined, z, z_ref, cfg, &codec, embedder,
                               step % cfg.semantic_stride == 0);

            rec.losses = total.losses;
            rec.grad_norm_dds = std::sqrt(squared_norm(dds.data));
            rec.grad_norm_refined = std::sqrt(total.losses.dds);
            rec.grad_norm_total = std::sqrt(squared_norm(total.grad.data));

            z = sgd_step(z, total.grad, cfg.lr);
            report.steps.push_back(rec);
            if (observer) observer(rec, z);
        } catch (const Error& e) {
            report.wall_clock_seconds = std::chrono::duration<double>(
                std::chrono::steady_clock::now() - started).count();
            throw EditAborted(e.kind(), e.what(), step, std::move(report));
        }
    }

    EditResult result{codec.decode(z), std::move(z), std::move(report)};
    result.report.wall_clock_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
    return result;
}

}  // namespace vdds
