// Copyright (C) 2026 The vdds Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>

#include "vdds/backend.hpp"
#include "vdds/schedule.hpp"
#include "vdds/video.hpp"

namespace vdds {

/// Per-frame update gradients for a latent, with the draw that produced them.
struct GradientField {
    VideoLatent data;
    Timestep t = 0;
    std::uint64_t eps_id = 0;
};

/// Score distillation residual eps_theta^w(perturb(z, t, eps), t, y) - eps.
/// The latent is the parameterization itself, so dZ/dphi is the identity.
inline GradientField sds_gradient(const VideoLatent& z, Timestep t, const VideoLatent& eps,
                                  const PromptEmbedding& y, double w, const ScoreBackend& b,
                                  std::uint64_t eps_id = 0) {
    const VideoLatent zt = perturb(z, t, eps, b.schedule());
    VideoLatent pred = predict_noise_cfg(b, zt, t, y, w);
    for (std::size_t i = 0; i < pred.size(); ++i) pred[i] -= eps[i];
    return {std::move(pred), t, eps_id};
}

/// Delta denoising score: the guided prediction for the edited latent under the
/// target prompt minus the guided prediction for the frozen reference under the
/// source prompt. Both branches share (t, eps), so prediction noise common to
/// both cancels exactly.
inline GradientField dds_gradient(const VideoLatent& z, const VideoLatent& z_ref, Timestep t,
                                  const VideoLatent& eps, const PromptEmbedding& y,
                                  const PromptEmbedding& y_star, double w, const ScoreBackend& b,
                                  std::uint64_t eps_id = 0) {
    require_same_shape(z, z_ref, "dds_gradient: reference latent");
    require_same_shape(z, eps, "dds_gradient: noise");
    const VideoLatent zt = perturb(z, t, eps, b.schedule());
    const VideoLatent zt_ref = perturb(z_ref, t, eps, b.schedule());
    VideoLatent edit = predict_noise_cfg(b, zt, t, y_star, w);
    const VideoLatent ref = predict_noise_cfg(b, zt_ref, t, y, w);
    for (std::size_t i = 0; i < edit.size(); ++i) edit[i] -= ref[i];
    return {std::move(edit), t, eps_id};
}

}  // namespace vdds
