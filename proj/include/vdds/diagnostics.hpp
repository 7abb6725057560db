// Copyright (C) 2026 The vdds Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <span>
#include <string_view>
#include <vector>

#include "vdds/backend.hpp"
#include "vdds/edit_loop.hpp"
#include "vdds/schedule.hpp"
#include "vdds/video.hpp"

namespace vdds {

/// Lays frames out row-major on a grid with `cols` columns and a 2-pixel border
/// around every cell. Output is one frame of size
/// (rows * (h + 2) + 2) x (cols * (w + 2) + 2); unused cells keep the border value.
inline PixelVideo contact_sheet(const PixelVideo& frames, std::size_t cols, float border = 1.0f) {
    constexpr std::size_t pad = 2;
    if (cols < 1) throw ConfigError("contact sheet needs cols >= 1");
    if (frames.frames() == 0) throw InputError("contact sheet needs at least one frame");
    const Shape4& s = frames.shape();
    const std::size_t rows = (s.frames + cols - 1) / cols;
    const Shape4 out_shape{1, s.channels, rows * (s.height + pad) + pad, cols * (s.width + pad) + pad};
    PixelVideo sheet(out_shape, border);
    for (std::size_t n = 0; n < s.frames; ++n) {
        const std::size_t oy = pad + (n / cols) * (s.height + pad);
        const std::size_t ox = pad + (n % cols) * (s.width + pad);
        for (std::size_t c = 0; c < s.channels; ++c)
            for (std::size_t y = 0; y < s.height; ++y)
                for (std::size_t x = 0; x < s.width; ++x) sheet.at(0, c, oy + y, ox + x) = frames.at(n, c, y, x);
    }
    return sheet;
}

struct Z0Prediction {
    Timestep t = 0;
    VideoLatent z0_hat;
    PixelVideo decoded;
    double latent_mse = 0.0;  // against the clean latent
};

/// One-step clean-latent reconstructions at the given timesteps: perturb the
/// encoded video with a fresh seeded draw, predict the noise under `prompt`, and
/// invert. Larger t is expected to reconstruct worse.
inline std::vector<Z0Prediction> one_step_z0(const PixelVideo& video, std::string_view prompt,
                                             std::span<const Timestep> timesteps,
                                             const ScoreBackend& backend, const LatentCodec& codec,
                                             std::uint64_t seed) {
    const VideoLatent z0 = codec.encode(video);
    const PromptEmbedding y = backend.embed_prompt(prompt);
    NoiseSource noise(seed);
    const VideoLatent eps = noise.noise(z0.shape());
    std::vector<Z0Prediction> out;
    for (Timestep t : timesteps) {
        const VideoLatent zt = perturb(z0, t, eps, backend.schedule());
        const VideoLatent eps_hat = backend.predict_noise(zt, t, y);
        Z0Prediction p{t, predict_z0(zt, eps_hat, t, backend.schedule()), {}, 0.0};
        p.decoded = codec.decode(p.z0_hat);
        p.latent_mse = mean_squared_error(p.z0_hat, z0);
        out.push_back(std::move(p));
    }
    return out;
}

}  // namespace vdds
