// Copyright (C) 2026 The vdds Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdlib>
#include <span>
#include <string>
#include <vector>

#include "vdds/backend.hpp"
#include "vdds/dds.hpp"
#include "vdds/edit_config.hpp"
#include "vdds/embedder.hpp"
#include "vdds/errors.hpp"
#include "vdds/video.hpp"

namespace vdds {

struct PreservationResult {
    double loss = 0.0;
    VideoLatent grad;
};

/// Squared distance to the reference latent, mean (default) or sum reduced.
inline PreservationResult preservation_loss(const VideoLatent& z, const VideoLatent& z_ref,
                                            Reduction reduction = Reduction::mean) {
    require_same_shape(z, z_ref, "preservation_loss");
    const double scale =
        reduction == Reduction::mean && !z.empty() ? 1.0 / static_cast<double>(z.size()) : 1.0;
    PreservationResult out{0.0, VideoLatent(z.shape())};
    double acc = 0.0;
    for (std::size_t i = 0; i < z.size(); ++i) {
        const double d = static_cast<double>(z[i]) - z_ref[i];
        acc += d * d;
        out.grad[i] = static_cast<float>(2.0 * d * scale);
    }
    out.loss = acc * scale;
    return out;
}

/// Anchor each frame is compared against: nearest in frame index, ties to the earlier one.
inline std::size_t nearest_anchor(std::size_t frame, std::span<const std::size_t> anchors) {
    std::size_t best = anchors.front();
    std::size_t best_dist = static_cast<std::size_t>(-1);
    for (std::size_t a : anchors) {
        const std::size_t d = a > frame ? a - frame : frame - a;
        if (d < best_dist || (d == best_dist && a < best)) {
            best = a;
            best_dist = d;
        }
    }
    return best;
}

struct SemanticResult {
    double loss = 0.0;
    PixelVideo grad;
    std::vector<double> per_frame;  // 1 - cos per frame, 0 for anchors
};

/// Mean over non-anchor frames of 1 - cos(e(x_i), e(x_anchor(i))). The anchor
/// embeddings are held constant; only non-anchor frames receive gradient.
inline SemanticResult semantic_consistency_loss(const PixelVideo& frames,
                                                std::span<const std::size_t> anchors,
                                                const SemanticEmbedder& e) {
    const std::size_t n = frames.frames();
    if (anchors.empty()) throw ConfigError("semantic loss needs at least one anchor");
    std::vector<bool> is_anchor(n, false);
    for (std::size_t a : anchors) {
        if (a >= n) {
            throw IndexError("anchor frame " + std::to_string(a) + " outside clip of " +
                             std::to_string(n) + " frames");
        }
        is_anchor[a] = true;
    }
    const FrameShape fs = frame_shape(frames.shape());

    std::vector<Embedding> emb(n);
    for (std::size_t i = 0; i < n; ++i) {
        emb[i] = e.embed(frames.frame(i), fs);
        if (!(norm(emb[i]) > 0.0)) {
            throw NumericError("semantic loss: zero-norm embedding for frame " + std::to_string(i));
        }
    }

    SemanticResult out{0.0, PixelVideo(frames.shape()), std::vector<double>(n, 0.0)};
    std::size_t count = 0;
    for (std::size_t i = 0; i < n; ++i) count += is_anchor[i] ? 0 : 1;
    if (count == 0) return out;
    const double inv = 1.0 / static_cast<double>(count);

    for (std::size_t i = 0; i < n; ++i) {
        if (is_anchor[i]) continue;
        const Embedding& a = emb[i];
        const Embedding& b = emb[nearest_anchor(i, anchors)];
        const double na = norm(a), nb = norm(b);
        const double c = dot(a, b) / (na * nb);
        out.per_frame[i] = 1.0 - c;
        out.loss += (1.0 - c) * inv;

        // d(1 - cos)/da = -(b / (|a||b|) - cos * a / |a|^2)
        std::vector<double> g(a.size());
        for (std::size_t k = 0; k < a.size(); ++k) {
            g[k] = -inv * (b[k] / (na * nb) - c * a[k] / (na * na));
        }
        const std::vector<double> gx = e.vjp(frames.frame(i), fs, g);
        auto dst = out.grad.frame(i);
        for (std::size_t k = 0; k < dst.size(); ++k) dst[k] = static_cast<float>(gx[k]);
    }
    return out;
}

/// Loss components of one step. The DDS entry is a monitoring surrogate,
/// ||refined DDS gradient||^2, since the DDS term only ever acts through its gradient.
struct LossBreakdown {
    double dds = 0.0;
    double preserve = 0.0;
    double semantic = 0.0;
    double total = 0.0;
    double w1 = 0.0;
    double w2 = 0.0;
    bool semantic_evaluated = false;
};

struct TotalGradient {
    GradientField grad;
    LossBreakdown losses;
};

/// refined_dds + w1 * grad(preserve) + w2 * grad(semantic), the semantic gradient
/// pulled back through the codec's decoder. `codec` and `embedder` may be null
/// only when w2 == 0. Pass evaluate_semantic = false to skip the semantic term on
/// strided iterations.
inline TotalGradient total_gradient(const GradientField& refined_dds, const VideoLatent& z,
                                    const VideoLatent& z_ref, const EditConfig& cfg,
                                    const LatentCodec* codec, const SemanticEmbedder* embedder,
                                    bool evaluate_semantic = true) {
    require_same_shape(refined_dds.data, z, "total_gradient: gradient vs latent");
    require_same_shape(z, z_ref, "total_gradient: reference latent");
    if (cfg.w2 > 0.0 && (codec == nullptr || embedder == nullptr)) {
        throw ConfigError("semantic weight w2 > 0 needs both a codec and an embedder");
    }

    TotalGradient out{refined_dds, {}};
    out.losses.w1 = cfg.w1;
    out.losses.w2 = cfg.w2;
    out.losses.dds = squared_norm(refined_dds.data);

    if (cfg.w1 > 0.0) {
        const PreservationResult pres = preservation_loss(z, z_ref, cfg.preserve_reduction);
        out.losses.preserve = pres.loss;
        for (std::size_t i = 0; i < z.size(); ++i) {
            out.grad.data[i] = static_cast<float>(out.grad.data[i] + cfg.w1 * pres.grad[i]);
        }
    } else {
        out.losses.preserve = preservation_loss(z, z_ref, cfg.preserve_reduction).loss;
    }

    if (cfg.w2 > 0.0 && evaluate_semantic) {
        const PixelVideo frames = codec->decode(z);
        const SemanticResult sem = semantic_consistency_loss(frames, cfg.anchors, *embedder);
        const VideoLatent gz = codec->decode_vjp(z, sem.grad);
        out.losses.semantic = sem.loss;
        out.losses.semantic_evaluated = true;
        for (std::size_t i = 0; i < z.size(); ++i) {
            out.grad.data[i] = static_cast<float>(out.grad.data[i] + cfg.w2 * gz[i]);
        }
    }

    out.losses.total = out.losses.dds + cfg.w1 * out.losses.preserve + cfg.w2 * out.losses.semantic;
    return out;
}

}  // namespace vdds
