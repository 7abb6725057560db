// Copyright (C) 2026 The vdds Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "vdds/embedder.hpp"
#include "vdds/errors.hpp"
#include "vdds/video.hpp"

namespace vdds {

struct MetricsReport {
    double pres = 0.0;
    std::optional<double> clip_img;   // absent for single-frame clips
    std::optional<double> clip_text;  // absent when no prompt embedding is available
    std::vector<double> pres_per_frame;
    std::vector<double> clip_img_per_pair;
    std::vector<double> clip_text_per_frame;
    int histogram_bins = 32;
    std::string histogram_kernel = "intersection";
    std::string embedder;
};

inline std::vector<Embedding> embed_frames(const PixelVideo& frames, const SemanticEmbedder& e) {
    const FrameShape fs = frame_shape(frames.shape());
    std::vector<Embedding> out;
    out.reserve(frames.frames());
    for (std::size_t i = 0; i < frames.frames(); ++i) out.push_back(e.embed(frames.frame(i), fs));
    return out;
}

/// Cosine of each frame's embedding with the prompt embedding.
inline std::vector<double> clip_text_scores(const PixelVideo& frames,
                                            std::span<const double> prompt_embedding,
                                            const SemanticEmbedder& e) {
    const auto emb = embed_frames(frames, e);
    std::vector<double> out;
    for (std::size_t i = 0; i < emb.size(); ++i) {
        out.push_back(cosine(emb[i], prompt_embedding, "text alignment, frame " + std::to_string(i)));
    }
    return out;
}

inline double clip_text_alignment(const PixelVideo& frames, std::span<const double> prompt_embedding,
                                  const SemanticEmbedder& e) {
    if (frames.frames() == 0) throw InputError("text alignment needs at least one frame");
    const auto s = clip_text_scores(frames, prompt_embedding, e);
    double acc = 0.0;
    for (double v : s) acc += v;
    return acc / static_cast<double>(s.size());
}

/// Cosine between embeddings of each adjacent frame pair.
inline std::vector<double> clip_frame_scores(const PixelVideo& frames, const SemanticEmbedder& e) {
    if (frames.frames() < 2) throw InputError("frame consistency needs at least 2 frames");
    const auto emb = embed_frames(frames, e);
    std::vector<double> out;
    for (std::size_t i = 0; i + 1 < emb.size(); ++i) {
        out.push_back(cosine(emb[i], emb[i + 1], "frame consistency, pair " + std::to_string(i)));
    }
    return out;
}

inline double clip_frame_consistency(const PixelVideo& frames, const SemanticEmbedder& e) {
    const auto s = clip_frame_scores(frames, e);
    double acc = 0.0;
    for (double v : s) acc += v;
    return acc / static_cast<double>(s.size());
}

/// Pixel counts of one channel plane in `bins` equal-width bins over [0, 1].
/// Values outside the range are clamped into the end bins.
inline std::vector<std::size_t> channel_histogram_counts(std::span<const float> plane, int bins) {
    std::vector<std::size_t> h(static_cast<std::size_t>(bins), 0);
    for (float v : plane) {
        const double c = std::clamp(static_cast<double>(v), 0.0, 1.0);
        const int b = std::min(static_cast<int>(c * bins), bins - 1);
        ++h[static_cast<std::size_t>(b)];
    }
    return h;
}

/// Normalized histogram of one channel plane.
inline std::vector<double> channel_histogram(std::span<const float> plane, int bins) {
    const auto counts = channel_histogram_counts(plane, bins);
    std::vector<double> h(counts.size(), 0.0);
    if (plane.empty()) return h;
    for (std::size_t b = 0; b < h.size(); ++b) {
        h[b] = static_cast<double>(counts[b]) / static_cast<double>(plane.size());
    }
    return h;
}

/// Per-frame histogram intersection, averaged over channels. Intersections are
/// accumulated in integer counts so identical frames score exactly 1.
inline std::vector<double> color_histogram_scores(const PixelVideo& src, const PixelVideo& edited,
                                                  int bins) {
    if (bins < 2) throw ConfigError("histogram needs at least 2 bins");
    require_same_shape(src, edited, "color histogram preservation");
    std::vector<double> out;
    for (std::size_t n = 0; n < src.frames(); ++n) {
        double acc = 0.0;
        for (std::size_t c = 0; c < src.shape().channels; ++c) {
            const auto p = channel_histogram_counts(src.plane(n, c), bins);
            const auto q = channel_histogram_counts(edited.plane(n, c), bins);
            std::size_t inter = 0;
            for (std::size_t b = 0; b < p.size(); ++b) inter += std::min(p[b], q[b]);
            acc += static_cast<double>(inter) / static_cast<double>(src.shape().plane_size());
        }
        out.push_back(acc / static_cast<double>(src.shape().channels));
    }
    return out;
}

inline double color_histogram_preservation(const PixelVideo& src, const PixelVideo& edited,
                                           int bins = 32) {
    const auto s = color_histogram_scores(src, edited, bins);
    if (s.empty()) throw InputError("histogram preservation needs at least one frame");
    double acc = 0.0;
    for (double v : s) acc += v;
    return acc / static_cast<double>(s.size());
}

/// All automatic metrics for an edit. `prompt_embedding` may be empty, in which
/// case clip_text is left absent.
inline MetricsReport compute_metrics(const PixelVideo& src, const PixelVideo& edited,
                                     std::span<const double> prompt_embedding,
                                     const SemanticEmbedder& e, int bins = 32) {
    MetricsReport r;
    r.histogram_bins = bins;
    r.embedder = e.name();
    r.pres_per_frame = color_histogram_scores(src, edited, bins);
    r.pres = color_histogram_preservation(src, edited, bins);
    if (edited.frames() >= 2) {
        r.clip_img_per_pair = clip_frame_scores(edited, e);
        r.clip_img = clip_frame_consistency(edited, e);
    }
    if (!prompt_embedding.empty()) {
        r.clip_text_per_frame = clip_text_scores(edited, prompt_embedding, e);
        r.clip_text = clip_text_alignment(edited, prompt_embedding, e);
    }
    return r;
}

}  // namespace vdds
