// Copyright (C) 2026 The vdds Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "vdds/errors.hpp"
#include "vdds/video.hpp"

namespace vdds {

using Embedding = std::vector<double>;

/// High-level image features of a single frame (C x H x W, values nominally in [0, 1]).
/// `vjp` returns d<grad, embed(frame)>/d frame, the adjoint used to back-propagate
/// semantic losses into pixel space. Deterministic per frame.
class SemanticEmbedder {
public:
    virtual ~SemanticEmbedder() = default;
    virtual std::string name() const = 0;
    virtual std::size_t dim(FrameShape shape) const = 0;
    virtual Embedding embed(std::span<const float> frame, FrameShape shape) const = 0;
    virtual std::vector<double> vjp(std::span<const float> frame, FrameShape shape,
                                    std::span<const double> grad) const = 0;
};

/// Text side of a joint image/text embedding space.
class TextEncoder {
public:
    virtual ~TextEncoder() = default;
    virtual std::string name() const = 0;
    virtual Embedding embed_text(std::string_view text) const = 0;
};

inline double dot(std::span<const double> a, std::span<const double> b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

inline double norm(std::span<const double> a) { return std::sqrt(dot(a, a)); }

/// Cosine similarity; throws NumericError naming `what` on a zero-norm input.
/// A single square root of the product of squared norms makes cos(a, a) exactly 1.
inline double cosine(std::span<const double> a, std::span<const double> b, const std::string& what) {
    if (a.size() != b.size()) throw ShapeError(what + ": embedding dims differ");
    const double aa = dot(a, a), bb = dot(b, b);
    if (!(aa > 0.0) || !(bb > 0.0)) throw NumericError(what + ": zero-norm embedding");
    return std::clamp(dot(a, b) / std::sqrt(aa * bb), -1.0, 1.0);
}

/// Raw pixels as the embedding. Linear, so its adjoint is the identity; handy for
/// building embeddings with exact hand-chosen angles.
class FlattenEmbedder final : public SemanticEmbedder {
public:
    std::string name() const override { return "flatten"; }
    std::size_t dim(FrameShape shape) const override { return shape.size(); }
    Embedding embed(std::span<const float> frame, FrameShape shape) const override {
        if (frame.size() != shape.size()) throw ShapeError("flatten embedder: frame size mismatch");
        return Embedding(frame.begin(), frame.end());
    }
    std::vector<double> vjp(std::span<const float> frame, FrameShape shape,
                            std::span<const double> grad) const override {
        if (frame.size() != shape.size() || grad.size() != shape.size()) {
            throw ShapeError("flatten embedder: vjp size mismatch");
        }
        return {grad.begin(), grad.end()};
    }
};

/// Deterministic downsample-and-normalize feature: per-channel average pooling onto a
/// grid x grid lattice, then L2 normalization. Stand-in for a CLIP-class image encoder.
class PooledEmbedder final : public SemanticEmbedder {
public:
    explicit PooledEmbedder(std::size_t grid = 4) : grid_(grid) {
        if (grid == 0) throw ConfigError("pooled embedder grid must be >= 1");
    }

    std::string name() const override { return "pooled"; }
    std::size_t grid() const { return grid_; }

    std::size_t dim(FrameShape s) const override { return s.channels * rows(s) * cols(s); }

    Embedding embed(std::span<const float> frame, FrameShape s) const override {
        const Embedding pooled = pool(frame, s);
        const double n = norm(pooled);
        if (!(n > 0.0)) throw NumericError("pooled embedder: zero-norm feature");
        Embedding out(pooled.size());
        for (std::size_t k = 0; k < out.size(); ++k) out[k] = pooled[k] / n;
        return out;
    }

    std::vector<double> vjp(std::span<const float> frame, FrameShape s,
                            std::span<const double> grad) const override {
        const Embedding pooled = pool(frame, s);
        if (grad.size() != pooled.size()) throw ShapeError("pooled embedder: vjp size mismatch");
        const double n = norm(pooled);
        if (!(n > 0.0)) throw NumericError("pooled embedder: zero-norm feature");
        // d(v/|v|)^T g = (g - e (e.g)) / |v|
        double eg = 0.0;
        for (std::size_t k = 0; k < grad.size(); ++k) eg += pooled[k] / n * grad[k];
        std::vector<double> gpool(grad.size());
        for (std::size_t k = 0; k < grad.size(); ++k) gpool[k] = (grad[k] - pooled[k] / n * eg) / n;

        const std::size_t r = rows(s), q = cols(s);
        const std::vector<std::size_t> counts = cell_counts(s);
        std::vector<double> out(s.size());
        for (std::size_t c = 0; c < s.channels; ++c)
            for (std::size_t y = 0; y < s.height; ++y)
                for (std::size_t x = 0; x < s.width; ++x) {
                    const std::size_t cell = (y * r / s.height) * q + x * q / s.width;
                    out[(c * s.height + y) * s.width + x] =
                        gpool[c * r * q + cell] / static_cast<double>(counts[cell]);
                }
        return out;
    }

private:
    std::size_t rows(FrameShape s) const { return std::min(grid_, s.height); }
    std::size_t cols(FrameShape s) const { return std::min(grid_, s.width); }

    std::vector<std::size_t> cell_counts(FrameShape s) const {
        const std::size_t r = rows(s), q = cols(s);
        std::vector<std::size_t> counts(r * q, 0);
        for (std::size_t y = 0; y < s.height; ++y)
            for (std::size_t x = 0; x < s.width; ++x) ++counts[(y * r / s.height) * q + x * q / s.width];
        return counts;
    }

    Embedding pool(std::span<const float> frame, FrameShape s) const {
        if (frame.size() != s.size() || s.size() == 0) {
            throw ShapeError("pooled embedder: frame size mismatch");
        }
        const std::size_t r = rows(s), q = cols(s);
        const std::vector<std::size_t> counts = cell_counts(s);
        Embedding out(s.channels * r * q, 0.0);
        for (std::size_t c = 0; c < s.channels; ++c)
            for (std::size_t y = 0; y < s.height; ++y)
                for (std::size_t x = 0; x < s.width; ++x) {
                    const std::size_t cell = (y * r / s.height) * q + x * q / s.width;
                    out[c * r * q + cell] += frame[(c * s.height + y) * s.width + x];
                }
        for (std::size_t c = 0; c < s.channels; ++c)
            for (std::size_t k = 0; k < r * q; ++k) out[c * r * q + k] /= static_cast<double>(counts[k]);
        return out;
    }

    std::size_t grid_;
};

/// Deterministic pseudo text embedding: FNV-1a of the text seeds a Gaussian draw,
/// normalized to unit length. Only meaningful as a placeholder for a real text tower.
class HashedTextEncoder final : public TextEncoder {
public:
    explicit HashedTextEncoder(std::size_t dim) : dim_(dim) {
        if (dim == 0) throw ConfigError("text encoder dim must be >= 1");
    }

    std::string name() const override { return "hashed"; }

    Embedding embed_text(std::string_view text) const override {
        std::uint64_t hash = 1469598103934665603ULL;
        for (unsigned char ch : text) {
            hash ^= ch;
            hash *= 1099511628211ULL;
        }
        std::mt19937_64 rng(hash);
        std::normal_distribution<double> normal;
        Embedding e(dim_);
        for (auto& v : e) v = normal(rng);
        const double n = norm(e);
        for (auto& v : e) v /= n;
        return e;
    }

private:
    std::size_t dim_;
};

}  // namespace vdds
