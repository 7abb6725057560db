// Copyright (C) 2026 The vdds Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "vdds/dds.hpp"
#include "vdds/errors.hpp"
#include "vdds/video.hpp"

namespace vdds {

/// Dense displacement field stored as [2][h][w]: x plane (+x right) then y plane (+y down).
/// A point p of frame `src` moves to p + f(p) in frame `dst`.
struct FlowField {
    std::size_t height = 0;
    std::size_t width = 0;
    int src = 0;
    int dst = 0;
    std::vector<float> vectors;

    FlowField() = default;
    FlowField(std::size_t h, std::size_t w, int from, int to)
        : height(h), width(w), src(from), dst(to), vectors(2 * h * w, 0.0f) {}

    static FlowField constant(std::size_t h, std::size_t w, int from, int to, float u, float v) {
        FlowField f(h, w, from, to);
        std::fill(f.vectors.begin(), f.vectors.begin() + h * w, u);
        std::fill(f.vectors.begin() + h * w, f.vectors.end(), v);
        return f;
    }

    std::size_t plane_size() const { return height * width; }
    float& dx(std::size_t y, std::size_t x) { return vectors[y * width + x]; }
    float dx(std::size_t y, std::size_t x) const { return vectors[y * width + x]; }
    float& dy(std::size_t y, std::size_t x) { return vectors[plane_size() + y * width + x]; }
    float dy(std::size_t y, std::size_t x) const { return vectors[plane_size() + y * width + x]; }
    std::span<const float> x_plane() const { return std::span(vectors).first(plane_size()); }
    std::span<const float> y_plane() const { return std::span(vectors).subspan(plane_size()); }
};

/// Per-cell validity, 1 byte per cell.
struct ValidityMask {
    std::size_t height = 0;
    std::size_t width = 0;
    std::vector<std::uint8_t> cells;

    ValidityMask() = default;
    ValidityMask(std::size_t h, std::size_t w, bool value)
        : height(h), width(w), cells(h * w, value ? 1 : 0) {}

    bool operator()(std::size_t y, std::size_t x) const { return cells[y * width + x] != 0; }
    void set(std::size_t y, std::size_t x, bool v) { cells[y * width + x] = v ? 1 : 0; }

    std::size_t count() const {
        std::size_t n = 0;
        for (auto c : cells) n += c != 0;
        return n;
    }
    double fraction() const {
        return cells.empty() ? 0.0 : static_cast<double>(count()) / static_cast<double>(cells.size());
    }
};

using FramePair = std::pair<int, int>;

/// Pixel-resolution, unfiltered flows keyed by (src, dst).
struct RawFlowSet {
    std::size_t frames = 0;
    std::size_t hops = 0;
    std::map<FramePair, FlowField> fields;
};

struct FlowEntry {
    FlowField flow;
    ValidityMask mask;
};

/// Filtered flows at latent resolution for all pairs with |i - j| <= hops,
/// both directions present for every stored pair.
class FlowSet {
public:
    FlowSet() = default;
    FlowSet(std::size_t frames, std::size_t hops) : frames_(frames), hops_(hops) {}

    std::size_t frames() const { return frames_; }
    std::size_t hops() const { return hops_; }
    std::size_t size() const { return entries_.size(); }
    bool empty() const { return entries_.empty(); }

    void insert(FlowEntry entry) {
        const FramePair key{entry.flow.src, entry.flow.dst};
        if (entry.mask.height != entry.flow.height || entry.mask.width != entry.flow.width) {
            throw ShapeError("flow and mask dims differ for pair " + describe(key));
        }
        entries_[key] = std::move(entry);
    }

    const FlowEntry* find(int src, int dst) const {
        const auto it = entries_.find({src, dst});
        return it == entries_.end() ? nullptr : &it->second;
    }

    const std::map<FramePair, FlowEntry>& entries() const { return entries_; }

    /// Throws unless every stored pair has its reverse.
    void check_bidirectional() const {
        for (const auto& [key, _] : entries_) {
            if (!entries_.contains({key.second, key.first})) {
                throw InputError("flow set has " + describe(key) + " without its reverse");
            }
        }
    }

    static std::string describe(const FramePair& p) {
        return "(" + std::to_string(p.first) + "->" + std::to_string(p.second) + ")";
    }

private:
    std::size_t frames_ = 0;
    std::size_t hops_ = 0;
    std::map<FramePair, FlowEntry> entries_;
};

/// Bilinear sample of a single h x w plane at (x, y). Returns nullopt outside
/// [0, w-1] x [0, h-1]. Integer coordinates return the stored value bit for bit.
inline std::optional<float> sample_bilinear(std::span<const float> plane, std::size_t h,
                                            std::size_t w, double x, double y) {
    if (!(x >= 0.0 && y >= 0.0 && x <= static_cast<double>(w - 1) &&
          y <= static_cast<double>(h - 1))) {
        return std::nullopt;
    }
    const auto x0 = static_cast<std::size_t>(std::floor(x));
    const auto y0 = static_cast<std::size_t>(std::floor(y));
    const double fx = x - static_cast<double>(x0);
    const double fy = y - static_cast<double>(y0);
    if (fx == 0.0 && fy == 0.0) return plane[y0 * w + x0];
    const std::size_t x1 = std::min(x0 + 1, w - 1);
    const std::size_t y1 = std::min(y0 + 1, h - 1);
    const double top = (1.0 - fx) * plane[y0 * w + x0] + fx * plane[y0 * w + x1];
    const double bottom = (1.0 - fx) * plane[y1 * w + x0] + fx * plane[y1 * w + x1];
    return static_cast<float>((1.0 - fy) * top + fy * bottom);
}

/// Dense flow between two frames of a pixel video.
class FlowEstimator {
public:
    virtual ~FlowEstimator() = default;
    virtual std::string name() const = 0;
    /// Refinement iterations (recorded in cache headers; 0 when not applicable).
    virtual int iterations() const = 0;
    virtual FlowField estimate(const PixelVideo& frames, int src, int dst) const = 0;
};

/// Global-translation estimator: exhaustive integer search over [-radius, radius]^2
/// minimizing mean squared difference on the overlap. Ties prefer the smaller shift.
class RigidShiftEstimator final : public FlowEstimator {
public:
    explicit RigidShiftEstimator(int radius = 8) : radius_(radius) {
        if (radius < 0) throw ConfigError("rigid shift radius must be >= 0");
    }

    std::string name() const override { return "rigid_shift"; }
    int iterations() const override { return 0; }
    int radius() const { return radius_; }

    FlowField estimate(const PixelVideo& frames, int src, int dst) const override {
        const Shape4& s = frames.shape();
        const auto h = static_cast<long>(s.height);
        const auto w = static_cast<long>(s.width);
        double best = std::numeric_limits<double>::infinity();
        int best_u = 0, best_v = 0;
        for (int v = -radius_; v <= radius_; ++v) {
            for (int u = -radius_; u <= radius_; ++u) {
                const long x_lo = std::max(0L, -static_cast<long>(u));
                const long x_hi = std::min(w, w - u);
                const long y_lo = std::max(0L, -static_cast<long>(v));
                const long y_hi = std::min(h, h - v);
                if (x_lo >= x_hi || y_lo >= y_hi) continue;
                double acc = 0.0;
                for (std::size_t c = 0; c < s.channels; ++c) {
                    const auto a = frames.plane(static_cast<std::size_t>(src), c);
                    const auto b = frames.plane(static_cast<std::size_t>(dst), c);
                    for (long y = y_lo; y < y_hi; ++y)
                        for (long x = x_lo; x < x_hi; ++x) {
                            const double d = static_cast<double>(a[y * w + x]) -
                                             b[(y + v) * w + (x + u)];
                            acc += d * d;
                        }
                }
                const double cost = acc / static_cast<double>((x_hi - x_lo) * (y_hi - y_lo));
                const bool better = cost < best ||
                                    (cost == best && u * u + v * v < best_u * best_u + best_v * best_v);
                if (better) {
                    best = cost;
                    best_u = u;
                    best_v = v;
                }
            }
        }
        return FlowField::constant(s.height, s.width, src, dst, static_cast<float>(best_u),
                                   static_cast<float>(best_v));
    }

private:
    int radius_;
};

/// Both directions for every pair of frames at most `hops` apart.
inline RawFlowSet estimate_flows(const PixelVideo& frames, std::size_t hops,
                                 const FlowEstimator& est) {
    const std::size_t n = frames.frames();
    if (n < 2) throw InputError("flow estimation needs at least 2 frames, got " + std::to_string(n));
    if (hops < 1 || hops >= n) {
        throw ConfigError("hop count " + std::to_string(hops) + " outside [1, " +
                          std::to_string(n - 1) + "]");
    }
    RawFlowSet raw{n, hops, {}};
    for (std::size_t h = 1; h <= hops; ++h) {
        for (std::size_t i = 0; i + h < n; ++i) {
            const int a = static_cast<int>(i);
            const int b = static_cast<int>(i + h);
            for (const auto& [src, dst] : {FramePair{a, b}, FramePair{b, a}}) {
                FlowField f;
                try {
                    f = est.estimate(frames, src, dst);
                } catch (const std::exception& e) {
                    throw BackendError("flow estimator " + est.name() + " failed on pair " +
                                       FlowSet::describe({src, dst}) + ": " + e.what());
                }
                if (f.height != frames.shape().height || f.width != frames.shape().width) {
                    throw BackendError("flow estimator " + est.name() + " returned wrong dims for " +
                                       FlowSet::describe({src, dst}));
                }
                f.src = src;
                f.dst = dst;
                raw.fields[{src, dst}] = std::move(f);
            }
        }
    }
    return raw;
}

/// Forward-backward check on the grid of f_ij's source frame. A cell is valid when it
/// lands inside the frame and ||f_ij(p) + f_ji(p + f_ij(p))|| < max(tau_abs, tau_rel * ||f_ij(p)||),
/// with f_ji sampled bilinearly at the landing point.
inline ValidityMask cycle_mask(const FlowField& f_ij, const FlowField& f_ji, double tau_abs,
                               double tau_rel) {
    if (f_ij.height != f_ji.height || f_ij.width != f_ji.width) {
        throw ShapeError("cycle_mask: flow dims differ");
    }
    const std::size_t h = f_ij.height, w = f_ij.width;
    ValidityMask mask(h, w, false);
    for (std::size_t y = 0; y < h; ++y) {
        for (std::size_t x = 0; x < w; ++x) {
            const double u = f_ij.dx(y, x);
            const double v = f_ij.dy(y, x);
            const double qx = static_cast<double>(x) + u;
            const double qy = static_cast<double>(y) + v;
            const auto bu = sample_bilinear(f_ji.x_plane(), h, w, qx, qy);
            if (!bu) continue;
            const auto bv = sample_bilinear(f_ji.y_plane(), h, w, qx, qy);
            const double ex = u + *bu;
            const double ey = v + *bv;
            const double err = std::sqrt(ex * ex + ey * ey);
            const double threshold = std::max(tau_abs, tau_rel * std::sqrt(u * u + v * v));
            mask.set(y, x, err < threshold);
        }
    }
    return mask;
}

/// Resample a pixel flow and mask onto an h x w latent grid (align-corners = false).
/// Vectors are sampled bilinearly at cell centres and rescaled to latent units; a cell
/// is valid when at least half the pixels it covers are valid and its latent landing
/// point stays inside the grid.
inline FlowEntry downsample_to_latent(const FlowField& f, const ValidityMask& m, std::size_t h,
                                      std::size_t w) {
    if (m.height != f.height || m.width != f.width) {
        throw ShapeError("downsample_to_latent: mask dims differ from flow dims");
    }
    if (h == 0 || w == 0 || h > f.height || w > f.width) {
        throw ShapeError("latent grid " + std::to_string(h) + "x" + std::to_string(w) +
                         " invalid for pixel flow " + std::to_string(f.height) + "x" +
                         std::to_string(f.width));
    }
    const double sy = static_cast<double>(f.height) / static_cast<double>(h);
    const double sx = static_cast<double>(f.width) / static_cast<double>(w);

    FlowEntry out{FlowField(h, w, f.src, f.dst), ValidityMask(h, w, false)};
    for (std::size_t y = 0; y < h; ++y) {
        for (std::size_t x = 0; x < w; ++x) {
            const double px = (static_cast<double>(x) + 0.5) * sx - 0.5;
            const double py = (static_cast<double>(y) + 0.5) * sy - 0.5;
            out.flow.dx(y, x) = static_cast<float>(
                *sample_bilinear(f.x_plane(), f.height, f.width, px, py) / sx);
            out.flow.dy(y, x) = static_cast<float>(
                *sample_bilinear(f.y_plane(), f.height, f.width, px, py) / sy);
        }
    }

    std::vector<std::size_t> total(h * w, 0), valid(h * w, 0);
    for (std::size_t py = 0; py < f.height; ++py) {
        const std::size_t cy = py * h / f.height;
        for (std::size_t px = 0; px < f.width; ++px) {
            const std::size_t cell = cy * w + px * w / f.width;
            ++total[cell];
            valid[cell] += m(py, px) ? 1 : 0;
        }
    }
    for (std::size_t y = 0; y < h; ++y) {
        for (std::size_t x = 0; x < w; ++x) {
            const std::size_t cell = y * w + x;
            const double lx = static_cast<double>(x) + out.flow.dx(y, x);
            const double ly = static_cast<double>(y) + out.flow.dy(y, x);
            const bool lands = lx >= 0.0 && ly >= 0.0 && lx <= static_cast<double>(w - 1) &&
                               ly <= static_cast<double>(h - 1);
            out.mask.set(y, x, total[cell] > 0 && 2 * valid[cell] >= total[cell] && lands);
        }
    }
    return out;
}

/// Cycle-filter every pair and move it to latent resolution.
inline FlowSet prepare_flows(const RawFlowSet& raw, double tau_abs, double tau_rel,
                             std::size_t latent_h, std::size_t latent_w) {
    FlowSet out(raw.frames, raw.hops);
    for (const auto& [key, f_ij] : raw.fields) {
        const auto rev = raw.fields.find({key.second, key.first});
        if (rev == raw.fields.end()) {
            throw InputError("raw flow set has " + FlowSet::describe(key) + " without its reverse");
        }
        const ValidityMask mask = cycle_mask(f_ij, rev->second, tau_abs, tau_rel);
        out.insert(downsample_to_latent(f_ij, mask, latent_h, latent_w));
    }
    return out;
}

struct WarpResult {
    std::vector<float> values;  // C x h x w
    ValidityMask coverage;
};

/// Backward warp of one frame's gradient: out(p) = grad(p + flow(p)) wherever mask(p)
/// holds and the sample point is in bounds. Other cells are uncovered and zero.
inline WarpResult warp_gradient(std::span<const float> grad, FrameShape shape,
                                const FlowField& flow, const ValidityMask& mask) {
    if (grad.size() != shape.size()) throw ShapeError("warp_gradient: gradient size mismatch");
    if (flow.height != shape.height || flow.width != shape.width || mask.height != shape.height ||
        mask.width != shape.width) {
        throw ShapeError("warp_gradient: flow/mask dims differ from gradient dims");
    }
    const std::size_t h = shape.height, w = shape.width, plane = h * w;
    WarpResult out{std::vector<float>(shape.size(), 0.0f), ValidityMask(h, w, false)};
    for (std::size_t y = 0; y < h; ++y) {
        for (std::size_t x = 0; x < w; ++x) {
            if (!mask(y, x)) continue;
            const double sx = static_cast<double>(x) + flow.dx(y, x);
            const double sy = static_cast<double>(y) + flow.dy(y, x);
            bool covered = true;
            for (std::size_t c = 0; c < shape.channels && covered; ++c) {
                const auto v = sample_bilinear(grad.subspan(c * plane, plane), h, w, sx, sy);
                if (!v) {
                    covered = false;
                    break;
                }
                out.values[c * plane + y * w + x] = *v;
            }
            out.coverage.set(y, x, covered);
        }
    }
    return out;
}

/// Default per-hop fusion weights, proportional to 0.5^(h-1).
inline std::vector<double> default_hop_weights(std::size_t hops) {
    std::vector<double> w(hops);
    double v = 1.0;
    for (auto& x : w) {
        x = v;
        v *= 0.5;
    }
    return w;
}

/// Flow-guided fusion of per-frame gradients. For frame i and position p:
///   out = (1 - a) * g_i + a * sum_k omega_k * warped_k / sum_k omega_k
/// over neighbours i +- h (h <= H) whose warp covers p. a = alpha when at least one
/// neighbour survives, otherwise the original gradient is kept unchanged.
/// Neighbour j is brought onto frame i's grid with the stored pair (i, j) and its
/// cycle mask, both defined on frame i's grid.
inline GradientField refine_gradients(const GradientField& grads, const FlowSet& flows,
                                      double alpha, std::span<const double> omegas) {
    if (!(alpha >= 0.0 && alpha <= 1.0)) {
        throw ConfigError("refinement alpha must lie in [0, 1], got " + std::to_string(alpha));
    }
    for (double o : omegas) {
        if (!(o >= 0.0) || !std::isfinite(o)) throw ConfigError("hop weights must be finite and >= 0");
    }
    if (alpha == 0.0) return grads;

    const Shape4& s = grads.data.shape();
    if (flows.frames() >= 2) {
        if (flows.frames() != s.frames) {
            throw ShapeError("flow set covers " + std::to_string(flows.frames()) +
                             " frames, gradient has " + std::to_string(s.frames));
        }
        if (omegas.size() < flows.hops()) {
            throw ConfigError("need " + std::to_string(flows.hops()) + " hop weights, got " +
                              std::to_string(omegas.size()));
        }
    }
    const FrameShape fs = frame_shape(s);
    const std::size_t plane = fs.height * fs.width;
    const auto n = static_cast<int>(s.frames);

    GradientField out = grads;
    std::vector<double> weight(plane);
    std::vector<double> acc(fs.size());
    for (int i = 0; i < n; ++i) {
        std::fill(weight.begin(), weight.end(), 0.0);
        std::fill(acc.begin(), acc.end(), 0.0);
        for (std::size_t h = 1; h <= omegas.size(); ++h) {
            const double omega = omegas[h - 1];
            if (omega == 0.0) continue;
            for (int j : {i + static_cast<int>(h), i - static_cast<int>(h)}) {
                if (j < 0 || j >= n) continue;
                const FlowEntry* entry = flows.find(i, j);
                if (!entry) continue;
                const WarpResult warped =
                    warp_gradient(grads.data.frame(static_cast<std::size_t>(j)), fs, entry->flow,
                                  entry->mask);
                for (std::size_t p = 0; p < plane; ++p) {
                    if (!warped.coverage.cells[p]) continue;
                    weight[p] += omega;
                    for (std::size_t c = 0; c < fs.channels; ++c) {
                        acc[c * plane + p] += omega * warped.values[c * plane + p];
                    }
                }
            }
        }
        auto dst = out.data.frame(static_cast<std::size_t>(i));
        const auto src = grads.data.frame(static_cast<std::size_t>(i));
        for (std::size_t p = 0; p < plane; ++p) {
            if (weight[p] <= 0.0) continue;
            for (std::size_t c = 0; c < fs.channels; ++c) {
                const std::size_t k = c * plane + p;
                dst[k] = static_cast<float>((1.0 - alpha) * src[k] + alpha * acc[k] / weight[p]);
            }
        }
    }
    return out;
}

}  // namespace vdds
