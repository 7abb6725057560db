// Copyright (C) 2026 The vdds Authors
// SPDX-License-Identifier: Apache-2.0

// Shared fixtures and independent reference computations for the test suites.
// Oracles here deliberately avoid calling into the library for the quantity under test.

#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <random>
#include <string>
#include <vector>

#include "vdds/backend.hpp"
#include "vdds/flow.hpp"
#include "vdds/image_io.hpp"
#include "vdds/schedule.hpp"
#include "vdds/video.hpp"

namespace vdds::test {

namespace fs = std::filesystem;

inline VideoLatent random_latent(const Shape4& s, std::mt19937_64& rng, double scale = 1.0) {
    std::normal_distribution<double> normal(0.0, scale);
    VideoLatent v(s);
    for (auto& x : v.data()) x = static_cast<float>(normal(rng));
    return v;
}

inline PixelVideo random_pixels(const Shape4& s, std::mt19937_64& rng, double lo = 0.0, double hi = 1.0) {
    std::uniform_real_distribution<double> uni(lo, hi);
    PixelVideo v(s);
    for (auto& x : v.data()) x = static_cast<float>(uni(rng));
    return v;
}

/// Cumulative product of 1 - beta for the linear schedule, computed in long double via logs.
inline long double oracle_alpha_bar(int t, int steps, long double b0, long double b1) {
    long double log_sum = 0.0L;
    for (int s = 1; s <= t; ++s) {
        const long double frac = steps == 1 ? 0.0L : static_cast<long double>(s - 1) / (steps - 1);
        log_sum += std::log1p(-(b0 + (b1 - b0) * frac));
    }
    return std::exp(log_sum);
}

/// Gaussian backend with constant per-prompt means and a null prompt.
inline GaussianAnalyticBackend gaussian_backend(FrameShape latent, double sigma, float mu_src, float mu_tgt,
                                                float mu_null = 0.0f, const DiffusionSchedule& sched =
                                                                          make_schedule(1000, 1e-4, 0.02)) {
    GaussianAnalyticBackend b(sched, latent, sigma);
    b.add_prompt("source", mu_src);
    b.add_prompt("target", mu_tgt);
    b.set_null_mean(mu_null);
    return b;
}

/// Exact flows for a scene translating by (u, v) latent cells per frame: every pair
/// (i, j) within `hops` gets the constant field (j - i) * (u, v) and its cycle mask.
inline FlowSet translating_flows(std::size_t frames, std::size_t hops, std::size_t h, std::size_t w, float u,
                                 float v, double tau_abs = 3.0, double tau_rel = 0.05) {
    FlowSet set(frames, hops);
    for (std::size_t hop = 1; hop <= hops; ++hop) {
        for (std::size_t i = 0; i + hop < frames; ++i) {
            const int a = static_cast<int>(i), b = static_cast<int>(i + hop);
            const float k = static_cast<float>(hop);
            const FlowField fwd = FlowField::constant(h, w, a, b, k * u, k * v);
            const FlowField bwd = FlowField::constant(h, w, b, a, -k * u, -k * v);
            set.insert({fwd, cycle_mask(fwd, bwd, tau_abs, tau_rel)});
            set.insert({bwd, cycle_mask(bwd, fwd, tau_abs, tau_rel)});
        }
    }
    return set;
}

/// Fresh empty directory under the system temp dir, removed on destruction.
class TempDir {
public:
    explicit TempDir(const std::string& tag) {
        std::random_device rd;
        path_ = fs::temp_directory_path() /
                ("vdds_" + tag + "_" + std::to_string(rd()) + "_" + std::to_string(rd()));
        fs::remove_all(path_);
        fs::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        fs::remove_all(path_, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    const fs::path& path() const { return path_; }
    fs::path operator/(const std::string& name) const { return path_ / name; }

private:
    fs::path path_;
};

inline void write_text(const fs::path& path, const std::string& text) {
    std::ofstream out(path);
    out << text;
}

inline std::string read_bytes(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    return std::string(std::istreambuf_iterator<char>(in), {});
}

/// A smooth RGB pattern translated by `shift` pixels per frame (wrapping), values in [0.1, 0.9].
inline PixelVideo translating_pattern(std::size_t frames, std::size_t h, std::size_t w, int shift) {
    PixelVideo v(Shape4{frames, 3, h, w});
    for (std::size_t n = 0; n < frames; ++n)
        for (std::size_t c = 0; c < 3; ++c)
            for (std::size_t y = 0; y < h; ++y)
                for (std::size_t x = 0; x < w; ++x) {
                    const long sx = (static_cast<long>(x) - static_cast<long>(n) * shift) % static_cast<long>(w);
                    const double px = static_cast<double>(sx < 0 ? sx + static_cast<long>(w) : sx);
                    const double val = 0.5 + 0.2 * std::sin(0.7 * px + 1.3 * static_cast<double>(c)) +
                                       0.2 * std::cos(0.45 * static_cast<double>(y) + 0.3 * px);
                    v.at(n, c, y, x) = static_cast<float>(val);
                }
    return v;
}

/// Writes a self-contained edit case (frames, config, manifest) under `root` and
/// returns the manifest path.
inline fs::path write_case_fixture(const fs::path& root, const std::string& config_text,
                                   std::size_t frames = 6, std::size_t h = 32, std::size_t w = 32) {
    const PixelVideo video = translating_pattern(frames, h, w, 2);
    fs::create_directories(root / "frames");
    save_frames(video, root / "frames", numbered_names(frames));
    write_text(root / "edit.cfg", config_text);
    write_text(root / "case.manifest",
               "case_id = fixture\n"
               "frames = frames\n"
               "source_prompt = a red car\n"
               "target_prompt = a blue car\n"
               "config = edit.cfg\n"
               "output = out\n");
    return root / "case.manifest";
}

inline const char* fixture_config =
    "schema_version = 1\n"
    "steps = 40\n"
    "lr = 0.1\n"
    "guidance = 7.5\n"
    "w1 = 1.0\n"
    "w2 = 0.1\n"
    "hops = 2\n"
    "seed = 7\n"
    "codec.kind = avgpool\n"
    "codec.factor = 4\n"
    "backend.sigma = 0.1\n"
    "backend.source_mean = 0.3\n"
    "backend.target_mean = 0.7\n"
    "backend.null_mean = 0.5\n"
    "estimator.radius = 4\n"
    "sheet.cols = 3\n";

}  // namespace vdds::test
