// Copyright (C) 2026 The vdds Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include "vdds/flow.hpp"
#include "vdds/keyvalue.hpp"
#include "vdds/video.hpp"

namespace vdds {

/// Everything a cached flow set depends on. A cache hit requires every field of
/// every pair header to match exactly.
struct FlowCacheKey {
    std::string estimator;
    int iterations = 0;
    double tau_abs = 0.0;
    double tau_rel = 0.0;
    std::size_t frames = 0;
    std::size_t hops = 0;
    std::size_t pixel_height = 0;
    std::size_t pixel_width = 0;
    std::size_t latent_height = 0;
    std::size_t latent_width = 0;
    std::string frames_hash;
};

/// FNV-1a over the shape and raw float bits of a video.
inline std::string content_hash(const PixelVideo& video) {
    std::uint64_t h = 1469598103934665603ULL;
    auto mix = [&](const void* p, std::size_t n) {
        const auto* b = static_cast<const unsigned char*>(p);
        for (std::size_t i = 0; i < n; ++i) {
            h ^= b[i];
            h *= 1099511628211ULL;
        }
    };
    const Shape4& s = video.shape();
    const std::uint64_t dims[4] = {s.frames, s.channels, s.height, s.width};
    mix(dims, sizeof dims);
    for (float v : video.data()) {
        const auto bits = std::bit_cast<std::uint32_t>(v);
        mix(&bits, sizeof bits);
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

namespace detail {

inline std::string pair_stem(int src, int dst) {
    return "flow_" + std::to_string(src) + "_" + std::to_string(dst);
}

inline KeyValues cache_header(const FlowCacheKey& k, int src, int dst) {
    const std::string stem = pair_stem(src, dst);
    return {
        {"format", "vdds-flow-cache"},
        {"version", "1"},
        {"src", std::to_string(src)},
        {"dst", std::to_string(dst)},
        {"frames", std::to_string(k.frames)},
        {"hops", std::to_string(k.hops)},
        {"pixel_height", std::to_string(k.pixel_height)},
        {"pixel_width", std::to_string(k.pixel_width)},
        {"height", std::to_string(k.latent_height)},
        {"width", std::to_string(k.latent_width)},
        {"units", "latent"},
        {"layout", "f32le [2][height][width] x-plane then y-plane, row-major"},
        {"resample", "bilinear align_corners=false"},
        {"estimator", k.estimator},
        {"iterations", std::to_string(k.iterations)},
        {"tau_abs", format_double(k.tau_abs)},
        {"tau_rel", format_double(k.tau_rel)},
        {"frames_hash", k.frames_hash},
        {"flow_file", stem + ".f32"},
        {"mask_file", stem + ".mask"},
    };
}

inline void write_f32le(std::ofstream& out, const std::vector<float>& v) {
    for (float x : v) {
        auto bits = std::bit_cast<std::uint32_t>(x);
        if constexpr (std::endian::native == std::endian::big) bits = __builtin_bswap32(bits);
        out.write(reinterpret_cast<const char*>(&bits), sizeof bits);
    }
}

inline bool read_f32le(std::ifstream& in, std::vector<float>& v) {
    for (float& x : v) {
        std::uint32_t bits = 0;
        if (!in.read(reinterpret_cast<char*>(&bits), sizeof bits)) return false;
        if constexpr (std::endian::native == std::endian::big) bits = __builtin_bswap32(bits);
        x = std::bit_cast<float>(bits);
    }
    return in.peek() == std::char_traits<char>::eof();
}

}  // namespace detail

/// Pairs a flow set built with `k` must contain.
inline std::vector<FramePair> expected_pairs(const FlowCacheKey& k) {
    std::vector<FramePair> pairs;
    for (std::size_t h = 1; h <= k.hops; ++h)
        for (std::size_t i = 0; i + h < k.frames; ++i) {
            pairs.emplace_back(static_cast<int>(i), static_cast<int>(i + h));
            pairs.emplace_back(static_cast<int>(i + h), static_cast<int>(i));
        }
    return pairs;
}

/// Writes one .f32 (vectors), one .mask (1 byte per cell) and one .hdr (key = value)
/// per pair into `dir`.
inline void write_flow_cache(const std::filesystem::path& dir, const FlowSet& flows, const FlowCacheKey& k) {
    std::filesystem::create_directories(dir);
    for (const auto& [key, entry] : flows.entries()) {
        const KeyValues header = detail::cache_header(k, key.first, key.second);
        {
            std::ofstream out(dir / header.at("flow_file"), std::ios::binary);
            if (!out) throw InputError("cannot write flow cache in " + dir.string());
            detail::write_f32le(out, entry.flow.vectors);
        }
        {
            std::ofstream out(dir / header.at("mask_file"), std::ios::binary);
            out.write(reinterpret_cast<const char*>(entry.mask.cells.data()),
                      static_cast<std::streamsize>(entry.mask.cells.size()));
        }
        // header last: a pair only counts as cached once its header exists
        std::ofstream hdr(dir / (detail::pair_stem(key.first, key.second) + ".hdr"));
        hdr << format_key_values(header);
    }
}

/// Loads a cached flow set if every expected pair has an exactly matching header
/// and well-formed payloads; otherwise nullopt.
inline std::optional<FlowSet> load_flow_cache(const std::filesystem::path& dir, const FlowCacheKey& k) {
    FlowSet flows(k.frames, k.hops);
    const std::size_t h = k.latent_height, w = k.latent_width;
    for (const auto& [src, dst] : expected_pairs(k)) {
        const auto hdr_path = dir / (detail::pair_stem(src, dst) + ".hdr");
        if (!std::filesystem::exists(hdr_path)) return std::nullopt;
        KeyValues found;
        try {
            found = read_key_values(hdr_path);
        } catch (const Error&) {
            return std::nullopt;
        }
        const KeyValues expected = detail::cache_header(k, src, dst);
        if (found != expected) return std::nullopt;

        FlowEntry entry{FlowField(h, w, src, dst), ValidityMask(h, w, false)};
        std::ifstream fin(dir / expected.at("flow_file"), std::ios::binary);
        if (!fin || !detail::read_f32le(fin, entry.flow.vectors)) return std::nullopt;
        std::ifstream min(dir / expected.at("mask_file"), std::ios::binary);
        if (!min) return std::nullopt;
        min.read(reinterpret_cast<char*>(entry.mask.cells.data()), static_cast<std::streamsize>(h * w));
        if (static_cast<std::size_t>(min.gcount()) != h * w || min.peek() != std::char_traits<char>::eof()) {
            return std::nullopt;
        }
        for (auto& c : entry.mask.cells) {
            if (c > 1) return std::nullopt;
        }
        flows.insert(std::move(entry));
    }
    return flows;
}

}  // namespace vdds
