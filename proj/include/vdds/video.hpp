// Copyright (C) 2026 The vdds Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "vdds/errors.hpp"

namespace vdds {

/// Dense N x C x H x W layout shared by pixel videos and latents.
struct Shape4 {
    std::size_t frames = 0;
    std::size_t channels = 0;
    std::size_t height = 0;
    std::size_t width = 0;

    std::size_t plane_size() const { return height * width; }
    std::size_t frame_size() const { return channels * plane_size(); }
    std::size_t size() const { return frames * frame_size(); }

    friend bool operator==(const Shape4&, const Shape4&) = default;
};

inline std::string to_string(const Shape4& s) {
    std::ostringstream os;
    os << s.frames << "x" << s.channels << "x" << s.height << "x" << s.width;
    return os.str();
}

/// Per-frame layout (C, h, w).
struct FrameShape {
    std::size_t channels = 0;
    std::size_t height = 0;
    std::size_t width = 0;

    std::size_t size() const { return channels * height * width; }

    friend bool operator==(const FrameShape&, const FrameShape&) = default;
};

inline FrameShape frame_shape(const Shape4& s) { return {s.channels, s.height, s.width}; }

struct PixelSpace {};
struct LatentSpace {};

/// Row-major float video. The tag keeps pixel-space and latent-space data apart;
/// crossing between them goes through a LatentCodec.
template <class Space>
class Video {
public:
    Video() = default;
    explicit Video(Shape4 shape, float fill = 0.0f)
        : shape_(shape), data_(shape.size(), fill) {}
    Video(Shape4 shape, std::vector<float> data) : shape_(shape), data_(std::move(data)) {
        if (data_.size() != shape_.size()) {
            throw ShapeError("video data holds " + std::to_string(data_.size()) +
                             " values, shape " + vdds::to_string(shape_) + " needs " +
                             std::to_string(shape_.size()));
        }
    }

    const Shape4& shape() const { return shape_; }
    std::size_t frames() const { return shape_.frames; }
    std::size_t size() const { return data_.size(); }
    bool empty() const { return data_.empty(); }

    std::span<float> data() { return data_; }
    std::span<const float> data() const { return data_; }
    const std::vector<float>& values() const { return data_; }

    float& operator[](std::size_t i) { return data_[i]; }
    float operator[](std::size_t i) const { return data_[i]; }

    std::size_t index(std::size_t n, std::size_t c, std::size_t y, std::size_t x) const {
        return ((n * shape_.channels + c) * shape_.height + y) * shape_.width + x;
    }
    float& at(std::size_t n, std::size_t c, std::size_t y, std::size_t x) {
        return data_[index(n, c, y, x)];
    }
    float at(std::size_t n, std::size_t c, std::size_t y, std::size_t x) const {
        return data_[index(n, c, y, x)];
    }

    std::span<float> frame(std::size_t n) {
        return std::span<float>(data_).subspan(n * shape_.frame_size(), shape_.frame_size());
    }
    std::span<const float> frame(std::size_t n) const {
        return std::span<const float>(data_).subspan(n * shape_.frame_size(), shape_.frame_size());
    }
    std::span<float> plane(std::size_t n, std::size_t c) {
        return frame(n).subspan(c * shape_.plane_size(), shape_.plane_size());
    }
    std::span<const float> plane(std::size_t n, std::size_t c) const {
        return frame(n).subspan(c * shape_.plane_size(), shape_.plane_size());
    }

    bool all_finite() const {
        return std::all_of(data_.begin(), data_.end(), [](float v) { return std::isfinite(v); });
    }

    friend bool operator==(const Video&, const Video&) = default;

private:
    Shape4 shape_{};
    std::vector<float> data_;
};

using PixelVideo = Video<PixelSpace>;
using VideoLatent = Video<LatentSpace>;

template <class A, class B>
void require_same_shape(const Video<A>& a, const Video<B>& b, const char* what) {
    if (!(a.shape() == b.shape())) {
        throw ShapeError(std::string(what) + ": shape " + to_string(a.shape()) + " vs " +
                         to_string(b.shape()));
    }
}

/// Elementwise helpers on same-shaped videos, accumulated in double.
template <class S>
double squared_norm(const Video<S>& v) {
    double acc = 0.0;
    for (float x : v.data()) acc += static_cast<double>(x) * x;
    return acc;
}

template <class S>
double max_abs(const Video<S>& v) {
    double m = 0.0;
    for (float x : v.data()) m = std::max(m, std::abs(static_cast<double>(x)));
    return m;
}

template <class S>
double mean(const Video<S>& v) {
    if (v.empty()) return 0.0;
    double acc = 0.0;
    for (float x : v.data()) acc += x;
    return acc / static_cast<double>(v.size());
}

template <class S>
double max_abs_diff(const Video<S>& a, const Video<S>& b) {
    require_same_shape(a, b, "max_abs_diff");
    double m = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        m = std::max(m, std::abs(static_cast<double>(a[i]) - b[i]));
    }
    return m;
}

template <class S>
double mean_squared_error(const Video<S>& a, const Video<S>& b) {
    require_same_shape(a, b, "mean_squared_error");
    if (a.empty()) return 0.0;
    double acc = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double d = static_cast<double>(a[i]) - b[i];
        acc += d * d;
    }
    return acc / static_cast<double>(a.size());
}

}  // namespace vdds
