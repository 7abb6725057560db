// Copyright (C) 2026 The vdds Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cmath>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "vdds/errors.hpp"
#include "vdds/schedule.hpp"
#include "vdds/video.hpp"

namespace vdds {

/// Resolved conditioning text. Equal ids mean interchangeable conditioning.
struct PromptEmbedding {
    std::string id;
    std::vector<float> payload;  // backend specific, may be empty

    friend bool operator==(const PromptEmbedding& a, const PromptEmbedding& b) { return a.id == b.id; }
};

/// Noise predictor eps_theta(z_t, t, y). Implementations must be deterministic
/// and safe for concurrent const calls; adapters around single-threaded engines
/// serialize internally.
class ScoreBackend {
public:
    virtual ~ScoreBackend() = default;

    virtual std::string name() const = 0;
    virtual const DiffusionSchedule& schedule() const = 0;
    virtual FrameShape latent_shape() const = 0;

    /// Resolve conditioning text; throws ConfigError for prompts the backend cannot serve.
    virtual PromptEmbedding embed_prompt(std::string_view text) const = 0;

    /// Unconditional prompt for classifier-free guidance, if supported.
    virtual std::optional<PromptEmbedding> null_prompt() const = 0;

    virtual VideoLatent predict_noise(const VideoLatent& zt, Timestep t,
                                      const PromptEmbedding& y) const = 0;
};

inline void check_latent_shape(const ScoreBackend& b, const VideoLatent& zt) {
    if (!(frame_shape(zt.shape()) == b.latent_shape())) {
        const auto ls = b.latent_shape();
        throw ShapeError("backend " + b.name() + " expects frames of " +
                         std::to_string(ls.channels) + "x" + std::to_string(ls.height) + "x" +
                         std::to_string(ls.width) + ", got " + to_string(zt.shape()));
    }
}

/// Classifier-free guidance: eps_null + w * (eps_y - eps_null).
inline VideoLatent predict_noise_cfg(const ScoreBackend& b, const VideoLatent& zt, Timestep t,
                                     const PromptEmbedding& y, double w) {
    const auto null = b.null_prompt();
    if (!null) throw CapabilityError("backend " + b.name() + " has no null prompt for guidance");
    VideoLatent cond = b.predict_noise(zt, t, y);
    if (w == 1.0) return cond;
    const VideoLatent uncond = b.predict_noise(zt, t, *null);
    for (std::size_t i = 0; i < cond.size(); ++i) {
        cond[i] = static_cast<float>(uncond[i] + w * (static_cast<double>(cond[i]) - uncond[i]));
    }
    return cond;
}

/// Closed-form stand-in for a trained noise predictor. With z0 ~ N(mu(y), sigma^2 I)
/// per frame, the posterior-optimal predictor is
///   sqrt(1 - abar) * (z_t - sqrt(abar) * mu(y)) / (abar * sigma^2 + 1 - abar).
/// Frames are treated independently (no temporal prior).
class GaussianAnalyticBackend final : public ScoreBackend {
public:
    static constexpr std::string_view null_id = "<null>";

    GaussianAnalyticBackend(DiffusionSchedule sched, FrameShape latent, double sigma)
        : schedule_(std::move(sched)), latent_(latent), sigma_(sigma) {
        if (!(sigma >= 0.0) || !std::isfinite(sigma)) {
            throw ConfigError("gaussian backend sigma must be finite and >= 0");
        }
        if (latent.size() == 0) throw ConfigError("gaussian backend latent shape is empty");
    }

    /// Register a prompt whose mean latent is `mean` (one frame, C x h x w).
    void add_prompt(std::string id, std::vector<float> mean) {
        if (mean.size() != latent_.size()) {
            throw ShapeError("prompt mean for '" + id + "' has " + std::to_string(mean.size()) +
                             " values, latent frame needs " + std::to_string(latent_.size()));
        }
        means_[std::move(id)] = std::move(mean);
    }
    void add_prompt(std::string id, float constant_mean) {
        add_prompt(std::move(id), std::vector<float>(latent_.size(), constant_mean));
    }
    void set_null_mean(float constant_mean) { add_prompt(std::string(null_id), constant_mean); }

    const std::vector<float>& mean(const std::string& id) const {
        const auto it = means_.find(id);
        if (it == means_.end()) throw ConfigError("unknown prompt id '" + id + "'");
        return it->second;
    }

    double sigma() const { return sigma_; }

    std::string name() const override { return "gaussian"; }
    const DiffusionSchedule& schedule() const override { return schedule_; }
    FrameShape latent_shape() const override { return latent_; }

    PromptEmbedding embed_prompt(std::string_view text) const override {
        std::string id(text);
        mean(id);
        return PromptEmbedding{std::move(id), {}};
    }

    std::optional<PromptEmbedding> null_prompt() const override {
        if (!means_.contains(std::string(null_id))) return std::nullopt;
        return PromptEmbedding{std::string(null_id), {}};
    }

    VideoLatent predict_noise(const VideoLatent& zt, Timestep t,
                              const PromptEmbedding& y) const override {
        check_latent_shape(*this, zt);
        const auto& mu = mean(y.id);
        const double abar = schedule_.alpha_bar(t);
        const double signal = std::sqrt(abar);
        const double gain = std::sqrt(1.0 - abar) / (abar * sigma_ * sigma_ + 1.0 - abar);
        VideoLatent out(zt.shape());
        const std::size_t per_frame = latent_.size();
        for (std::size_t i = 0; i < zt.size(); ++i) {
            out[i] = static_cast<float>(gain * (zt[i] - signal * mu[i % per_frame]));
        }
        return out;
    }

private:
    DiffusionSchedule schedule_;
    FrameShape latent_;
    double sigma_;
    std::map<std::string, std::vector<float>, std::less<>> means_;
};

/// Pixel <-> latent mapping E(.) / D(.). `decode_vjp` is the adjoint of `decode`,
/// used to pull pixel-space gradients back into latent space.
class LatentCodec {
public:
    virtual ~LatentCodec() = default;

    virtual std::string name() const = 0;
    virtual std::size_t factor() const = 0;
    virtual std::size_t latent_channels(std::size_t pixel_channels) const = 0;

    virtual VideoLatent encode(const PixelVideo& frames) const = 0;
    virtual PixelVideo decode(const VideoLatent& latent) const = 0;
    virtual VideoLatent decode_vjp(const VideoLatent& latent, const PixelVideo& grad) const = 0;

    Shape4 latent_shape_for(const Shape4& pixels) const {
        const std::size_t f = factor();
        if (pixels.height % f != 0 || pixels.width % f != 0) {
            throw ShapeError("pixel dims " + std::to_string(pixels.height) + "x" +
                             std::to_string(pixels.width) + " not divisible by codec factor " +
                             std::to_string(f));
        }
        return {pixels.frames, latent_channels(pixels.channels), pixels.height / f,
                pixels.width / f};
    }
};

class IdentityCodec final : public LatentCodec {
public:
    std::string name() const override { return "identity"; }
    std::size_t factor() const override { return 1; }
    std::size_t latent_channels(std::size_t c) const override { return c; }

    VideoLatent encode(const PixelVideo& frames) const override {
        return VideoLatent(frames.shape(), frames.values());
    }
    PixelVideo decode(const VideoLatent& latent) const override {
        return PixelVideo(latent.shape(), latent.values());
    }
    VideoLatent decode_vjp(const VideoLatent& latent, const PixelVideo& grad) const override {
        require_same_shape(latent, grad, "identity decode_vjp");
        return VideoLatent(grad.shape(), grad.values());
    }
};

/// f x f average-pool encoder, nearest-neighbour (block replicate) decoder.
class AvgPoolCodec final : public LatentCodec {
public:
    explicit AvgPoolCodec(std::size_t factor) : factor_(factor) {
        if (factor == 0) throw ConfigError("avgpool codec factor must be >= 1");
    }

    std::string name() const override { return "avgpool"; }
    std::size_t factor() const override { return factor_; }
    std::size_t latent_channels(std::size_t c) const override { return c; }

    VideoLatent encode(const PixelVideo& frames) const override {
        const Shape4 ls = latent_shape_for(frames.shape());
        VideoLatent out(ls);
        const double inv = 1.0 / static_cast<double>(factor_ * factor_);
        for (std::size_t n = 0; n < ls.frames; ++n)
            for (std::size_t c = 0; c < ls.channels; ++c)
                for (std::size_t y = 0; y < ls.height; ++y)
                    for (std::size_t x = 0; x < ls.width; ++x) {
                        double acc = 0.0;
                        for (std::size_t dy = 0; dy < factor_; ++dy)
                            for (std::size_t dx = 0; dx < factor_; ++dx)
                                acc += frames.at(n, c, y * factor_ + dy, x * factor_ + dx);
                        out.at(n, c, y, x) = static_cast<float>(acc * inv);
                    }
        return out;
    }

    PixelVideo decode(const VideoLatent& latent) const override {
        const Shape4& ls = latent.shape();
        PixelVideo out(Shape4{ls.frames, ls.channels, ls.height * factor_, ls.width * factor_});
        for (std::size_t n = 0; n < ls.frames; ++n)
            for (std::size_t c = 0; c < ls.channels; ++c)
                for (std::size_t y = 0; y < out.shape().height; ++y)
                    for (std::size_t x = 0; x < out.shape().width; ++x)
                        out.at(n, c, y, x) = latent.at(n, c, y / factor_, x / factor_);
        return out;
    }

    VideoLatent decode_vjp(const VideoLatent& latent, const PixelVideo& grad) const override {
        const Shape4& ls = latent.shape();
        if (!(grad.shape() ==
              Shape4{ls.frames, ls.channels, ls.height * factor_, ls.width * factor_})) {
            throw ShapeError("avgpool decode_vjp: gradient shape " + to_string(grad.shape()));
        }
        VideoLatent out(ls);
        for (std::size_t n = 0; n < ls.frames; ++n)
            for (std::size_t c = 0; c < ls.channels; ++c)
                for (std::size_t y = 0; y < grad.shape().height; ++y)
                    for (std::size_t x = 0; x < grad.shape().width; ++x)
                        out.at(n, c, y / factor_, x / factor_) += grad.at(n, c, y, x);
        return out;
    }

private:
    std::size_t factor_;
};

/// Out-of-tree model adapters register a factory under a name; run configs select
/// them with backend.kind = adapter, backend.adapter_name = <name>.
struct AdapterRequest {
    std::string adapter_name;
    std::map<std::string, std::string> parameters;
    FrameShape latent_shape;
    DiffusionSchedule schedule;
};

using AdapterFactory = std::function<std::unique_ptr<ScoreBackend>(const AdapterRequest&)>;

class AdapterRegistry {
public:
    static AdapterRegistry& instance() {
        static AdapterRegistry registry;
        return registry;
    }

    void add(std::string name, AdapterFactory factory) {
        std::lock_guard lock(mutex_);
        factories_[std::move(name)] = std::move(factory);
    }

    std::unique_ptr<ScoreBackend> create(const AdapterRequest& req) const {
        AdapterFactory factory;
        {
            std::lock_guard lock(mutex_);
            const auto it = factories_.find(req.adapter_name);
            if (it == factories_.end()) {
                throw BackendError("no score backend adapter registered as '" + req.adapter_name +
                                   "'");
            }
            factory = it->second;
        }
        auto backend = factory(req);
        if (!backend) throw BackendError("adapter '" + req.adapter_name + "' returned no backend");
        return backend;
    }

    std::vector<std::string> names() const {
        std::lock_guard lock(mutex_);
        std::vector<std::string> out;
        for (const auto& [name, _] : factories_) out.push_back(name);
        return out;
    }

private:
    mutable std::mutex mutex_;
    std::map<std::string, AdapterFactory> factories_;
};

}  // namespace vdds
