// Copyright (C) 2026 The vdds Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cmath>
#include <filesystem>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "vdds/backend.hpp"
#include "vdds/edit_config.hpp"
#include "vdds/embedder.hpp"
#include "vdds/errors.hpp"
#include "vdds/flow.hpp"
#include "vdds/keyvalue.hpp"

namespace vdds {

inline constexpr int config_schema_version = 1;

struct BackendSpec {
    std::string kind = "gaussian";  // gaussian | adapter
    double sigma = 0.1;
    double source_mean = 0.0;
    double target_mean = 1.0;
    double null_mean = 0.0;
    std::string adapter_name;
    std::map<std::string, std::string> parameters;
};

/// Everything a batch run needs besides the manifest.
struct RunConfig {
    EditConfig edit;
    int schedule_steps = 1000;
    double beta_start = 1e-4;
    double beta_end = 0.02;

    BackendSpec backend;
    std::string codec = "identity";  // identity | avgpool
    std::size_t codec_factor = 1;
    std::string embedder = "pooled";  // pooled | flatten
    std::size_t embedder_grid = 4;
    std::string estimator = "rigid_shift";
    int estimator_radius = 8;

    std::size_t frame_limit = 32;
    int histogram_bins = 32;
    std::size_t sheet_cols = 8;
    std::vector<Timestep> diag_timesteps = {100, 800};
};

/// Applies `key=value` overrides on top of a parsed file; overrides may add keys.
inline void apply_overrides(KeyValues& kv, const std::vector<std::string>& overrides) {
    for (const auto& o : overrides) {
        auto [key, value] = split_assignment(o, "override '" + o + "'");
        kv[key] = value;
    }
}

/// Interprets config text. Unknown keys and a missing or wrong schema_version are errors.
inline RunConfig parse_run_config(const KeyValues& kv, const std::string& source) {
    KeyReader r(kv, source);
    const long long version = r.integer("schema_version", -1);
    if (version != config_schema_version) {
        throw ConfigError(source + ": schema_version must be " + std::to_string(config_schema_version));
    }
    auto non_negative = [&](const std::string& key, long long v) {
        if (v < 0) throw ConfigError(source + ": '" + key + "' must be >= 0");
        return v;
    };

    RunConfig c;
    c.schedule_steps = static_cast<int>(r.integer("schedule.T", c.schedule_steps));
    c.beta_start = r.real("schedule.beta_start", c.beta_start);
    c.beta_end = r.real("schedule.beta_end", c.beta_end);
    if (r.str("schedule.kind", "linear") != "linear") throw ConfigError(source + ": only linear schedules");

    EditConfig& e = c.edit;
    e.steps = static_cast<int>(r.integer("steps", e.steps));
    e.lr = r.real("lr", e.lr);
    e.guidance = r.real("guidance", e.guidance);
    e.w1 = r.real("w1", e.w1);
    e.w2 = r.real("w2", e.w2);
    const std::string reduction = r.str("preserve_reduction", "mean");
    if (reduction == "mean") {
        e.preserve_reduction = Reduction::mean;
    } else if (reduction == "sum") {
        e.preserve_reduction = Reduction::sum;
    } else {
        throw ConfigError(source + ": preserve_reduction must be mean or sum");
    }
    e.alpha = r.real("alpha", e.alpha);
    e.hops = static_cast<std::size_t>(non_negative("hops", r.integer("hops", static_cast<long long>(e.hops))));
    e.omegas = r.reals("omegas", default_hop_weights(e.hops));
    e.tau_abs = r.real("tau_abs", e.tau_abs);
    e.tau_rel = r.real("tau_rel", e.tau_rel);
    e.t_min = static_cast<Timestep>(
        r.integer("t_min", static_cast<long long>(std::ceil(0.05 * c.schedule_steps))));
    e.t_max = static_cast<Timestep>(
        r.integer("t_max", static_cast<long long>(std::floor(0.95 * c.schedule_steps))));
    e.anchors.clear();
    for (long long a : r.integers("anchors", {0})) {
        e.anchors.push_back(static_cast<std::size_t>(non_negative("anchors", a)));
    }
    e.seed = static_cast<std::uint64_t>(non_negative("seed", r.integer("seed", 0)));
    e.semantic_stride = static_cast<int>(r.integer("semantic_stride", e.semantic_stride));

    BackendSpec& b = c.backend;
    b.kind = r.str("backend.kind", b.kind);
    b.sigma = r.real("backend.sigma", b.sigma);
    b.source_mean = r.real("backend.source_mean", b.source_mean);
    b.target_mean = r.real("backend.target_mean", b.target_mean);
    b.null_mean = r.real("backend.null_mean", b.null_mean);
    b.adapter_name = r.str("backend.adapter_name", "");
    b.parameters = r.prefixed("backend.param.");
    if (b.kind != "gaussian" && b.kind != "adapter") {
        throw ConfigError(source + ": backend.kind must be gaussian or adapter");
    }
    if (b.kind == "adapter" && b.adapter_name.empty()) {
        throw ConfigError(source + ": backend.kind = adapter needs backend.adapter_name");
    }

    c.codec = r.str("codec.kind", c.codec);
    c.codec_factor = static_cast<std::size_t>(
        non_negative("codec.factor", r.integer("codec.factor", c.codec == "identity" ? 1 : 8)));
    if (c.codec != "identity" && c.codec != "avgpool") {
        throw ConfigError(source + ": codec.kind must be identity or avgpool");
    }
    c.embedder = r.str("embedder.kind", c.embedder);
    c.embedder_grid = static_cast<std::size_t>(
        non_negative("embedder.grid", r.integer("embedder.grid", static_cast<long long>(c.embedder_grid))));
    if (c.embedder != "pooled" && c.embedder != "flatten") {
        throw ConfigError(source + ": embedder.kind must be pooled or flatten");
    }
    c.estimator = r.str("estimator.kind", c.estimator);
    c.estimator_radius = static_cast<int>(r.integer("estimator.radius", c.estimator_radius));
    if (c.estimator != "rigid_shift") throw ConfigError(source + ": estimator.kind must be rigid_shift");

    c.frame_limit = static_cast<std::size_t>(
        non_negative("frames.limit", r.integer("frames.limit", static_cast<long long>(c.frame_limit))));
    c.histogram_bins = static_cast<int>(r.integer("metrics.bins", c.histogram_bins));
    c.sheet_cols = static_cast<std::size_t>(
        non_negative("sheet.cols", r.integer("sheet.cols", static_cast<long long>(c.sheet_cols))));
    c.diag_timesteps.clear();
    for (long long t : r.integers("diag.timesteps", {100, 800})) c.diag_timesteps.push_back(static_cast<Timestep>(t));
    r.finish();

    make_schedule(c.schedule_steps, c.beta_start, c.beta_end);
    e.validate(c.schedule_steps);
    if (c.frame_limit == 0) throw ConfigError(source + ": frames.limit must be >= 1");
    if (c.histogram_bins < 2) throw ConfigError(source + ": metrics.bins must be >= 2");
    if (c.sheet_cols < 1) throw ConfigError(source + ": sheet.cols must be >= 1");
    for (Timestep t : c.diag_timesteps) {
        if (t < 1 || t > c.schedule_steps) throw ConfigError(source + ": diag.timesteps outside [1, T]");
    }
    return c;
}

inline RunConfig load_run_config(const std::filesystem::path& path, const std::vector<std::string>& overrides = {}) {
    KeyValues kv = read_key_values(path);
    apply_overrides(kv, overrides);
    return parse_run_config(kv, path.string());
}

inline std::unique_ptr<LatentCodec> make_codec(const RunConfig& c) {
    if (c.codec == "identity") return std::make_unique<IdentityCodec>();
    return std::make_unique<AvgPoolCodec>(c.codec_factor);
}

inline std::unique_ptr<SemanticEmbedder> make_embedder(const RunConfig& c) {
    if (c.embedder == "flatten") return std::make_unique<FlattenEmbedder>();
    return std::make_unique<PooledEmbedder>(c.embedder_grid);
}

inline std::unique_ptr<FlowEstimator> make_estimator(const RunConfig& c) {
    return std::make_unique<RigidShiftEstimator>(c.estimator_radius);
}

/// Builds the configured score backend for latents of `latent` shape and registers
/// the run's prompts (the Gaussian backend maps each to a constant mean latent).
inline std::unique_ptr<ScoreBackend> make_backend(const RunConfig& c, FrameShape latent,
                                                  const std::string& source_prompt,
                                                  const std::string& target_prompt) {
    DiffusionSchedule sched = make_schedule(c.schedule_steps, c.beta_start, c.beta_end);
    if (c.backend.kind == "adapter") {
        return AdapterRegistry::instance().create(
            AdapterRequest{c.backend.adapter_name, c.backend.parameters, latent, std::move(sched)});
    }
    auto g = std::make_unique<GaussianAnalyticBackend>(std::move(sched), latent, c.backend.sigma);
    g->add_prompt(source_prompt, static_cast<float>(c.backend.source_mean));
    if (target_prompt != source_prompt) g->add_prompt(target_prompt, static_cast<float>(c.backend.target_mean));
    g->set_null_mean(static_cast<float>(c.backend.null_mean));
    return g;
}

}  // namespace vdds
