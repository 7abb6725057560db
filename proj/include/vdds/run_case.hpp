// Copyright (C) 2026 The vdds Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "vdds/diagnostics.hpp"
#include "vdds/edit_loop.hpp"
#include "vdds/flow.hpp"
#include "vdds/flow_cache.hpp"
#include "vdds/image_io.hpp"
#include "vdds/keyvalue.hpp"
#include "vdds/metrics.hpp"
#include "vdds/report_json.hpp"
#include "vdds/run_config.hpp"

namespace vdds {

/// Environment variable naming the flow cache root.
inline constexpr const char* cache_root_env = "VDDS_CACHE_DIR";

/// One edit case. Relative paths are resolved against the manifest's directory.
struct RunManifest {
    std::string case_id;
    fs::path frames_dir;
    std::string source_prompt;
    std::string target_prompt;
    fs::path config_path;
    fs::path output_dir;
};

inline RunManifest parse_manifest(const KeyValues& kv, const fs::path& base, const std::string& source) {
    KeyReader r(kv, source);
    RunManifest m;
    m.case_id = r.required("case_id");
    m.frames_dir = base / r.required("frames");
    m.source_prompt = r.required("source_prompt");
    m.target_prompt = r.required("target_prompt");
    m.config_path = base / r.required("config");
    m.output_dir = base / r.required("output");
    r.finish();
    return m;
}

inline RunManifest load_manifest(const fs::path& path) {
    if (!fs::is_regular_file(path)) throw InputError("manifest not found: " + path.string());
    return parse_manifest(read_key_values(path), path.parent_path(), path.string());
}

/// Checks everything that can be checked without computing; returns the parsed config.
inline RunConfig validate_manifest(const RunManifest& m, const std::vector<std::string>& overrides) {
    if (m.case_id.empty() || m.case_id.find_first_of("/\\") != std::string::npos) {
        throw InputError("case_id must be a non-empty name without path separators");
    }
    if (trim(m.source_prompt).empty() || trim(m.target_prompt).empty()) {
        throw InputError("source and target prompts must be non-empty");
    }
    if (!fs::is_directory(m.frames_dir)) throw InputError("frame directory not found: " + m.frames_dir.string());
    if (!fs::is_regular_file(m.config_path)) throw InputError("config not found: " + m.config_path.string());
    if (m.output_dir.empty()) throw InputError("output directory must be set");
    if (fs::exists(m.output_dir) && !fs::is_directory(m.output_dir)) {
        throw InputError("output path exists and is not a directory: " + m.output_dir.string());
    }
    return load_run_config(m.config_path, overrides);
}

inline fs::path flow_cache_dir(const RunManifest& m) {
    if (const char* root = std::getenv(cache_root_env); root && *root) return fs::path(root) / m.case_id;
    return m.output_dir / "flow_cache";
}

inline FlowCacheKey make_cache_key(const RunConfig& c, const PixelVideo& frames, const FlowEstimator& est,
                                   std::size_t hops, const Shape4& latent) {
    return FlowCacheKey{est.name(),
                        est.iterations(),
                        c.edit.tau_abs,
                        c.edit.tau_rel,
                        frames.frames(),
                        hops,
                        frames.shape().height,
                        frames.shape().width,
                        latent.height,
                        latent.width,
                        content_hash(frames)};
}

struct FlowsOutcome {
    FlowSet flows;
    bool cache_hit = false;
};

/// Cached latent flows for `frames`, estimating and caching them on a miss.
/// Hops are clipped to N - 1; single-frame clips get an empty set.
inline FlowsOutcome obtain_flows(const PixelVideo& frames, const RunConfig& c, const Shape4& latent,
                                 const fs::path& cache_dir, std::ostream& log) {
    const std::size_t n = frames.frames();
    const std::size_t hops = n < 2 ? 0 : std::min(c.edit.hops, n - 1);
    if (hops == 0) {
        log << "flows: fewer than 2 frames or hops = 0, refinement has no neighbours\n";
        return {FlowSet(n, 0), false};
    }
    const auto est = make_estimator(c);
    const FlowCacheKey key = make_cache_key(c, frames, *est, hops, latent);
    if (auto cached = load_flow_cache(cache_dir, key)) {
        log << "flows: cache hit in " << cache_dir.string() << ", estimation skipped\n";
        return {std::move(*cached), true};
    }
    log << "flows: estimating " << 2 * (n * hops - hops * (hops + 1) / 2) << " fields with " << est->name()
        << "\n";
    const RawFlowSet raw = estimate_flows(frames, hops, *est);
    FlowSet flows = prepare_flows(raw, c.edit.tau_abs, c.edit.tau_rel, latent.height, latent.width);
    write_flow_cache(cache_dir, flows, key);
    log << "flows: cached in " << cache_dir.string() << "\n";
    return {std::move(flows), false};
}

inline void write_json(const fs::path& path, const Json& j) {
    std::ofstream out(path);
    if (!out) throw InputError("cannot write " + path.string());
    out << j.dump(2) << "\n";
}

inline Json error_record(ErrorKind kind, const std::string& message, std::optional<int> step = std::nullopt) {
    Json j{{"error", to_string(kind)}, {"exit_code", exit_code(kind)}, {"message", message}};
    if (step) j["step"] = *step;
    return j;
}

struct RunOptions {
    std::vector<std::string> overrides;
    bool dry_run = false;
};

/// Full pipeline for one manifest. Returns the process exit status: 0 on success,
/// 2 validation, 3 backend, 4 numeric guard. Validation failures leave no files behind.
inline int run_case(const RunManifest& m, const RunOptions& opts, std::ostream& log) {
    RunConfig cfg;
    FrameSequence seq;
    try {
        cfg = validate_manifest(m, opts.overrides);
        seq = load_frames(m.frames_dir, cfg.frame_limit);
        make_codec(cfg)->latent_shape_for(seq.video.shape());
        for (std::size_t a : cfg.edit.anchors) {
            if (cfg.edit.w2 > 0.0 && a >= seq.video.frames()) {
                throw ConfigError("anchor " + std::to_string(a) + " outside clip of " +
                                  std::to_string(seq.video.frames()) + " frames");
            }
        }
    } catch (const Error& e) {
        log << error_record(e.kind(), e.what()).dump() << "\n";
        return exit_code(e.kind());
    }

    if (opts.dry_run) {
        log << "dry run: case " << m.case_id << ", " << seq.video.frames() << " frames "
            << to_string(seq.video.shape()) << ", " << cfg.edit.steps << " steps, output "
            << m.output_dir.string() << "\n";
        return 0;
    }

    const auto started = std::chrono::steady_clock::now();
    fs::create_directories(m.output_dir);
    Json run_log{{"case_id", m.case_id}};
    try {
        const auto codec = make_codec(cfg);
        const Shape4 latent = codec->latent_shape_for(seq.video.shape());
        const auto backend = make_backend(cfg, frame_shape(latent), m.source_prompt, m.target_prompt);
        const auto embedder = make_embedder(cfg);

        const FlowsOutcome flows = obtain_flows(seq.video, cfg, latent, flow_cache_dir(m), log);
        run_log["flow_cache_hit"] = flows.cache_hit;

        EditResult result = edit_video(seq.video, m.source_prompt, m.target_prompt, *backend, *codec,
                                       flows.flows, embedder.get(), cfg.edit);
        run_log["edit_seconds"] = result.report.wall_clock_seconds;

        save_frames(result.edited, m.output_dir / "frames", seq.names);
        write_json(m.output_dir / "edit_report.json", to_json(result.report));

        const HashedTextEncoder text(embedder->dim(frame_shape(seq.video.shape())));
        const Embedding prompt = text.embed_text(m.target_prompt);
        const MetricsReport metrics =
            compute_metrics(seq.video, result.edited, prompt, *embedder, cfg.histogram_bins);
        write_json(m.output_dir / "metrics.json", to_json(metrics));

        const PixelVideo sheet = contact_sheet(result.edited, cfg.sheet_cols);
        write_image(m.output_dir / "sheet.png", to_raster(sheet, 0));

        Json diag = Json::array();
        for (const auto& p : one_step_z0(seq.video, m.source_prompt, cfg.diag_timesteps, *backend, *codec,
                                         cfg.edit.seed)) {
            char name[32];
            std::snprintf(name, sizeof name, "z0_t%04d.png", p.t);
            write_image(m.output_dir / name, to_raster(contact_sheet(p.decoded, cfg.sheet_cols), 0));
            diag.push_back(Json{{"t", p.t}, {"latent_mse", p.latent_mse}, {"sheet", name}});
        }
        write_json(m.output_dir / "z0_diagnostic.json", diag);

        run_log["total_seconds"] =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
        write_json(m.output_dir / "run_log.json", run_log);
        log << "done: " << m.output_dir.string() << "\n";
        return 0;
    } catch (const EditAborted& e) {
        write_json(m.output_dir / "edit_report.partial.json", to_json(e.partial_report()));
        const Json rec = error_record(e.kind(), e.what(), e.step());
        write_json(m.output_dir / "error.json", rec);
        log << rec.dump() << "\n";
        return exit_code(e.kind());
    } catch (const Error& e) {
        const Json rec = error_record(e.kind(), e.what());
        write_json(m.output_dir / "error.json", rec);
        log << rec.dump() << "\n";
        return exit_code(e.kind());
    } catch (const std::exception& e) {
        const Json rec = error_record(ErrorKind::input, e.what());
        write_json(m.output_dir / "error.json", rec);
        log << rec.dump() << "\n";
        return exit_code(ErrorKind::input);
    }
}

}  // namespace vdds
