// Copyright (C) 2026 The vdds Authors
// SPDX-License-Identifier: Apache-2.0

#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "vdds/diagnostics.hpp"
#include "vdds/image_io.hpp"
#include "vdds/metrics.hpp"
#include "vdds/report_json.hpp"
#include "vdds/run_case.hpp"
#include "vdds/run_config.hpp"

namespace fs = std::filesystem;

namespace {

template <class Fn>
int guarded(Fn&& fn) {
    try {
        return fn();
    } catch (const vdds::Error& e) {
        std::cerr << vdds::error_record(e.kind(), e.what()).dump() << "\n";
        return vdds::exit_code(e.kind());
    } catch (const std::exception& e) {
        std::cerr << vdds::error_record(vdds::ErrorKind::input, e.what()).dump() << "\n";
        return 2;
    }
}

int run_edit(const std::string& manifest, const std::vector<std::string>& overrides, bool dry_run) {
    return guarded([&] {
        const vdds::RunManifest m = vdds::load_manifest(manifest);
        return vdds::run_case(m, {overrides, dry_run}, std::cerr);
    });
}

int run_flows(const std::string& frames, std::size_t hops, const std::string& config,
              const std::vector<std::string>& overrides, std::string cache_dir) {
    return guarded([&] {
        vdds::KeyValues kv = config.empty() ? vdds::KeyValues{{"schema_version", "1"}} : vdds::read_key_values(config);
        kv["hops"] = std::to_string(hops);
        if (!kv.contains("omegas")) {
            std::string w;
            for (double o : vdds::default_hop_weights(hops)) w += (w.empty() ? "" : ",") + vdds::format_double(o);
            kv["omegas"] = w;
        }
        vdds::apply_overrides(kv, overrides);
        const vdds::RunConfig cfg = vdds::parse_run_config(kv, config.empty() ? "defaults" : config);
        const vdds::FrameSequence seq = vdds::load_frames(frames, cfg.frame_limit);
        const vdds::Shape4 latent = vdds::make_codec(cfg)->latent_shape_for(seq.video.shape());
        if (cache_dir.empty()) {
            const char* root = std::getenv(vdds::cache_root_env);
            cache_dir = root && *root ? root : "flow_cache";
        }
        const auto out = vdds::obtain_flows(seq.video, cfg, latent, cache_dir, std::cerr);
        std::size_t valid = 0, cells = 0;
        for (const auto& [_, e] : out.flows.entries()) {
            valid += e.mask.count();
            cells += e.mask.cells.size();
        }
        std::cout << vdds::Json{{"pairs", out.flows.size()},
                                {"cache_hit", out.cache_hit},
                                {"valid_fraction", cells ? static_cast<double>(valid) / cells : 0.0},
                                {"cache_dir", cache_dir}}
                         .dump()
                  << "\n";
        return 0;
    });
}

int run_metrics(const std::string& src, const std::string& edited, const std::string& prompt, int bins,
                std::size_t limit, std::size_t grid) {
    return guarded([&] {
        const auto a = vdds::load_frames(src, limit);
        const auto b = vdds::load_frames(edited, limit);
        const vdds::PooledEmbedder embedder(grid);
        std::vector<double> text;
        if (!prompt.empty()) {
            text = vdds::HashedTextEncoder(embedder.dim(vdds::frame_shape(b.video.shape()))).embed_text(prompt);
        }
        const auto report = vdds::compute_metrics(a.video, b.video, text, embedder, bins);
        std::cout << vdds::to_json(report).dump(2) << "\n";
        return 0;
    });
}

int run_sheet(const std::string& frames, std::size_t cols, const std::string& out, std::size_t limit) {
    return guarded([&] {
        if (cols < 1) throw vdds::ConfigError("--cols must be >= 1");
        const auto seq = vdds::load_frames(frames, limit);
        const auto sheet = vdds::contact_sheet(seq.video, cols);
        vdds::write_image(out, vdds::to_raster(sheet, 0));
        std::cout << out << " " << sheet.shape().width << "x" << sheet.shape().height << "\n";
        return 0;
    });
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Text-guided video editing by flow-refined delta denoising score optimization"};
    app.require_subcommand(1);

    std::string manifest;
    std::vector<std::string> overrides;
    bool dry_run = false;
    auto* edit = app.add_subcommand("edit", "Run one edit case from a manifest");
    edit->add_option("--manifest", manifest, "Manifest file (key = value)")->required();
    edit->add_option("--override", overrides, "Config override key=value (repeatable)");
    edit->add_flag("--dry-run", dry_run, "Validate inputs and print the plan without computing");

    std::string flow_frames, flow_config, cache_dir;
    std::size_t hops = 2;
    std::vector<std::string> flow_overrides;
    auto* flows = app.add_subcommand("flows", "Precompute the latent flow cache for a frame directory");
    flows->add_option("--frames", flow_frames, "Frame directory")->required();
    flows->add_option("--hops", hops, "Maximum hop count")->required()->check(CLI::PositiveNumber);
    flows->add_option("--config", flow_config, "Run config (codec, thresholds, estimator)");
    flows->add_option("--override", flow_overrides, "Config override key=value (repeatable)");
    flows->add_option("--cache-dir", cache_dir, "Cache directory (default $VDDS_CACHE_DIR or ./flow_cache)");

    std::string src, edited, prompt;
    int bins = 32;
    std::size_t limit = 32, grid = 4;
    auto* metrics = app.add_subcommand("metrics", "Automatic metrics for an edited frame directory");
    metrics->add_option("--src", src, "Source frame directory")->required();
    metrics->add_option("--edited", edited, "Edited frame directory")->required();
    metrics->add_option("--prompt", prompt, "Target prompt for text alignment");
    metrics->add_option("--bins", bins, "Histogram bins per channel");
    metrics->add_option("--limit", limit, "Maximum frames to read");
    metrics->add_option("--grid", grid, "Pooled embedder grid");

    std::string sheet_frames, sheet_out = "sheet.png";
    std::size_t cols = 8, sheet_limit = 32;
    auto* sheet = app.add_subcommand("sheet", "Write a contact sheet of a frame directory");
    sheet->add_option("--frames", sheet_frames, "Frame directory")->required();
    sheet->add_option("--cols", cols, "Columns")->required();
    sheet->add_option("--out", sheet_out, "Output image");
    sheet->add_option("--limit", sheet_limit, "Maximum frames to read");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    if (*edit) return run_edit(manifest, overrides, dry_run);
    if (*flows) return run_flows(flow_frames, hops, flow_config, flow_overrides, cache_dir);
    if (*metrics) return run_metrics(src, edited, prompt, bins, limit, grid);
    return run_sheet(sheet_frames, cols, sheet_out, sheet_limit);
}
