// Copyright (C) 2026 The vdds Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <cstdlib>
#include <random>
#include <sstream>

#include "support.hpp"
#include "vdds/diagnostics.hpp"
#include "vdds/flow_cache.hpp"
#include "vdds/image_io.hpp"
#include "vdds/run_case.hpp"
#include "vdds/run_config.hpp"

namespace vdds {
namespace {

using test::TempDir;

TEST(Frames, SaveLoadRoundTripWithinQuantizationBound) {
    TempDir dir("roundtrip");
    std::mt19937_64 rng(1);
    for (std::size_t channels : {1u, 3u}) {
        for (const std::string ext : {".png", ".ppm"}) {
            if (ext == ".ppm" && channels == 1) continue;
            const auto sub = dir / ("c" + std::to_string(channels) + ext.substr(1));
            const PixelVideo v = test::random_pixels(Shape4{2, channels, 9, 13}, rng);
            save_frames(v, sub, numbered_names(2, ext));
            const FrameSequence back = load_frames(sub);
            ASSERT_EQ(back.video.shape(), v.shape());
            EXPECT_LE(max_abs_diff(back.video, v), 1.0 / 510.0 + 1e-7);
            EXPECT_EQ(back.names, numbered_names(2, ext));
        }
    }
}

TEST(Frames, EightBitEndpoints) {
    TempDir dir("endpoints");
    PixelVideo v(Shape4{1, 1, 1, 2});
    v[0] = 0.0f;
    v[1] = 1.0f;
    save_frames(v, dir.path(), {"a.pgm"});
    const FrameSequence back = load_frames(dir.path());
    EXPECT_EQ(back.video[0], 0.0f);
    EXPECT_EQ(back.video[1], 1.0f);
}

TEST(Frames, TruncatesToLimitInNameOrder) {
    TempDir dir("limit");
    PixelVideo v(Shape4{40, 1, 2, 2});
    for (std::size_t n = 0; n < 40; ++n)
        for (float& x : v.frame(n)) x = static_cast<float>(n) / 255.0f;
    // names written in reverse so directory order cannot coincide with frame index
    std::vector<std::string> names;
    for (std::size_t n = 0; n < 40; ++n) names.push_back("f" + std::to_string(100 + n) + ".pgm");
    save_frames(v, dir.path(), names);
    const FrameSequence seq = load_frames(dir.path(), 32);
    ASSERT_EQ(seq.video.frames(), 32u);
    for (std::size_t n = 0; n < 32; ++n) {
        EXPECT_EQ(seq.names[n], names[n]);
        EXPECT_EQ(seq.video.at(n, 0, 0, 0), static_cast<float>(n) / 255.0f);
    }
}

TEST(Frames, MixedDimsListOffenders) {
    TempDir dir("mixed");
    save_frames(PixelVideo(Shape4{1, 1, 4, 4}), dir.path(), {"a.pgm"});
    save_frames(PixelVideo(Shape4{1, 1, 4, 5}), dir.path(), {"b.pgm"});
    save_frames(PixelVideo(Shape4{1, 3, 4, 4}), dir.path(), {"c.png"});
    try {
        load_frames(dir.path());
        FAIL() << "expected InputError";
    } catch (const InputError& e) {
        const std::string msg = e.what();
        EXPECT_NE(msg.find("b.pgm"), std::string::npos) << msg;
        EXPECT_NE(msg.find("c.png"), std::string::npos) << msg;
    }
}

TEST(Frames, EmptyOrMissingDirectoryIsInputError) {
    TempDir dir("empty");
    test::write_text(dir / "notes.txt", "not a frame");
    EXPECT_THROW(load_frames(dir.path()), InputError);
    EXPECT_THROW(load_frames(dir / "missing"), InputError);
}

TEST(ContactSheet, Layout) {
    const PixelVideo four(Shape4{4, 3, 5, 7}, 0.25f);
    const PixelVideo strip = contact_sheet(four, 4);
    EXPECT_EQ(strip.shape(), (Shape4{1, 3, 5 + 4, 4 * (7 + 2) + 2}));
    const PixelVideo five(Shape4{5, 1, 2, 2}, 0.0f);
    const PixelVideo grid = contact_sheet(five, 4);
    EXPECT_EQ(grid.shape(), (Shape4{1, 1, 2 * (2 + 2) + 2, 4 * (2 + 2) + 2}));
    // last cell of the second row stays at the border value
    EXPECT_EQ(grid.at(0, 0, 2 + 4, 2 + 3 * 4), 1.0f);
    EXPECT_EQ(grid.at(0, 0, 2 + 4, 2), 0.0f);
    EXPECT_THROW(contact_sheet(five, 0), ConfigError);
}

TEST(ContactSheet, TwoByTwoBorderAccounting) {
    PixelVideo v(Shape4{4, 1, 1, 1});
    for (std::size_t n = 0; n < 4; ++n) v[n] = 0.1f * static_cast<float>(n);
    const PixelVideo s = contact_sheet(v, 2, 1.0f);
    ASSERT_EQ(s.shape(), (Shape4{1, 1, 8, 8}));
    EXPECT_EQ(s.at(0, 0, 2, 2), 0.0f);
    EXPECT_EQ(s.at(0, 0, 2, 5), 0.1f);
    EXPECT_EQ(s.at(0, 0, 5, 2), 0.2f);
    EXPECT_EQ(s.at(0, 0, 5, 5), 0.3f);
    std::size_t border = 0;
    for (float x : s.data()) border += x == 1.0f;
    EXPECT_EQ(border, 64u - 4u);
}

TEST(KeyValues, ParsingRules) {
    std::istringstream in("# comment\n a = 1 \n\nb=two words\n");
    const KeyValues kv = parse_key_values(in, "t");
    EXPECT_EQ(kv.at("a"), "1");
    EXPECT_EQ(kv.at("b"), "two words");
    std::istringstream dup("a = 1\na = 2\n");
    EXPECT_THROW(parse_key_values(dup, "t"), ConfigError);
    std::istringstream bad("just text\n");
    EXPECT_THROW(parse_key_values(bad, "t"), ConfigError);
    EXPECT_EQ(parse_double("x", format_double(0.1)), 0.1);
    EXPECT_EQ(parse_double("x", format_double(1.0 / 3.0)), 1.0 / 3.0);
}

KeyValues base_config() { return {{"schema_version", "1"}}; }

TEST(RunConfigParse, DefaultsAndOverrides) {
    KeyValues kv = base_config();
    apply_overrides(kv, {"w1=2.5", "omegas = 1, 0.25", "anchors=0,3"});
    const RunConfig c = parse_run_config(kv, "t");
    EXPECT_EQ(c.edit.steps, 300);
    EXPECT_EQ(c.edit.lr, 0.1);
    EXPECT_EQ(c.edit.guidance, 7.5);
    EXPECT_EQ(c.edit.w1, 2.5);
    EXPECT_EQ(c.edit.omegas, (std::vector<double>{1.0, 0.25}));
    EXPECT_EQ(c.edit.anchors, (std::vector<std::size_t>{0, 3}));
    EXPECT_EQ(c.edit.t_min, 50);
    EXPECT_EQ(c.edit.t_max, 950);
    EXPECT_EQ(c.frame_limit, 32u);
    EXPECT_EQ(c.histogram_bins, 32);
}

TEST(RunConfigParse, TimestepRangeFollowsScheduleLength) {
    KeyValues kv = base_config();
    kv["schedule.T"] = "200";
    kv["diag.timesteps"] = "20,160";
    const RunConfig c = parse_run_config(kv, "t");
    EXPECT_EQ(c.edit.t_min, 10);
    EXPECT_EQ(c.edit.t_max, 190);
}

TEST(RunConfigParse, Rejections) {
    auto reject = [](KeyValues kv) { EXPECT_THROW(parse_run_config(kv, "t"), ConfigError); };
    reject({});
    reject({{"schema_version", "2"}});
    KeyValues typo = base_config();
    typo["w_1"] = "3";
    reject(typo);
    KeyValues alpha = base_config();
    alpha["alpha"] = "1.5";
    reject(alpha);
    KeyValues lr = base_config();
    lr["lr"] = "0";
    reject(lr);
    KeyValues steps = base_config();
    steps["steps"] = "ten";
    reject(steps);
    KeyValues omegas = base_config();
    omegas["hops"] = "3";
    omegas["omegas"] = "1,0.5";
    reject(omegas);
    KeyValues neg = base_config();
    neg["omegas"] = "1,-0.5";
    reject(neg);
    KeyValues adapter = base_config();
    adapter["backend.kind"] = "adapter";
    reject(adapter);
}

TEST(RunConfigParse, UnknownKeyIsNamed) {
    KeyValues kv = base_config();
    kv["guidence"] = "5";
    try {
        parse_run_config(kv, "cfg");
        FAIL();
    } catch (const ConfigError& e) {
        EXPECT_NE(std::string(e.what()).find("guidence"), std::string::npos);
    }
}

FlowCacheKey cache_key(const PixelVideo& video) {
    return FlowCacheKey{"rigid_shift", 0, 3.0, 0.05, video.frames(), 2, 32, 32, 8, 8, content_hash(video)};
}

TEST(FlowCache, HitReproducesFlowsExactly) {
    TempDir dir("cache");
    const PixelVideo video = test::translating_pattern(4, 32, 32, 4);
    const FlowSet flows = prepare_flows(estimate_flows(video, 2, RigidShiftEstimator(8)), 3.0, 0.05, 8, 8);
    write_flow_cache(dir.path(), flows, cache_key(video));
    const auto loaded = load_flow_cache(dir.path(), cache_key(video));
    ASSERT_TRUE(loaded.has_value());
    ASSERT_EQ(loaded->size(), flows.size());
    for (const auto& [key, e] : flows.entries()) {
        const FlowEntry* l = loaded->find(key.first, key.second);
        ASSERT_NE(l, nullptr);
        EXPECT_EQ(l->flow.vectors, e.flow.vectors);
        EXPECT_EQ(l->mask.cells, e.mask.cells);
    }
}

TEST(FlowCache, AnyHeaderMismatchIsAMiss) {
    TempDir dir("cache_miss");
    const PixelVideo video = test::translating_pattern(3, 32, 32, 4);
    const FlowSet flows = prepare_flows(estimate_flows(video, 2, RigidShiftEstimator(8)), 3.0, 0.05, 8, 8);
    FlowCacheKey key = cache_key(video);
    key.frames = 3;
    write_flow_cache(dir.path(), flows, key);
    ASSERT_TRUE(load_flow_cache(dir.path(), key).has_value());

    auto miss = [&](auto mutate) {
        FlowCacheKey k = key;
        mutate(k);
        EXPECT_FALSE(load_flow_cache(dir.path(), k).has_value());
    };
    miss([](FlowCacheKey& k) { k.estimator = "raft"; });
    miss([](FlowCacheKey& k) { k.iterations = 20; });
    miss([](FlowCacheKey& k) { k.tau_abs = 2.0; });
    miss([](FlowCacheKey& k) { k.tau_rel = 0.1; });
    miss([](FlowCacheKey& k) { k.latent_width = 4; });
    miss([](FlowCacheKey& k) { k.frames_hash = "0"; });
    miss([](FlowCacheKey& k) { k.hops = 1; });

    // a truncated payload is also a miss
    std::filesystem::resize_file(dir / "flow_0_1.f32", 10);
    EXPECT_FALSE(load_flow_cache(dir.path(), key).has_value());
}

TEST(FlowCache, ContentHashTracksPixels) {
    PixelVideo a(Shape4{2, 1, 2, 2}, 0.5f);
    PixelVideo b = a;
    EXPECT_EQ(content_hash(a), content_hash(b));
    b[3] = 0.50001f;
    EXPECT_NE(content_hash(a), content_hash(b));
}

TEST(Manifest, MissingFrameDirFailsBeforeAnySideEffect) {
    TempDir dir("manifest");
    test::write_text(dir / "edit.cfg", "schema_version = 1\n");
    test::write_text(dir / "case.manifest",
                     "case_id = c\nframes = nowhere\nsource_prompt = a\ntarget_prompt = b\nconfig = edit.cfg\n"
                     "output = out\n");
    std::ostringstream log;
    EXPECT_EQ(run_case(load_manifest(dir / "case.manifest"), {}, log), 2);
    EXPECT_FALSE(std::filesystem::exists(dir / "out"));
    EXPECT_NE(log.str().find("\"error\":\"input\""), std::string::npos) << log.str();
}

TEST(Manifest, RequiredKeysAndPrompts) {
    EXPECT_THROW(parse_manifest({{"case_id", "x"}}, ".", "m"), ConfigError);
    KeyValues kv{{"case_id", "x"},        {"frames", "f"}, {"source_prompt", "a"}, {"target_prompt", "b"},
                 {"config", "c"},         {"output", "o"}, {"extra", "1"}};
    EXPECT_THROW(parse_manifest(kv, ".", "m"), ConfigError);
}

TEST(Manifest, InvalidConfigIsExitTwoWithoutOutputs) {
    TempDir dir("badcfg");
    const auto manifest = test::write_case_fixture(dir.path(), "schema_version = 1\nalpha = 2\n");
    std::ostringstream log;
    EXPECT_EQ(run_case(load_manifest(manifest), {}, log), 2);
    EXPECT_FALSE(std::filesystem::exists(dir / "out"));
}

TEST(RunCase, ZeroStepsReproducesSourceFrames) {
    TempDir dir("zero_steps");
    const auto manifest = test::write_case_fixture(dir.path(), "schema_version = 1\nsteps = 0\n");
    std::ostringstream log;
    ASSERT_EQ(run_case(load_manifest(manifest), {}, log), 0) << log.str();
    for (const auto& name : numbered_names(6)) {
        EXPECT_EQ(test::read_bytes(dir / "out" / "frames" / name), test::read_bytes(dir / "frames" / name)) << name;
    }
}

TEST(RunCase, WritesAllArtifactsAndReusesFlowCache) {
    TempDir dir("artifacts");
    const auto manifest = test::write_case_fixture(dir.path(), test::fixture_config);
    std::ostringstream first;
    ASSERT_EQ(run_case(load_manifest(manifest), {}, first), 0) << first.str();
    const auto out = dir / "out";
    for (const char* f : {"edit_report.json", "metrics.json", "sheet.png", "z0_t0100.png", "z0_t0800.png",
                          "z0_diagnostic.json", "run_log.json"}) {
        EXPECT_TRUE(std::filesystem::exists(out / f)) << f;
    }
    EXPECT_EQ(load_frames(out / "frames").video.frames(), 6u);
    const Json report = Json::parse(test::read_bytes(out / "edit_report.json"));
    EXPECT_EQ(report["steps"].size(), 40u);
    EXPECT_EQ(report["seed"], 7);
    EXPECT_EQ(report["config"]["w1"], 1.0);
    EXPECT_FALSE(Json::parse(test::read_bytes(out / "run_log.json"))["flow_cache_hit"].get<bool>());

    std::ostringstream second;
    ASSERT_EQ(run_case(load_manifest(manifest), {}, second), 0) << second.str();
    EXPECT_NE(second.str().find("cache hit"), std::string::npos);
    EXPECT_TRUE(Json::parse(test::read_bytes(out / "run_log.json"))["flow_cache_hit"].get<bool>());
}

TEST(RunCase, CacheRootFromEnvironment) {
    TempDir dir("env_cache");
    const auto manifest = test::write_case_fixture(dir.path(), "schema_version = 1\nsteps = 2\n");
    const auto root = dir / "cache_root";
    ::setenv(cache_root_env, root.c_str(), 1);
    std::ostringstream log;
    const int code = run_case(load_manifest(manifest), {}, log);
    ::unsetenv(cache_root_env);
    ASSERT_EQ(code, 0) << log.str();
    EXPECT_TRUE(std::filesystem::exists(root / "fixture" / "flow_0_1.hdr"));
}

TEST(RunCase, NumericAbortWritesErrorRecordAndPartialReport) {
    TempDir dir("numeric");
    const auto manifest = test::write_case_fixture(dir.path(), "schema_version = 1\nw1 = 100000\nlr = 1\n");
    std::ostringstream log;
    EXPECT_EQ(run_case(load_manifest(manifest), {}, log), 4) << log.str();
    const Json err = Json::parse(test::read_bytes(dir / "out" / "error.json"));
    EXPECT_EQ(err["error"], "numeric");
    EXPECT_TRUE(err.contains("step"));
    EXPECT_TRUE(std::filesystem::exists(dir / "out" / "edit_report.partial.json"));
}

TEST(RunCase, UnknownAdapterIsExitThree) {
    TempDir dir("adapter");
    const auto manifest = test::write_case_fixture(
        dir.path(), "schema_version = 1\nbackend.kind = adapter\nbackend.adapter_name = zeroscope\n");
    std::ostringstream log;
    EXPECT_EQ(run_case(load_manifest(manifest), {}, log), 3) << log.str();
}

TEST(RunCase, DryRunTouchesNothing) {
    TempDir dir("dry");
    const auto manifest = test::write_case_fixture(dir.path(), test::fixture_config);
    std::ostringstream log;
    EXPECT_EQ(run_case(load_manifest(manifest), {{}, true}, log), 0);
    EXPECT_FALSE(std::filesystem::exists(dir / "out"));
}

#ifdef VDDS_CLI_PATH
int run_cli(const std::string& args) {
    const std::string cmd = std::string(VDDS_CLI_PATH) + " " + args + " >/dev/null 2>&1";
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

TEST(Cli, ExitCodes) {
    TempDir dir("cli");
    const auto manifest = test::write_case_fixture(dir.path(), "schema_version = 1\nsteps = 3\n");
    EXPECT_EQ(run_cli("edit --manifest " + manifest.string()), 0);
    EXPECT_EQ(run_cli("edit --manifest " + manifest.string() + " --override alpha=3"), 2);
    EXPECT_EQ(run_cli("edit --manifest " + (dir / "nope.manifest").string()), 2);
    EXPECT_EQ(run_cli("edit --manifest " + manifest.string() + " --override w1=1e6 --override lr=1 --override steps=300"), 4);
    EXPECT_EQ(run_cli("bogus"), 2);
    EXPECT_EQ(run_cli("sheet --frames " + (dir / "frames").string() + " --cols 0"), 2);
    EXPECT_EQ(run_cli("sheet --frames " + (dir / "frames").string() + " --cols 3 --out " +
                      (dir / "sheet.png").string()),
              0);
    EXPECT_TRUE(std::filesystem::exists(dir / "sheet.png"));
    EXPECT_EQ(run_cli("metrics --src " + (dir / "frames").string() + " --edited " + (dir / "out" / "frames").string() +
                      " --prompt 'a blue car'"),
              0);
    EXPECT_EQ(run_cli("flows --frames " + (dir / "frames").string() + " --hops 2 --cache-dir " +
                      (dir / "fc").string()),
              0);
    EXPECT_TRUE(std::filesystem::exists(dir / "fc" / "flow_0_2.hdr"));
}
#endif

}  // namespace
}  // namespace vdds
