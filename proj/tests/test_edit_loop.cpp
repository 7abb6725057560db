// Copyright (C) 2026 The vdds Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "support.hpp"
#include "vdds/edit_loop.hpp"

namespace vdds {
namespace {

TEST(Sgd, Arithmetic) {
    const Shape4 s{1, 1, 1, 3};
    const VideoLatent z(s, 0.0f);
    const VideoLatent one(s, 1.0f);
    EXPECT_EQ(sgd_step(z, {VideoLatent(s), 1, 0}, 0.1), z);
    const VideoLatent a = sgd_step(z, {one, 1, 0}, 0.1);
    for (float v : a.data()) EXPECT_FLOAT_EQ(v, -0.1f);
    const VideoLatent b = sgd_step(a, {one, 1, 0}, 0.1);
    for (float v : b.data()) EXPECT_FLOAT_EQ(v, -0.2f);
}

TEST(Sgd, NonFiniteGradientIsNumericError) {
    const Shape4 s{1, 1, 1, 2};
    VideoLatent g(s);
    g[1] = std::nanf("");
    EXPECT_THROW(sgd_step(VideoLatent(s), {g, 1, 0}, 0.1), NumericError);
    g[1] = 3e38f;
    EXPECT_THROW(sgd_step(VideoLatent(s, -3e38f), {g, 1, 0}, 10.0), NumericError);
}

TEST(NoiseSource, TimestepThenElementwiseNormals) {
    NoiseSource src(42);
    const Timestep t = src.timestep(50, 950);
    const VideoLatent eps = src.noise(Shape4{1, 1, 2, 2});

    std::mt19937_64 rng(42);
    EXPECT_EQ(t, std::uniform_int_distribution<Timestep>(50, 950)(rng));
    std::normal_distribution<double> normal;
    for (float v : eps.data()) EXPECT_EQ(v, static_cast<float>(normal(rng)));
}

struct Fixture {
    FrameShape latent{1, 8, 8};
    Shape4 shape{4, 1, 8, 8};
    GaussianAnalyticBackend backend = test::gaussian_backend(latent, 0.1, -1.0f, 1.0f);
    IdentityCodec codec;
    PooledEmbedder embedder{4};
    PixelVideo video{shape, -1.0f};
    FlowSet flows = test::translating_flows(4, 2, 8, 8, 0.0f, 0.0f);
};

TEST(EditVideo, ZeroStepsIsIdentity) {
    Fixture f;
    std::mt19937_64 rng(1);
    const PixelVideo video = test::random_pixels(f.shape, rng);
    EditConfig cfg;
    cfg.steps = 0;
    const EditResult r = edit_video(video, "source", "target", f.backend, f.codec, f.flows, &f.embedder, cfg);
    EXPECT_EQ(r.edited, video);
    EXPECT_TRUE(r.report.steps.empty());
}

TEST(EditVideo, SamePromptWithoutAuxTermsLeavesInputUnchanged) {
    Fixture f;
    std::mt19937_64 rng(2);
    const PixelVideo video = test::random_pixels(f.shape, rng);
    EditConfig cfg;
    cfg.steps = 25;
    cfg.w1 = 0.0;
    cfg.w2 = 0.0;
    const EditResult r = edit_video(video, "source", "source", f.backend, f.codec, f.flows, &f.embedder, cfg);
    EXPECT_EQ(r.edited, video);
    for (const auto& rec : r.report.steps) EXPECT_EQ(rec.grad_norm_dds, 0.0);
}

/// Scalar model of the edit recurrence for a uniform latent on the analytic backend.
/// With w = 1 the noise cancels between branches, so every element follows
///   s <- s - lr * (k(t) * (s - ref + mu - mu_star) + w1 * 2 (s - ref) / M)
/// with k(t) = sqrt(abar) sqrt(1 - abar) / (abar sigma^2 + 1 - abar). The timestep
/// stream replays the run's engine: one draw for t, then one normal per element.
std::vector<double> scalar_oracle(const DiffusionSchedule& sched, double sigma, double mu, double mu_star,
                                  double ref, const EditConfig& cfg, std::size_t elements) {
    std::mt19937_64 rng(cfg.seed);
    std::normal_distribution<double> normal;
    double s = ref;
    std::vector<double> trace;
    for (int step = 0; step < cfg.steps; ++step) {
        const Timestep t = std::uniform_int_distribution<Timestep>(cfg.t_min, cfg.t_max)(rng);
        for (std::size_t k = 0; k < elements; ++k) normal(rng);
        const double abar = sched.alpha_bar(t);
        const double k = std::sqrt(abar) * std::sqrt(1 - abar) / (abar * sigma * sigma + 1 - abar);
        const double g = k * (s - ref + mu - mu_star) + cfg.w1 * 2.0 * (s - ref) / static_cast<double>(elements);
        s -= cfg.lr * g;
        trace.push_back(s);
    }
    return trace;
}

TEST(EditVideo, AnalyticRunFollowsScalarOracle) {
    Fixture f;
    EditConfig cfg;
    cfg.guidance = 1.0;
    cfg.seed = 11;
    cfg.steps = 120;
    std::vector<double> means;
    const EditResult r = edit_video(f.video, "source", "target", f.backend, f.codec, f.flows, &f.embedder, cfg,
                                    [&](const StepRecord&, const VideoLatent& z) { means.push_back(mean(z)); });
    const auto oracle = scalar_oracle(f.backend.schedule(), 0.1, -1.0, 1.0, -1.0, cfg, f.shape.size());
    ASSERT_EQ(means.size(), oracle.size());
    for (std::size_t i = 0; i < means.size(); ++i) EXPECT_NEAR(means[i], oracle[i], 1e-6) << "step " << i;
    EXPECT_EQ(r.report.steps.size(), 120u);
}

TEST(EditVideo, ReproducibleForFixedSeed) {
    Fixture f;
    std::mt19937_64 rng(3);
    const PixelVideo video = test::random_pixels(f.shape, rng, -1.0, 1.0);
    EditConfig cfg;
    cfg.steps = 30;
    cfg.seed = 5;
    const EditResult a = edit_video(video, "source", "target", f.backend, f.codec, f.flows, &f.embedder, cfg);
    const EditResult b = edit_video(video, "source", "target", f.backend, f.codec, f.flows, &f.embedder, cfg);
    EXPECT_EQ(a.edited, b.edited);
    ASSERT_EQ(a.report.steps.size(), b.report.steps.size());
    for (std::size_t i = 0; i < a.report.steps.size(); ++i) {
        EXPECT_EQ(a.report.steps[i].t, b.report.steps[i].t);
        EXPECT_EQ(a.report.steps[i].losses.total, b.report.steps[i].losses.total);
        EXPECT_EQ(a.report.steps[i].grad_norm_total, b.report.steps[i].grad_norm_total);
    }
    cfg.seed = 6;
    const EditResult c = edit_video(video, "source", "target", f.backend, f.codec, f.flows, &f.embedder, cfg);
    EXPECT_NE(a.edited, c.edited);
}

TEST(EditVideo, MonotonePullTowardTarget) {
    Fixture f;
    const auto backend = test::gaussian_backend(f.latent, 0.0, -1.0f, 1.0f);
    EditConfig cfg;
    cfg.guidance = 1.0;
    cfg.w1 = 0.0;
    cfg.w2 = 0.0;
    cfg.alpha = 0.0;
    cfg.steps = 60;
    cfg.t_min = cfg.t_max = 400;
    double prev = std::abs(mean(f.video) - 1.0);
    edit_video(f.video, "source", "target", backend, f.codec, f.flows, nullptr, cfg,
               [&](const StepRecord&, const VideoLatent& z) {
                   const double d = std::abs(mean(z) - 1.0);
                   EXPECT_LT(d, prev);
                   prev = d;
               });
}

TEST(EditVideo, StepRecordsCarryNorms) {
    Fixture f;
    EditConfig cfg;
    cfg.steps = 5;
    const EditResult r = edit_video(f.video, "source", "target", f.backend, f.codec, f.flows, &f.embedder, cfg);
    ASSERT_EQ(r.report.steps.size(), 5u);
    for (std::size_t i = 0; i < 5; ++i) {
        const StepRecord& rec = r.report.steps[i];
        EXPECT_EQ(rec.step, static_cast<int>(i));
        EXPECT_GE(rec.t, cfg.t_min);
        EXPECT_LE(rec.t, cfg.t_max);
        EXPECT_GT(rec.grad_norm_dds, 0.0);
        EXPECT_NEAR(rec.losses.dds, rec.grad_norm_refined * rec.grad_norm_refined, 1e-9 * rec.losses.dds);
        EXPECT_NEAR(rec.losses.total, rec.losses.dds + cfg.w1 * rec.losses.preserve + cfg.w2 * rec.losses.semantic,
                    1e-12 * rec.losses.total);
    }
    EXPECT_EQ(r.report.backend, "gaussian");
    EXPECT_EQ(r.report.codec, "identity");
    EXPECT_EQ(r.report.embedder, "pooled");
}

TEST(EditVideo, SemanticStrideSkipsIterations) {
    Fixture f;
    EditConfig cfg;
    cfg.steps = 6;
    cfg.semantic_stride = 3;
    const EditResult r = edit_video(f.video, "source", "target", f.backend, f.codec, f.flows, &f.embedder, cfg);
    for (const auto& rec : r.report.steps) EXPECT_EQ(rec.losses.semantic_evaluated, rec.step % 3 == 0);
}

TEST(EditVideo, DivergingUpdateAbortsWithStepAndPartialReport) {
    Fixture f;
    EditConfig cfg;
    cfg.w1 = 1e4;
    cfg.guidance = 1.0;
    try {
        edit_video(f.video, "source", "target", f.backend, f.codec, f.flows, &f.embedder, cfg);
        FAIL() << "expected EditAborted";
    } catch (const EditAborted& e) {
        EXPECT_EQ(e.kind(), ErrorKind::numeric);
        EXPECT_EQ(static_cast<std::size_t>(e.step()), e.partial_report().steps.size());
        EXPECT_GT(e.step(), 0);
    }
}

TEST(EditVideo, ValidationErrors) {
    Fixture f;
    EditConfig cfg;
    cfg.t_max = 2000;
    EXPECT_THROW(edit_video(f.video, "source", "target", f.backend, f.codec, f.flows, &f.embedder, cfg), ConfigError);
    cfg = EditConfig{};
    cfg.anchors = {9};
    EXPECT_THROW(edit_video(f.video, "source", "target", f.backend, f.codec, f.flows, &f.embedder, cfg), ConfigError);
    cfg = EditConfig{};
    EXPECT_THROW(edit_video(f.video, "source", "a dog", f.backend, f.codec, f.flows, &f.embedder, cfg), ConfigError);
    EXPECT_THROW(edit_video(f.video, "source", "target", f.backend, f.codec, FlowSet(3, 1), &f.embedder, cfg),
                 ShapeError);
    EXPECT_THROW(edit_video(f.video, "source", "target", f.backend, f.codec, f.flows, nullptr, cfg), ConfigError);
}

}  // namespace
}  // namespace vdds
