// Copyright (C) 2026 The vdds Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <json.hpp>

#include "vdds/edit_config.hpp"
#include "vdds/edit_loop.hpp"
#include "vdds/metrics.hpp"

namespace vdds {

using Json = nlohmann::ordered_json;

inline Json to_json(const EditConfig& c) {
    return Json{
        {"steps", c.steps},
        {"lr", c.lr},
        {"guidance", c.guidance},
        {"w1", c.w1},
        {"w2", c.w2},
        {"preserve_reduction", to_string(c.preserve_reduction)},
        {"alpha", c.alpha},
        {"hops", c.hops},
        {"omegas", c.omegas},
        {"tau_abs", c.tau_abs},
        {"tau_rel", c.tau_rel},
        {"t_min", c.t_min},
        {"t_max", c.t_max},
        {"anchors", c.anchors},
        {"seed", c.seed},
        {"semantic_stride", c.semantic_stride},
    };
}

inline Json to_json(const LossBreakdown& l) {
    return Json{{"dds", l.dds},           {"preserve", l.preserve}, {"semantic", l.semantic},
                {"total", l.total},       {"w1", l.w1},             {"w2", l.w2},
                {"semantic_evaluated", l.semantic_evaluated}};
}

/// Wall-clock time is deliberately left out so identical runs serialize identically.
inline Json to_json(const EditReport& r) {
    Json steps = Json::array();
    for (const auto& s : r.steps) {
        steps.push_back(Json{{"step", s.step},
                             {"t", s.t},
                             {"losses", to_json(s.losses)},
                             {"grad_norm_dds", s.grad_norm_dds},
                             {"grad_norm_refined", s.grad_norm_refined},
                             {"grad_norm_total", s.grad_norm_total}});
    }
    return Json{{"config", to_json(r.config)}, {"seed", r.config.seed},    {"backend", r.backend},
                {"codec", r.codec},            {"embedder", r.embedder},   {"eps_mode", r.eps_mode},
                {"steps_executed", r.steps.size()}, {"steps", std::move(steps)}};
}

inline Json to_json(const MetricsReport& m) {
    Json j{{"pres", m.pres},
           {"clip_img", m.clip_img ? Json(*m.clip_img) : Json(nullptr)},
           {"clip_text", m.clip_text ? Json(*m.clip_text) : Json(nullptr)},
           {"histogram_bins", m.histogram_bins},
           {"histogram_kernel", m.histogram_kernel},
           {"embedder", m.embedder},
           {"pres_per_frame", m.pres_per_frame},
           {"clip_img_per_pair", m.clip_img_per_pair},
           {"clip_text_per_frame", m.clip_text_per_frame}};
    return j;
}

}  // namespace vdds
