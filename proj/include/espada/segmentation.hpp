// Copyright 2026 Espada contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <span>
#include <string>
#include <vector>

#include "espada/dataset.hpp"
#include "espada/geometry.hpp"

namespace espada {

struct StabilityConfig {
    int min_segment_len = 8; // L_min
    int merge_gap = 5;       // G_min
    int hysteresis = 3;      // frames required to switch labels
    int micro_len = 6;       // L_micro
};

struct GripperForceConfig {
    int lookahead = 4;
    double threshold = 0.03;
    int pad = 2;
    int dbscan_eps = 8;
    int dbscan_min_pts = 2;
};

void validate(const StabilityConfig& cfg);
void validate(const GripperForceConfig& cfg);

/// Stability post-processing on per-frame labels, applied in order:
/// hysteresis, micro-oscillation removal, same-label gap merge, minimum
/// segment length. Returns a full-coverage segmentation. Optional per-frame
/// confidences are averaged over each final segment (1.0 otherwise).
Segmentation apply_stability(std::span<const Label> labels, const StabilityConfig& cfg,
                             const std::string& episode_id = "",
                             std::span<const double> confidences = {});

/// Fills gaps by extending the neighbor whose internal r_t trend matches the
/// gap's trend (matches beat confidence, then higher confidence, then the
/// earlier neighbor), then re-applies the stability rules. Full coverage out.
Segmentation coverage_completion(const Segmentation& seg, const RelationSeries& relation, int T,
                                 const StabilityConfig& cfg);

/// Frames t with |g[t+lookahead] - g[t]| >= threshold on any gripper channel.
std::vector<int> detect_gripper_events(const Episode& ep, const GripperForceConfig& cfg);

/// DBSCAN on the temporal axis (|a-b| metric, neighborhoods include the
/// point itself). Clusters come back as ascending index lists; noise is
/// dropped. Input must be sorted ascending.
std::vector<std::vector<int>> dbscan_1d(std::span<const int> points, int eps, int min_pts);

/// Overrides [min-pad, max+pad] of every cluster to precision on top of a
/// full-coverage segmentation.
Segmentation force_gripper_precision(const Segmentation& seg,
                                     const std::vector<std::vector<int>>& clusters, int pad,
                                     int T);

/// detect_gripper_events + dbscan_1d + force_gripper_precision.
Segmentation apply_gripper_forcing(const Episode& ep, const Segmentation& seg,
                                   const GripperForceConfig& cfg);

/// Least-squares slope of the present values of r over frames [start, end].
/// NaN when fewer than two values are present.
double trend_slope(const RelationSeries& relation, int start, int end);

/// -1 / 0 / +1 with a dead-band: |slope| < deadband (or NaN) counts as flat.
int trend_sign(double slope, double deadband = 1e-4);

} // namespace espada
