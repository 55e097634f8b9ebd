// Copyright 2026 Espada contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "espada/dataset.hpp"
#include "espada/matrix.hpp"

namespace espada {

/// Z-scored per-frame proprioceptive features. Row t concatenates, in order:
/// a_t, da_t, v_t, dv_t, |a_t|, |v_t|, |da_t|, |dq_t|, |dv_t|, angle(a_t, a_t+da_t),
/// angle(v_t, v_t+dv_t), where d is the backward difference with dx_0 = 0 and
/// v_t falls back to dq_t when joint velocities are absent.
struct FeatureSeries {
    std::string episode_id;
    Matrix matrix;
    std::vector<std::string> column_names;
    std::vector<double> means;
    std::vector<double> stds;
};

struct FeatureOptions {
    // Z-score with statistics pooled over the whole batch instead of per episode.
    bool global_stats = false;
};

/// Angle in [0, pi] between two vectors; 0 when either norm is below 1e-12.
double angle_between(std::span<const double> x, std::span<const double> y);

std::vector<std::string> feature_column_names(int action_dim, int velocity_dim);

/// Feature matrix before z-scoring. Requires T >= 2.
Matrix raw_features(const Episode& ep);

FeatureSeries build_features(const Episode& ep);

/// One FeatureSeries per episode; episodes are processed in parallel.
std::vector<FeatureSeries> build_features_all(std::span<const Episode> episodes, int jobs = 0,
                                              const FeatureOptions& options = {});

// Flat binary export (row-major float64) plus a JSON sidecar carrying shape,
// column names and the z-scoring statistics.
void write_feature_series(const FeatureSeries& fs, const std::filesystem::path& bin_path,
                          const std::filesystem::path& sidecar_path);

} // namespace espada
