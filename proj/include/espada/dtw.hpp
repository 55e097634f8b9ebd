// Copyright 2026 Espada contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <span>
#include <utility>
#include <vector>

#include "espada/features.hpp"
#include "espada/matrix.hpp"

namespace espada {

/// Monotone warping path from (0,0) to (T0-1, Tk-1); cost is the accumulated
/// Euclidean frame distance along it.
struct AlignmentPath {
    std::vector<std::pair<int, int>> pairs;
    double cost = 0.0;
};

/// Per-source-frame target index, non-decreasing, endpoints pinned.
struct AlignmentMap {
    std::vector<int> map;
    int band_halfwidth = 0;
    double rho = 0.0;

    int source_len() const { return static_cast<int>(map.size()); }
};

/// Sakoe-Chiba half-width: floor(rho * max(T0, Tk)), widened until a monotone
/// path from corner to corner exists within the band.
int compute_band(int t0, int tk, double rho);

/// True when a monotone path exists inside the band of half-width b around
/// the scaled diagonal j = i * Tk / T0.
bool band_feasible(int t0, int tk, int b);

/// Band membership used by the DP and by path validation.
bool in_band(int i, int j, int t0, int tk, int b);

AlignmentPath banded_dtw(const Matrix& x0, const Matrix& xk, double rho);
AlignmentPath banded_dtw_fixed_band(const Matrix& x0, const Matrix& xk, int halfwidth);

/// Collapse a path to an index map: per source frame, the round-half-even
/// average of matched target indices, then a monotone pass, endpoints pinned.
AlignmentMap path_to_map(const AlignmentPath& path, int t0, int tk);

double round_half_even(double x);

/// Alignment maps episode0 -> each target; pairs run in parallel.
std::vector<AlignmentMap> align_all(const FeatureSeries& f0,
                                    std::span<const FeatureSeries> targets, double rho,
                                    int jobs = 0);

// Debug dump: {"rho","b","cost","pairs":[[i,j],...]}
void write_path(const AlignmentPath& path, double rho, int halfwidth,
                const std::filesystem::path& out);

} // namespace espada
