// Copyright 2026 Espada contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <span>
#include <string>
#include <vector>

#include "espada/dataset.hpp"
#include "espada/dtw.hpp"
#include "espada/features.hpp"

namespace espada {

struct TransferConfig {
    double rho = 0.08;
    int snap_window = 12;     // W
    int snap_summary_len = 5; // frames pooled per boundary summary
    // Uncovered frames always default to precision.
};

/// Warns when rho leaves [0.05, 0.10]; throws on negative windows.
void validate(const TransferConfig& cfg);

/// Mean over rows [center - (len-1)/2, center + len/2], truncated at edges.
std::vector<double> mean_pool(const Matrix& m, int center, int len);

/// argmin over c in [idx-window, idx+window] of ||mean_pool(fk,c,len) - summary||.
/// Ties prefer the candidate closest to idx, then the smaller index.
int snap_boundary(int idx, std::span<const double> source_summary, const Matrix& fk,
                  int window, int summary_len);

/// Maps episode-0 segments through the alignment map, snaps both ends, trims
/// overlaps in order (later start moves to former end + 1) and drops segments
/// that invert. Gaps are allowed in the result.
Segmentation transfer_labels(const Segmentation& seg0, const AlignmentMap& map,
                             const FeatureSeries& f0, const FeatureSeries& fk,
                             const TransferConfig& cfg);

/// Per-frame labels; frames not covered by any segment become precision.
std::vector<Label> expand_to_frames(const Segmentation& seg, int T);

/// Runs of equal labels -> full-coverage segmentation. When per-frame
/// confidences are given, each segment takes their mean over its span.
Segmentation labels_to_segmentation(std::span<const Label> labels, const std::string& episode_id,
                                    std::span<const double> confidences = {});

} // namespace espada
