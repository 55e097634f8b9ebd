// Copyright 2026 Espada contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <span>
#include <string>
#include <vector>

#include "espada/dataset.hpp"

namespace espada {

enum class HorizonMode { half, geometric };

const char* to_string(HorizonMode mode);
HorizonMode horizon_mode_from_string(const std::string& name);

struct AccelPlan {
    int n_precision = 2;
    int n_casual = 4;
    int chunk_horizon = 100; // K
    HorizonMode horizon_mode = HorizonMode::half;

    int factor_for(Label label) const {
        return label == Label::precision ? n_precision : n_casual;
    }
    int replica_count() const { return n_precision > n_casual ? n_precision : n_casual; }
};

void validate(const AccelPlan& plan);

/// Frames of [s, e] kept by replica offset m under factor n:
/// { t in [s,e] : (t - s) mod n == m }, ascending.
std::vector<int> rbd_segment(int s, int e, int n, int m);

struct ReplicaEpisode {
    std::string source_id;
    int replica_index = 0;
    std::vector<int> segment_offsets; // offset used within each source segment
    std::vector<int> source_indices;  // provenance, strictly increasing
    Episode episode;                  // reindexed frames, source_index set
};

/// max(n_precision, n_casual) replicas; replica r uses offset r mod N_y inside
/// each segment of label y. The union of retained indices over replicas is the
/// full original index set.
std::vector<ReplicaEpisode> compile_episode(const Episode& ep, const Segmentation& seg,
                                            const AccelPlan& plan);

std::vector<std::vector<ReplicaEpisode>> compile_dataset(std::span<const Episode> episodes,
                                                         std::span<const Segmentation> segs,
                                                         const AccelPlan& plan, int jobs = 0);

/// Rescaled chunk horizon K'. half: ceil(K/2). geometric: smallest K' whose
/// median per-chunk path length over the retained frames reaches the median
/// original-horizon path length, capped at K. Displacement uses ee_pos when
/// present, joint_pos otherwise.
int rescale_horizon(const Episode& ep, int chunk_horizon, std::span<const int> retained,
                    HorizonMode mode);

} // namespace espada
