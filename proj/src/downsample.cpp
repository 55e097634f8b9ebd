// Copyright 2026 Espada contributors
// SPDX-License-Identifier: Apache-2.0

#include "espada/downsample.hpp"

#include <algorithm>
#include <cmath>

#include "espada/errors.hpp"
#include "espada/matrix.hpp"
#include "espada/parallel.hpp"

namespace espada {

const char* to_string(HorizonMode mode) {
    return mode == HorizonMode::half ? "half" : "geometric";
}

HorizonMode horizon_mode_from_string(const std::string& name) {
    if (name == "half") return HorizonMode::half;
    if (name == "geometric") return HorizonMode::geometric;
    throw ValidationError("unknown horizon mode \"" + name + "\" (expected half|geometric)");
}

void validate(const AccelPlan& plan) {
    if (plan.n_precision < 1) throw ValidationError("n_precision must be >= 1");
    if (plan.n_casual < plan.n_precision)
        throw ValidationError("n_casual must be >= n_precision");
    if (plan.chunk_horizon < 1) throw ValidationError("chunk_horizon must be >= 1");
}

std::vector<int> rbd_segment(int s, int e, int n, int m) {
    if (s > e) throw DomainError("rbd_segment: start > end");
    if (n < 1) throw DomainError("rbd_segment: factor must be >= 1");
    if (m < 0 || m >= n)
        throw DomainError("rbd_segment: offset " + std::to_string(m) + " outside [0," +
                          std::to_string(n - 1) + "]");
    std::vector<int> kept;
    for (int t = s + m; t <= e; t += n) kept.push_back(t);
    return kept;
}

namespace {

bool covers(const Segmentation& seg, int T) {
    int cursor = 0;
    for (const Segment& s : seg.segments) {
        if (s.start != cursor) return false;
        cursor = s.end + 1;
    }
    return cursor == T;
}

/// Displacement proxy per frame: ee_pos when recorded, joint_pos otherwise.
const std::vector<double>& displacement_source(const Frame& f) {
    return f.ee_pos ? *f.ee_pos : f.joint_pos;
}

double step_length(const Episode& ep, int a, int b) {
    const std::vector<double>& xa = displacement_source(ep.frames[a]);
    const std::vector<double>& xb = displacement_source(ep.frames[b]);
    double acc = 0.0;
    for (size_t i = 0; i < xa.size(); ++i) {
        const double d = xb[i] - xa[i];
        acc += d * d;
    }
    return std::sqrt(acc);
}

double median(std::vector<double> v) {
    if (v.empty()) return 0.0;
    const size_t mid = v.size() / 2;
    std::nth_element(v.begin(), v.begin() + mid, v.end());
    double m = v[mid];
    if (v.size() % 2 == 0) {
        std::nth_element(v.begin(), v.begin() + mid - 1, v.end());
        m = 0.5 * (m + v[mid - 1]);
    }
    return m;
}

/// Median over chunk starts of the path length covered by `horizon` steps.
/// Falls back to the single truncated window when the sequence is shorter.
double median_chunk_displacement(const std::vector<double>& steps, int horizon) {
    const int n = static_cast<int>(steps.size());
    if (n == 0) return 0.0;
    if (horizon >= n) {
        double total = 0.0;
        for (double s : steps) total += s;
        return total;
    }
    // Sliding window sums.
    std::vector<double> sums;
    double window = 0.0;
    for (int i = 0; i < horizon; ++i) window += steps[i];
    sums.push_back(window);
    for (int i = horizon; i < n; ++i) {
        window += steps[i] - steps[i - horizon];
        sums.push_back(window);
    }
    return median(std::move(sums));
}

} // namespace

int rescale_horizon(const Episode& ep, int chunk_horizon, std::span<const int> retained,
                    HorizonMode mode) {
    if (chunk_horizon < 1) throw DomainError("rescale_horizon: K must be >= 1");
    if (retained.empty()) throw DomainError("rescale_horizon: empty retained list");
    if (mode == HorizonMode::half) return (chunk_horizon + 1) / 2;

    std::vector<double> source_steps;
    for (int t = 0; t + 1 < ep.length(); ++t) source_steps.push_back(step_length(ep, t, t + 1));
    std::vector<double> retained_steps;
    for (size_t i = 0; i + 1 < retained.size(); ++i)
        retained_steps.push_back(step_length(ep, retained[i], retained[i + 1]));

    const double target = median_chunk_displacement(source_steps, chunk_horizon);
    // Relative slack: a one-ulp shortfall in the step sums must not move K'.
    const double threshold = target * (1.0 - 1e-9);
    for (int k = 1; k <= chunk_horizon; ++k) {
        if (median_chunk_displacement(retained_steps, k) >= threshold) return k;
    }
    return chunk_horizon;
}

std::vector<ReplicaEpisode> compile_episode(const Episode& ep, const Segmentation& seg,
                                            const AccelPlan& plan) {
    validate(plan);
    validate_segmentation(seg);
    if (!covers(seg, ep.length()))
        throw ValidationError("segmentation of " + ep.id +
                              " does not cover the episode; run coverage completion first");

    const int replicas = plan.replica_count();
    std::vector<ReplicaEpisode> out;
    out.reserve(replicas);
    for (int r = 0; r < replicas; ++r) {
        ReplicaEpisode rep;
        rep.source_id = ep.id;
        rep.replica_index = r;
        for (const Segment& s : seg.segments) {
            const int factor = plan.factor_for(s.label);
            const int offset = r % factor;
            rep.segment_offsets.push_back(offset);
            const std::vector<int> kept = rbd_segment(s.start, s.end, factor, offset);
            rep.source_indices.insert(rep.source_indices.end(), kept.begin(), kept.end());
        }
        rep.episode.id = ep.id + "#r" + std::to_string(r);
        rep.episode.control_hz = ep.control_hz;
        rep.episode.cameras = ep.cameras;
        rep.episode.frames.reserve(rep.source_indices.size());
        for (size_t i = 0; i < rep.source_indices.size(); ++i) {
            Frame f = ep.frames[rep.source_indices[i]];
            f.source_index = rep.source_indices[i];
            f.index = static_cast<int>(i);
            rep.episode.frames.push_back(std::move(f));
        }
        out.push_back(std::move(rep));
    }
    return out;
}

std::vector<std::vector<ReplicaEpisode>> compile_dataset(std::span<const Episode> episodes,
                                                         std::span<const Segmentation> segs,
                                                         const AccelPlan& plan, int jobs) {
    if (episodes.size() != segs.size())
        throw ValidationError("episode / segmentation count mismatch");
    std::vector<std::vector<ReplicaEpisode>> out(episodes.size());
    parallel_for(static_cast<int>(episodes.size()), jobs,
                 [&](int i) { out[i] = compile_episode(episodes[i], segs[i], plan); });
    return out;
}

} // namespace espada
