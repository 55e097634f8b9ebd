// Copyright 2026 Espada contributors
// SPDX-License-Identifier: Apache-2.0

#include "espada/segmentation.hpp"

#include <algorithm>
#include <cmath>
#include <deque>

#include "espada/errors.hpp"
#include "espada/transfer.hpp"

namespace espada {

namespace {

struct Run {
    Label label;
    int len;
};

std::vector<Run> to_runs(std::span<const Label> labels) {
    std::vector<Run> runs;
    for (Label l : labels) {
        if (!runs.empty() && runs.back().label == l)
            runs.back().len += 1;
        else
            runs.push_back({l, 1});
    }
    return runs;
}

std::vector<Label> from_runs(const std::vector<Run>& runs) {
    std::vector<Label> labels;
    for (const Run& r : runs) labels.insert(labels.end(), r.len, r.label);
    return labels;
}

void merge_adjacent(std::vector<Run>& runs) {
    std::vector<Run> merged;
    for (const Run& r : runs) {
        if (!merged.empty() && merged.back().label == r.label)
            merged.back().len += r.len;
        else
            merged.push_back(r);
    }
    runs = std::move(merged);
}

/// Rule 1: a label change is accepted only when the new label persists for
/// at least `hysteresis` frames; shorter bursts revert to the running label.
std::vector<Label> apply_hysteresis(std::span<const Label> labels, int hysteresis) {
    std::vector<Label> out(labels.begin(), labels.end());
    if (hysteresis <= 1 || labels.empty()) return out;
    Label cur = labels[0];
    int t = 1;
    const int T = static_cast<int>(labels.size());
    while (t < T) {
        if (labels[t] == cur) {
            ++t;
            continue;
        }
        int run = 1;
        while (t + run < T && labels[t + run] == labels[t]) ++run;
        if (run >= hysteresis) cur = labels[t];
        for (int k = 0; k < run; ++k) out[t + k] = cur;
        t += run;
    }
    return out;
}

/// Rules 2 and 3: absorb interior runs shorter than `limit` that are flanked
/// by the same label on both sides. Repeats until stable.
void absorb_short_runs(std::vector<Run>& runs, int limit) {
    if (limit <= 0) return;
    bool changed = true;
    while (changed && runs.size() >= 3) {
        changed = false;
        for (size_t i = 1; i + 1 < runs.size(); ++i) {
            if (runs[i].len < limit && runs[i - 1].label == runs[i + 1].label) {
                runs[i].label = runs[i - 1].label;
                merge_adjacent(runs);
                changed = true;
                break;
            }
        }
    }
}

/// Rule 4: runs shorter than min_len are absorbed into the longer neighbor
/// (ties go to the earlier one). Left-to-right, repeated until stable.
void enforce_min_length(std::vector<Run>& runs, int min_len) {
    if (min_len <= 1) return;
    bool changed = true;
    while (changed && runs.size() >= 2) {
        changed = false;
        for (size_t i = 0; i < runs.size(); ++i) {
            if (runs[i].len >= min_len) continue;
            size_t target;
            if (i == 0)
                target = 1;
            else if (i + 1 == runs.size())
                target = i - 1;
            else
                target = runs[i + 1].len > runs[i - 1].len ? i + 1 : i - 1;
            runs[i].label = runs[target].label;
            merge_adjacent(runs);
            changed = true;
            break;
        }
    }
}

} // namespace

void validate(const StabilityConfig& cfg) {
    if (cfg.min_segment_len < 0 || cfg.merge_gap < 0 || cfg.hysteresis < 0 || cfg.micro_len < 0)
        throw ValidationError("stability config values must be >= 0");
}

void validate(const GripperForceConfig& cfg) {
    if (cfg.lookahead < 1) throw ValidationError("gripper lookahead must be >= 1");
    if (!(cfg.threshold > 0.0)) throw ValidationError("gripper threshold must be > 0");
    if (cfg.pad < 0) throw ValidationError("gripper pad must be >= 0");
    if (cfg.dbscan_eps < 1 || cfg.dbscan_min_pts < 1)
        throw ValidationError("dbscan parameters must be >= 1");
}

Segmentation apply_stability(std::span<const Label> labels, const StabilityConfig& cfg,
                             const std::string& episode_id,
                             std::span<const double> confidences) {
    if (labels.empty()) throw DomainError("apply_stability: empty label list");

    const std::vector<Label> settled = apply_hysteresis(labels, cfg.hysteresis);
    std::vector<Run> runs = to_runs(settled);
    absorb_short_runs(runs, cfg.micro_len);  // micro-oscillation removal
    absorb_short_runs(runs, cfg.merge_gap);  // same-label merge across short gaps
    enforce_min_length(runs, cfg.min_segment_len);

    return labels_to_segmentation(from_runs(runs), episode_id, confidences);
}

double trend_slope(const RelationSeries& relation, int start, int end) {
    // Least squares on (t, r_t) over present values.
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    int n = 0;
    const int hi = std::min(end, static_cast<int>(relation.values.size()) - 1);
    for (int t = std::max(0, start); t <= hi; ++t) {
        if (!relation.values[t]) continue;
        const double x = t;
        const double y = *relation.values[t];
        sx += x;
        sy += y;
        sxx += x * x;
        sxy += x * y;
        ++n;
    }
    if (n < 2) return std::numeric_limits<double>::quiet_NaN();
    const double denom = n * sxx - sx * sx;
    if (denom == 0.0) return std::numeric_limits<double>::quiet_NaN();
    return (n * sxy - sx * sy) / denom;
}

int trend_sign(double slope, double deadband) {
    if (std::isnan(slope) || std::abs(slope) < deadband) return 0;
    return slope > 0.0 ? 1 : -1;
}

Segmentation coverage_completion(const Segmentation& seg, const RelationSeries& relation, int T,
                                 const StabilityConfig& cfg) {
    validate_segmentation(seg);
    if (!seg.segments.empty() && seg.segments.back().end > T - 1)
        throw ValidationError("segment end exceeds episode length");

    struct Gap {
        int start, end;
        int left = -1, right = -1; // neighbor segment indices
    };
    std::vector<Gap> gaps;
    int cursor = 0;
    for (size_t i = 0; i < seg.segments.size(); ++i) {
        if (seg.segments[i].start > cursor)
            gaps.push_back({cursor, seg.segments[i].start - 1, static_cast<int>(i) - 1,
                            static_cast<int>(i)});
        cursor = seg.segments[i].end + 1;
    }
    if (cursor <= T - 1)
        gaps.push_back({cursor, T - 1, static_cast<int>(seg.segments.size()) - 1, -1});

    std::vector<Label> labels(T, Label::precision);
    std::vector<double> confidences(T, 0.5);
    for (const Segment& s : seg.segments)
        for (int t = s.start; t <= s.end; ++t) {
            labels[t] = s.label;
            confidences[t] = s.confidence;
        }

    // Handle the empty-segmentation corner: everything defaults to precision.
    for (const Gap& gap : gaps) {
        const Segment* left = gap.left >= 0 ? &seg.segments[gap.left] : nullptr;
        const Segment* right = gap.right >= 0 ? &seg.segments[gap.right] : nullptr;
        if (!left && !right) continue;

        const Segment* chosen = nullptr;
        if (!left || !right) {
            chosen = left ? left : right;
        } else {
            const int gap_trend = trend_sign(trend_slope(relation, gap.start, gap.end));
            const int left_trend = trend_sign(trend_slope(relation, left->start, left->end));
            const int right_trend = trend_sign(trend_slope(relation, right->start, right->end));
            const bool gap_has_data =
                !std::isnan(trend_slope(relation, gap.start, gap.end));
            const bool left_match = gap_has_data && left_trend == gap_trend;
            const bool right_match = gap_has_data && right_trend == gap_trend;
            if (left_match != right_match) {
                chosen = left_match ? left : right; // trend match beats confidence
            } else if (left->confidence != right->confidence) {
                chosen = left->confidence > right->confidence ? left : right;
            } else {
                chosen = left; // full tie: earlier neighbor
            }
        }
        for (int t = gap.start; t <= gap.end; ++t) {
            labels[t] = chosen->label;
            confidences[t] = chosen->confidence;
        }
    }

    return apply_stability(labels, cfg, seg.episode_id, confidences);
}

std::vector<int> detect_gripper_events(const Episode& ep, const GripperForceConfig& cfg) {
    std::vector<int> events;
    const int T = ep.length();
    if (T <= cfg.lookahead) return events;
    const size_t channels = ep.frames.front().gripper.size();
    for (int t = 0; t + cfg.lookahead < T; ++t) {
        for (size_t c = 0; c < channels; ++c) {
            const double delta =
                std::abs(ep.frames[t + cfg.lookahead].gripper[c] - ep.frames[t].gripper[c]);
            if (delta >= cfg.threshold) {
                events.push_back(t);
                break;
            }
        }
    }
    return events;
}

std::vector<std::vector<int>> dbscan_1d(std::span<const int> points, int eps, int min_pts) {
    const int n = static_cast<int>(points.size());
    std::vector<std::vector<int>> clusters;
    if (n == 0) return clusters;
    for (int i = 1; i < n; ++i)
        if (points[i] < points[i - 1]) throw DomainError("dbscan_1d: points must be sorted");

    // Neighborhood of i = points within eps, the point itself included.
    auto neighbors = [&](int i) {
        std::vector<int> out;
        for (int j = i; j >= 0 && points[i] - points[j] <= eps; --j) out.push_back(j);
        for (int j = i + 1; j < n && points[j] - points[i] <= eps; ++j) out.push_back(j);
        return out;
    };

    constexpr int kUnvisited = -2, kNoise = -1;
    std::vector<int> assignment(n, kUnvisited);
    int cluster_id = 0;
    for (int i = 0; i < n; ++i) {
        if (assignment[i] != kUnvisited) continue;
        std::vector<int> nbrs = neighbors(i);
        if (static_cast<int>(nbrs.size()) < min_pts) {
            assignment[i] = kNoise;
            continue;
        }
        assignment[i] = cluster_id;
        std::deque<int> queue(nbrs.begin(), nbrs.end());
        while (!queue.empty()) {
            const int j = queue.front();
            queue.pop_front();
            if (assignment[j] == kNoise) assignment[j] = cluster_id; // border point
            if (assignment[j] != kUnvisited) continue;
            assignment[j] = cluster_id;
            std::vector<int> jn = neighbors(j);
            if (static_cast<int>(jn.size()) >= min_pts)
                queue.insert(queue.end(), jn.begin(), jn.end());
        }
        ++cluster_id;
    }

    clusters.resize(cluster_id);
    for (int i = 0; i < n; ++i)
        if (assignment[i] >= 0) clusters[assignment[i]].push_back(points[i]);
    for (auto& c : clusters) std::sort(c.begin(), c.end());
    std::sort(clusters.begin(), clusters.end(),
              [](const auto& a, const auto& b) { return a.front() < b.front(); });
    return clusters;
}

Segmentation force_gripper_precision(const Segmentation& seg,
                                     const std::vector<std::vector<int>>& clusters, int pad,
                                     int T) {
    validate_segmentation(seg);
    if (!seg.segments.empty() && seg.segments.back().end > T - 1)
        throw ValidationError("segment end exceeds episode length");
    std::vector<Label> labels(T, Label::precision);
    std::vector<double> confidences(T, 1.0);
    int covered = 0;
    for (const Segment& s : seg.segments) {
        for (int t = s.start; t <= s.end; ++t) {
            labels[t] = s.label;
            confidences[t] = s.confidence;
            ++covered;
        }
    }
    if (covered != T) throw ValidationError("force_gripper_precision requires full coverage");

    for (const auto& cluster : clusters) {
        if (cluster.empty()) continue;
        const int lo = std::max(0, cluster.front() - pad);
        const int hi = std::min(T - 1, cluster.back() + pad);
        for (int t = lo; t <= hi; ++t) {
            labels[t] = Label::precision;
            confidences[t] = 1.0;
        }
    }
    return labels_to_segmentation(labels, seg.episode_id, confidences);
}

Segmentation apply_gripper_forcing(const Episode& ep, const Segmentation& seg,
                                   const GripperForceConfig& cfg) {
    const std::vector<int> events = detect_gripper_events(ep, cfg);
    const auto clusters = dbscan_1d(events, cfg.dbscan_eps, cfg.dbscan_min_pts);
    return force_gripper_precision(seg, clusters, cfg.pad, ep.length());
}

} // namespace espada
