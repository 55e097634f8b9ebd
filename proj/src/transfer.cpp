// Copyright 2026 Espada contributors
// SPDX-License-Identifier: Apache-2.0

#include "espada/transfer.hpp"

#include <algorithm>
#include <cmath>

#include "espada/errors.hpp"

namespace espada {

void validate(const TransferConfig& cfg) {
    if (cfg.snap_window < 0) throw ValidationError("snap_window must be >= 0");
    if (cfg.snap_summary_len < 1) throw ValidationError("snap_summary_len must be >= 1");
    if (!(cfg.rho > 0.0 && cfg.rho <= 1.0)) throw ValidationError("rho must be in (0,1]");
    if (cfg.rho < 0.05 || cfg.rho > 0.10)
        log_warning("rho=" + std::to_string(cfg.rho) + " outside the recommended [0.05, 0.10]");
}

std::vector<double> mean_pool(const Matrix& m, int center, int len) {
    const int lo = std::max(0, center - (len - 1) / 2);
    const int hi = std::min(m.rows - 1, center + len / 2);
    std::vector<double> pooled(m.cols, 0.0);
    for (int r = lo; r <= hi; ++r)
        for (int c = 0; c < m.cols; ++c) pooled[c] += m.at(r, c);
    const double n = hi - lo + 1;
    for (double& x : pooled) x /= n;
    return pooled;
}

int snap_boundary(int idx, std::span<const double> source_summary, const Matrix& fk, int window,
                  int summary_len) {
    const int lo = std::max(0, idx - window);
    const int hi = std::min(fk.rows - 1, idx + window);
    int best = idx;
    double best_cost = std::numeric_limits<double>::infinity();
    for (int c = lo; c <= hi; ++c) {
        const std::vector<double> pooled = mean_pool(fk, c, summary_len);
        double cost = 0.0;
        for (size_t k = 0; k < pooled.size(); ++k) {
            const double d = pooled[k] - source_summary[k];
            cost += d * d;
        }
        const bool better =
            cost < best_cost ||
            (cost == best_cost && (std::abs(c - idx) < std::abs(best - idx) ||
                                   (std::abs(c - idx) == std::abs(best - idx) && c < best)));
        if (better) {
            best_cost = cost;
            best = c;
        }
    }
    return best;
}

Segmentation transfer_labels(const Segmentation& seg0, const AlignmentMap& map,
                             const FeatureSeries& f0, const FeatureSeries& fk,
                             const TransferConfig& cfg) {
    const int t0 = f0.matrix.rows;
    const int tk = fk.matrix.rows;
    if (map.source_len() != t0)
        throw ValidationError("alignment map length " + std::to_string(map.source_len()) +
                              " does not match source length " + std::to_string(t0));
    for (const Segment& s : seg0.segments)
        if (s.end >= t0)
            throw ValidationError("segment end " + std::to_string(s.end) +
                                  " exceeds source length " + std::to_string(t0));

    Segmentation out;
    out.episode_id = fk.episode_id;
    int prev_end = -1;
    for (const Segment& s : seg0.segments) {
        int start = map.map[s.start];
        int end = map.map[s.end];
        if (cfg.snap_window > 0) {
            // Source summaries are pooled at the original episode-0 boundary.
            const std::vector<double> start_summary =
                mean_pool(f0.matrix, s.start, cfg.snap_summary_len);
            const std::vector<double> end_summary =
                mean_pool(f0.matrix, s.end, cfg.snap_summary_len);
            start = snap_boundary(start, start_summary, fk.matrix, cfg.snap_window,
                                  cfg.snap_summary_len);
            end = snap_boundary(end, end_summary, fk.matrix, cfg.snap_window,
                                cfg.snap_summary_len);
        }
        start = std::clamp(start, 0, tk - 1);
        end = std::clamp(end, 0, tk - 1);
        // Earlier segments win: push this start past the previous end.
        start = std::max(start, prev_end + 1);
        if (end < start) {
            log_warning("dropping degenerate transferred segment of " + seg0.episode_id +
                        " [" + std::to_string(s.start) + "," + std::to_string(s.end) + "]");
            continue;
        }
        out.segments.push_back({start, end, s.label, s.confidence});
        prev_end = end;
    }
    validate_segmentation(out);
    return out;
}

std::vector<Label> expand_to_frames(const Segmentation& seg, int T) {
    validate_segmentation(seg);
    if (!seg.segments.empty() && seg.segments.back().end > T - 1)
        throw ValidationError("segment end " + std::to_string(seg.segments.back().end) +
                              " exceeds episode length " + std::to_string(T));
    std::vector<Label> labels(T, Label::precision); // uncovered frames default to precision
    for (const Segment& s : seg.segments)
        for (int t = s.start; t <= s.end; ++t) labels[t] = s.label;
    return labels;
}

Segmentation labels_to_segmentation(std::span<const Label> labels, const std::string& episode_id,
                                    std::span<const double> confidences) {
    Segmentation out;
    out.episode_id = episode_id;
    const int T = static_cast<int>(labels.size());
    int start = 0;
    for (int t = 1; t <= T; ++t) {
        if (t == T || labels[t] != labels[start]) {
            double conf = 1.0;
            if (!confidences.empty()) {
                conf = 0.0;
                for (int k = start; k < t; ++k) conf += confidences[k];
                conf /= (t - start);
            }
            out.segments.push_back({start, t - 1, labels[start], conf});
            start = t;
        }
    }
    return out;
}

} // namespace espada
