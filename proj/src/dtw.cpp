// Copyright 2026 Espada contributors
// SPDX-License-Identifier: Apache-2.0

#include "espada/dtw.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>

#include <json.hpp>

#include "espada/errors.hpp"
#include "espada/parallel.hpp"

namespace espada {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Step codes for path reconstruction.
enum : unsigned char { kStepNone = 0, kStepDiag = 1, kStepUp = 2, kStepLeft = 3 };

/// Column range of the band in row i: centered on the scaled diagonal
/// j = i * Tk / T0, clipped to [0, Tk-1]. Empty when hi < lo.
struct BandRow {
    int lo;
    int hi;
};

BandRow band_row(int i, int t0, int tk, int b) {
    const double center = t0 > 0 ? static_cast<double>(i) * tk / t0 : 0.0;
    int lo = static_cast<int>(std::ceil(center - b));
    int hi = static_cast<int>(std::floor(center + b));
    lo = std::max(lo, 0);
    hi = std::min(hi, tk - 1);
    return {lo, hi};
}

} // namespace

bool in_band(int i, int j, int t0, int tk, int b) {
    const BandRow r = band_row(i, t0, tk, b);
    return j >= r.lo && j <= r.hi;
}

bool band_feasible(int t0, int tk, int b) {
    if (t0 < 1 || tk < 1 || b < 0) return false;
    if (!in_band(0, 0, t0, tk, b) || !in_band(t0 - 1, tk - 1, t0, tk, b)) return false;
    BandRow prev = band_row(0, t0, tk, b);
    if (prev.hi < prev.lo) return false;
    for (int i = 1; i < t0; ++i) {
        const BandRow cur = band_row(i, t0, tk, b);
        if (cur.hi < cur.lo) return false;
        // A monotone step can reach row i only if the rows connect.
        if (cur.lo > prev.hi + 1 || cur.hi < prev.lo) return false;
        prev = cur;
    }
    return true;
}

int compute_band(int t0, int tk, double rho) {
    if (t0 < 1 || tk < 1) throw DomainError("compute_band: lengths must be >= 1");
    if (!(rho > 0.0 && rho <= 1.0)) throw DomainError("compute_band: rho must be in (0,1]");
    int b = static_cast<int>(std::floor(rho * std::max(t0, tk)));
    if (!band_feasible(t0, tk, b))
        b = std::max(b, (std::abs(t0 - tk) + 1) / 2 + 1);
    while (!band_feasible(t0, tk, b)) ++b; // degenerate shapes (e.g. T0=1)
    return b;
}

AlignmentPath banded_dtw_fixed_band(const Matrix& x0, const Matrix& xk, int halfwidth) {
    if (x0.cols != xk.cols)
        throw ValidationError("feature width mismatch: " + std::to_string(x0.cols) + " vs " +
                              std::to_string(xk.cols));
    const int t0 = x0.rows;
    const int tk = xk.rows;
    if (t0 < 1 || tk < 1) throw DomainError("banded_dtw: empty input");
    if (!band_feasible(t0, tk, halfwidth))
        throw DomainError("banded_dtw: band half-width " + std::to_string(halfwidth) +
                          " admits no path for " + std::to_string(t0) + "x" + std::to_string(tk));

    // Banded storage: row i holds columns [lo_i, hi_i] only.
    std::vector<BandRow> rows(t0);
    std::vector<size_t> offset(t0 + 1, 0);
    for (int i = 0; i < t0; ++i) {
        rows[i] = band_row(i, t0, tk, halfwidth);
        offset[i + 1] = offset[i] + static_cast<size_t>(rows[i].hi - rows[i].lo + 1);
    }
    std::vector<double> cost(offset[t0], kInf);
    std::vector<unsigned char> step(offset[t0], kStepNone);

    auto cell = [&](int i, int j) -> size_t { return offset[i] + (j - rows[i].lo); };
    auto cost_at = [&](int i, int j) -> double {
        if (i < 0 || j < 0) return kInf;
        if (j < rows[i].lo || j > rows[i].hi) return kInf;
        return cost[cell(i, j)];
    };

    for (int i = 0; i < t0; ++i) {
        for (int j = rows[i].lo; j <= rows[i].hi; ++j) {
            const double d = row_distance(x0, i, xk, j);
            if (i == 0 && j == 0) {
                cost[cell(i, j)] = d;
                step[cell(i, j)] = kStepNone;
                continue;
            }
            const double diag = cost_at(i - 1, j - 1);
            const double up = cost_at(i - 1, j);
            const double left = cost_at(i, j - 1);
            double best = diag;
            unsigned char how = kStepDiag; // ties prefer the diagonal
            if (up < best) {
                best = up;
                how = kStepUp;
            }
            if (left < best) {
                best = left;
                how = kStepLeft;
            }
            if (best == kInf) continue; // unreachable corner cell
            cost[cell(i, j)] = d + best;
            step[cell(i, j)] = how;
        }
    }

    AlignmentPath path;
    path.cost = cost_at(t0 - 1, tk - 1);
    int i = t0 - 1, j = tk - 1;
    while (true) {
        path.pairs.emplace_back(i, j);
        const unsigned char how = step[cell(i, j)];
        if (how == kStepNone) break;
        if (how == kStepDiag) {
            --i;
            --j;
        } else if (how == kStepUp) {
            --i;
        } else {
            --j;
        }
    }
    std::reverse(path.pairs.begin(), path.pairs.end());
    return path;
}

AlignmentPath banded_dtw(const Matrix& x0, const Matrix& xk, double rho) {
    return banded_dtw_fixed_band(x0, xk, compute_band(x0.rows, xk.rows, rho));
}

double round_half_even(double x) {
    const double floor_x = std::floor(x);
    const double frac = x - floor_x;
    if (frac > 0.5) return floor_x + 1.0;
    if (frac < 0.5) return floor_x;
    // Exactly halfway: round to the even neighbor.
    return std::fmod(floor_x, 2.0) == 0.0 ? floor_x : floor_x + 1.0;
}

AlignmentMap path_to_map(const AlignmentPath& path, int t0, int tk) {
    AlignmentMap out;
    out.map.assign(t0, 0);
    std::vector<double> sum(t0, 0.0);
    std::vector<int> count(t0, 0);
    for (const auto& [i, j] : path.pairs) {
        sum[i] += j;
        count[i] += 1;
    }
    for (int t = 0; t < t0; ++t) {
        if (count[t] == 0) throw DomainError("path skips source frame " + std::to_string(t));
        out.map[t] = static_cast<int>(round_half_even(sum[t] / count[t]));
    }
    for (int t = 1; t < t0; ++t) out.map[t] = std::max(out.map[t], out.map[t - 1]);
    // The averaging can pull endpoints off the corners; pin them back.
    out.map[0] = 0;
    out.map[t0 - 1] = tk - 1;
    return out;
}

std::vector<AlignmentMap> align_all(const FeatureSeries& f0,
                                    std::span<const FeatureSeries> targets, double rho,
                                    int jobs) {
    std::vector<AlignmentMap> out(targets.size());
    parallel_for(static_cast<int>(targets.size()), jobs, [&](int i) {
        const AlignmentPath path = banded_dtw(f0.matrix, targets[i].matrix, rho);
        AlignmentMap map = path_to_map(path, f0.matrix.rows, targets[i].matrix.rows);
        map.rho = rho;
        map.band_halfwidth = compute_band(f0.matrix.rows, targets[i].matrix.rows, rho);
        out[i] = std::move(map);
    });
    return out;
}

void write_path(const AlignmentPath& path, double rho, int halfwidth,
                const std::filesystem::path& out) {
    nlohmann::ordered_json pairs = nlohmann::ordered_json::array();
    for (const auto& [i, j] : path.pairs) pairs.push_back({i, j});
    nlohmann::ordered_json j{
        {"rho", rho}, {"b", halfwidth}, {"cost", path.cost}, {"pairs", std::move(pairs)}};
    std::ofstream f(out, std::ios::binary);
    if (!f) throw IoError("cannot write " + out.string());
    f << j.dump() << "\n";
}

} // namespace espada
