// Copyright 2026 Espada contributors
// SPDX-License-Identifier: Apache-2.0

#include "espada/features.hpp"

#include <cmath>
#include <fstream>

#include <json.hpp>

#include "espada/errors.hpp"
#include "espada/parallel.hpp"

namespace espada {

double angle_between(std::span<const double> x, std::span<const double> y) {
    const double nx = norm2(x);
    const double ny = norm2(y);
    if (nx < 1e-12 || ny < 1e-12) return 0.0;
    double dot = 0.0;
    const size_t n = std::min(x.size(), y.size());
    for (size_t i = 0; i < n; ++i) dot += x[i] * y[i];
    double c = dot / (nx * ny);
    if (c > 1.0) c = 1.0;
    if (c < -1.0) c = -1.0;
    return std::acos(c);
}

std::vector<std::string> feature_column_names(int action_dim, int velocity_dim) {
    std::vector<std::string> names;
    for (int i = 0; i < action_dim; ++i) names.push_back("a[" + std::to_string(i) + "]");
    for (int i = 0; i < action_dim; ++i) names.push_back("da[" + std::to_string(i) + "]");
    for (int i = 0; i < velocity_dim; ++i) names.push_back("v[" + std::to_string(i) + "]");
    for (int i = 0; i < velocity_dim; ++i) names.push_back("dv[" + std::to_string(i) + "]");
    names.insert(names.end(),
                 {"norm_a", "norm_v", "norm_da", "norm_dq", "norm_dv", "angle_a", "angle_v"});
    return names;
}

namespace {

std::vector<double> diff(const std::vector<double>& cur, const std::vector<double>& prev) {
    std::vector<double> d(cur.size());
    for (size_t i = 0; i < cur.size(); ++i) d[i] = cur[i] - prev[i];
    return d;
}

std::vector<double> add(std::span<const double> a, std::span<const double> b) {
    std::vector<double> s(a.size());
    for (size_t i = 0; i < a.size(); ++i) s[i] = a[i] + b[i];
    return s;
}

// Zero raw variance = all values bitwise equal. A std threshold would
// misread the rounding noise of a summed constant column as signal.
bool column_constant(const Matrix& m, int c) {
    for (int r = 1; r < m.rows; ++r)
        if (m.at(r, c) != m.at(0, c)) return false;
    return true;
}

void zscore_columns(Matrix& m, std::vector<double>& means, std::vector<double>& stds) {
    means.assign(m.cols, 0.0);
    stds.assign(m.cols, 0.0);
    for (int c = 0; c < m.cols; ++c) {
        double sum = 0.0;
        for (int r = 0; r < m.rows; ++r) sum += m.at(r, c);
        const double mean = sum / m.rows;
        means[c] = mean;
        if (column_constant(m, c)) {
            // Zero-variance columns pass through as all zeros.
            for (int r = 0; r < m.rows; ++r) m.at(r, c) = 0.0;
            continue;
        }
        double var = 0.0;
        for (int r = 0; r < m.rows; ++r) {
            const double d = m.at(r, c) - mean;
            var += d * d;
        }
        const double std = std::sqrt(var / m.rows);
        stds[c] = std;
        for (int r = 0; r < m.rows; ++r) m.at(r, c) = (m.at(r, c) - mean) / std;
    }
}

} // namespace

Matrix raw_features(const Episode& ep) {
    const int T = ep.length();
    if (T < 2) throw DomainError("features need T >= 2, episode " + ep.id + " has T=" +
                                 std::to_string(T));
    const int da = static_cast<int>(ep.frames.front().action.size());
    const bool has_vel = ep.frames.front().joint_vel.has_value();
    const int dq = static_cast<int>(ep.frames.front().joint_pos.size());
    const int dv = has_vel ? static_cast<int>(ep.frames.front().joint_vel->size()) : dq;

    const int cols = 2 * da + 2 * dv + 5 + 2;
    Matrix m(T, cols);

    std::vector<double> zero_a(da, 0.0), zero_v(dv, 0.0), zero_q(dq, 0.0);
    for (int t = 0; t < T; ++t) {
        const Frame& f = ep.frames[t];
        const std::vector<double>& a = f.action;
        const std::vector<double> d_a = t == 0 ? zero_a : diff(a, ep.frames[t - 1].action);
        const std::vector<double> d_q =
            t == 0 ? zero_q : diff(f.joint_pos, ep.frames[t - 1].joint_pos);
        // Joint velocities when recorded, joint-position differences as proxy.
        const std::vector<double> v = has_vel ? *f.joint_vel : d_q;
        std::vector<double> d_v;
        if (t == 0)
            d_v = zero_v;
        else if (has_vel)
            d_v = diff(*f.joint_vel, *ep.frames[t - 1].joint_vel);
        else
            d_v = diff(d_q, t == 1 ? zero_q : diff(ep.frames[t - 1].joint_pos,
                                                   ep.frames[t - 2].joint_pos));

        int c = 0;
        for (double x : a) m.at(t, c++) = x;
        for (double x : d_a) m.at(t, c++) = x;
        for (double x : v) m.at(t, c++) = x;
        for (double x : d_v) m.at(t, c++) = x;
        m.at(t, c++) = norm2(a);
        m.at(t, c++) = norm2(v);
        m.at(t, c++) = norm2(d_a);
        m.at(t, c++) = norm2(d_q);
        m.at(t, c++) = norm2(d_v);
        m.at(t, c++) = angle_between(a, add(a, d_a));
        m.at(t, c++) = angle_between(v, add(v, d_v));
    }
    return m;
}

FeatureSeries build_features(const Episode& ep) {
    FeatureSeries fs;
    fs.episode_id = ep.id;
    fs.matrix = raw_features(ep);
    const int da = static_cast<int>(ep.frames.front().action.size());
    const int dv = ep.frames.front().joint_vel
                       ? static_cast<int>(ep.frames.front().joint_vel->size())
                       : static_cast<int>(ep.frames.front().joint_pos.size());
    fs.column_names = feature_column_names(da, dv);
    zscore_columns(fs.matrix, fs.means, fs.stds);
    for (double x : fs.matrix.data)
        if (!std::isfinite(x)) throw ValidationError("non-finite feature in episode " + ep.id);
    return fs;
}

std::vector<FeatureSeries> build_features_all(std::span<const Episode> episodes, int jobs,
                                              const FeatureOptions& options) {
    std::vector<FeatureSeries> out(episodes.size());
    if (!options.global_stats) {
        parallel_for(static_cast<int>(episodes.size()), jobs,
                     [&](int i) { out[i] = build_features(episodes[i]); });
        return out;
    }

    // Global mode: raw matrices first, then z-score with pooled statistics.
    std::vector<Matrix> raw(episodes.size());
    parallel_for(static_cast<int>(episodes.size()), jobs,
                 [&](int i) { raw[i] = raw_features(episodes[i]); });
    const int cols = raw.empty() ? 0 : raw.front().cols;
    for (const Matrix& m : raw)
        if (m.cols != cols) throw ValidationError("episodes disagree on feature width");

    std::vector<double> mean(cols, 0.0), var(cols, 0.0);
    std::vector<bool> constant(cols, true);
    long total = 0;
    for (const Matrix& m : raw) {
        total += m.rows;
        for (int r = 0; r < m.rows; ++r)
            for (int c = 0; c < cols; ++c) {
                mean[c] += m.at(r, c);
                if (m.at(r, c) != raw.front().at(0, c)) constant[c] = false;
            }
    }
    for (int c = 0; c < cols; ++c) mean[c] /= total;
    for (const Matrix& m : raw)
        for (int r = 0; r < m.rows; ++r)
            for (int c = 0; c < cols; ++c) {
                const double d = m.at(r, c) - mean[c];
                var[c] += d * d;
            }
    std::vector<double> std_dev(cols);
    for (int c = 0; c < cols; ++c) std_dev[c] = constant[c] ? 0.0 : std::sqrt(var[c] / total);

    for (size_t i = 0; i < episodes.size(); ++i) {
        FeatureSeries fs;
        fs.episode_id = episodes[i].id;
        fs.matrix = std::move(raw[i]);
        const int da = static_cast<int>(episodes[i].frames.front().action.size());
        const int dv = episodes[i].frames.front().joint_vel
                           ? static_cast<int>(episodes[i].frames.front().joint_vel->size())
                           : static_cast<int>(episodes[i].frames.front().joint_pos.size());
        fs.column_names = feature_column_names(da, dv);
        fs.means = mean;
        fs.stds = std_dev;
        for (int c = 0; c < cols; ++c) {
            for (int r = 0; r < fs.matrix.rows; ++r) {
                fs.matrix.at(r, c) =
                    std_dev[c] > 0.0 ? (fs.matrix.at(r, c) - mean[c]) / std_dev[c] : 0.0;
            }
        }
        out[i] = std::move(fs);
    }
    return out;
}

void write_feature_series(const FeatureSeries& fs, const std::filesystem::path& bin_path,
                          const std::filesystem::path& sidecar_path) {
    std::ofstream bin(bin_path, std::ios::binary);
    if (!bin) throw IoError("cannot write " + bin_path.string());
    bin.write(reinterpret_cast<const char*>(fs.matrix.data.data()),
              static_cast<std::streamsize>(fs.matrix.data.size() * sizeof(double)));
    if (!bin) throw IoError("write failed for " + bin_path.string());

    nlohmann::ordered_json j{{"episode_id", fs.episode_id},
                             {"rows", fs.matrix.rows},
                             {"cols", fs.matrix.cols},
                             {"dtype", "float64"},
                             {"order", "row-major"},
                             {"column_names", fs.column_names},
                             {"means", fs.means},
                             {"stds", fs.stds}};
    std::ofstream side(sidecar_path, std::ios::binary);
    if (!side) throw IoError("cannot write " + sidecar_path.string());
    side << j.dump(2) << "\n";
}

} // namespace espada
