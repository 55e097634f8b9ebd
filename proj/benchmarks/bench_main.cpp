// Copyright 2026 Espada contributors
// SPDX-License-Identifier: Apache-2.0
//
// Compares the OpenMP batch kernels against their serial reference runs
// (jobs=1) and banded DTW against the full-matrix reference DP.
// Usage: espada_bench [episodes] [frames]

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <random>
#include <vector>

#include "espada/dtw.hpp"
#include "espada/features.hpp"
#include "espada/parallel.hpp"
#include "support/generators.hpp"
#include "support/oracles.hpp"

using namespace espada;

namespace {

double seconds_since(const std::chrono::steady_clock::time_point& t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

template <class F>
double timed(F&& fn) {
    const auto t0 = std::chrono::steady_clock::now();
    fn();
    return seconds_since(t0);
}

} // namespace

int main(int argc, char** argv) {
    const int episodes = argc > 1 ? std::atoi(argv[1]) : 12;
    const int frames = argc > 2 ? std::atoi(argv[2]) : 1200;
    std::printf("corpus: %d episodes x %d frames, %d hardware threads\n", episodes, frames,
                effective_jobs(0));

    std::mt19937 rng(42);
    std::vector<Episode> corpus;
    for (int i = 0; i < episodes; ++i)
        corpus.push_back(testgen::random_episode(rng, frames, 6, 2, true, false,
                                                 "bench" + std::to_string(i)));

    // Feature building: serial reference vs OpenMP.
    std::vector<FeatureSeries> serial_features, parallel_features;
    const double t_feat_serial =
        timed([&] { serial_features = build_features_all(corpus, 1); });
    const double t_feat_parallel =
        timed([&] { parallel_features = build_features_all(corpus, 0); });
    bool features_match = true;
    for (size_t i = 0; i < serial_features.size(); ++i)
        features_match =
            features_match && serial_features[i].matrix == parallel_features[i].matrix;
    std::printf("features   serial %.3fs  parallel %.3fs  speedup %.2fx  match=%s\n",
                t_feat_serial, t_feat_parallel, t_feat_serial / t_feat_parallel,
                features_match ? "yes" : "NO");

    // Pairwise alignment episode0 -> rest: serial vs OpenMP.
    const std::vector<FeatureSeries> targets(serial_features.begin() + 1,
                                             serial_features.end());
    std::vector<AlignmentMap> serial_maps, parallel_maps;
    const double t_align_serial =
        timed([&] { serial_maps = align_all(serial_features[0], targets, 0.08, 1); });
    const double t_align_parallel =
        timed([&] { parallel_maps = align_all(serial_features[0], targets, 0.08, 0); });
    bool maps_match = true;
    for (size_t i = 0; i < serial_maps.size(); ++i)
        maps_match = maps_match && serial_maps[i].map == parallel_maps[i].map;
    std::printf("alignment  serial %.3fs  parallel %.3fs  speedup %.2fx  match=%s\n",
                t_align_serial, t_align_parallel, t_align_serial / t_align_parallel,
                maps_match ? "yes" : "NO");

    // Banded DP vs the full-matrix reference on one pair.
    const int small = std::min(frames, 600); // the full DP is quadratic
    const Matrix a = testgen::random_matrix(rng, small, 8);
    const Matrix b = testgen::random_matrix(rng, small, 8);
    double banded_cost = 0.0, full_cost = 0.0;
    const double t_banded = timed([&] { banded_cost = banded_dtw(a, b, 0.08).cost; });
    const double t_full = timed([&] { full_cost = reference::full_dtw_cost(a, b); });
    std::printf("dtw %dx%d  banded(rho=0.08) %.3fs cost %.3f | full reference %.3fs cost %.3f\n",
                small, small, t_banded, banded_cost, t_full, full_cost);

    // Near-linear scaling of the banded DP at fixed half-width.
    const Matrix x1 = testgen::random_matrix(rng, 2000, 8);
    const Matrix y1 = testgen::random_matrix(rng, 2000, 8);
    const Matrix x2 = testgen::random_matrix(rng, 4000, 8);
    const Matrix y2 = testgen::random_matrix(rng, 4000, 8);
    const double t_2k = timed([&] { (void)banded_dtw_fixed_band(x1, y1, 64); });
    const double t_4k = timed([&] { (void)banded_dtw_fixed_band(x2, y2, 64); });
    std::printf("banded b=64  T=2000 %.3fs  T=4000 %.3fs  ratio %.2f (2.0 = linear)\n", t_2k,
                t_4k, t_4k / t_2k);

    return features_match && maps_match ? 0 : 1;
}
