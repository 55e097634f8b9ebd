// Copyright 2026 Espada contributors
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <random>

#include "espada/errors.hpp"
#include "espada/transfer.hpp"
#include "support/generators.hpp"

using namespace espada;

namespace {

AlignmentMap identity_map(int T) {
    AlignmentMap m;
    m.map.resize(T);
    for (int i = 0; i < T; ++i) m.map[i] = i;
    return m;
}

FeatureSeries features_of(const Episode& ep) { return build_features(ep); }

} // namespace

TEST_CASE("identity map with W=0 is the identity transfer") {
    std::mt19937 rng(4);
    const Episode ep = testgen::random_episode(rng, 80, 3, 1);
    const FeatureSeries f = features_of(ep);
    Segmentation seg;
    seg.episode_id = ep.id;
    seg.segments = {{0, 39, Label::precision, 0.9}, {40, 79, Label::casual, 0.6}};

    TransferConfig cfg;
    cfg.snap_window = 0;
    const Segmentation out = transfer_labels(seg, identity_map(80), f, f, cfg);
    CHECK(out.segments == seg.segments);
}

TEST_CASE("identity transfer with snapping enabled still recovers itself") {
    std::mt19937 rng(21);
    const std::vector<int> boundaries{50};
    const Episode ep = testgen::regime_episode(rng, 120, boundaries);
    const FeatureSeries f = features_of(ep);
    Segmentation seg;
    seg.episode_id = ep.id;
    seg.segments = {{0, 49, Label::casual, 0.8}, {50, 119, Label::precision, 0.8}};
    const Segmentation out = transfer_labels(seg, identity_map(120), f, f, TransferConfig{});
    REQUIRE(out.segments.size() == 2);
    CHECK(out.segments[0].start == 0);
    CHECK(out.segments[1].end == 119);
    // Snapping moves boundaries only within the summary's resolution.
    CHECK(std::abs(out.segments[1].start - 50) <= 2);
}

TEST_CASE("two-times stretched episode recovers boundaries within W") {
    std::mt19937 rng(33);
    const std::vector<int> boundaries{50};
    const Episode ep0 = testgen::regime_episode(rng, 100, boundaries);
    // Duplicate every frame: target boundary sits at 2x the source index.
    std::vector<int> source_of;
    for (int t = 0; t < 100; ++t) {
        source_of.push_back(t);
        source_of.push_back(t);
    }
    const Episode epk = testgen::warp_episode(rng, ep0, source_of, 0.0, "stretched");

    const FeatureSeries f0 = features_of(ep0);
    const FeatureSeries fk = features_of(epk);
    const AlignmentPath path = banded_dtw(f0.matrix, fk.matrix, 0.08);
    const AlignmentMap map = path_to_map(path, 100, 200);

    Segmentation seg;
    seg.episode_id = "ep0";
    seg.segments = {{0, 49, Label::precision, 1.0}, {50, 99, Label::casual, 1.0}};
    const TransferConfig cfg;
    const Segmentation out = transfer_labels(seg, map, f0, fk, cfg);
    REQUIRE(out.segments.size() == 2);
    CHECK(std::abs(out.segments[0].end - 99) <= cfg.snap_window);
    CHECK(std::abs(out.segments[1].start - 100) <= cfg.snap_window);
    CHECK(std::abs(out.segments[1].end - 199) <= cfg.snap_window);
}

TEST_CASE("overlapping mapped spans are trimmed in order") {
    // Build a map that sends two adjacent segments onto overlapping spans.
    std::mt19937 rng(8);
    const Episode ep = testgen::random_episode(rng, 60, 2, 1);
    const FeatureSeries f = features_of(ep);
    AlignmentMap map = identity_map(60);
    for (int t = 20; t < 31; ++t) map.map[t] = 30; // plateau

    Segmentation seg;
    seg.episode_id = ep.id;
    seg.segments = {{0, 25, Label::precision, 1.0}, {26, 59, Label::casual, 1.0}};
    TransferConfig cfg;
    cfg.snap_window = 0;
    const Segmentation out = transfer_labels(seg, map, f, f, cfg);
    REQUIRE(out.segments.size() == 2);
    CHECK(out.segments[0].end == 30);
    CHECK(out.segments[1].start == 31); // later segment trimmed to former end + 1
    CHECK(out.segments[1].label == Label::casual);
}

TEST_CASE("degenerate mapped segments are dropped, order preserved") {
    std::mt19937 rng(14);
    const Episode ep = testgen::random_episode(rng, 40, 2, 1);
    const FeatureSeries f = features_of(ep);
    AlignmentMap map = identity_map(40);
    for (int t = 10; t < 16; ++t) map.map[t] = 10; // collapse the middle segment

    Segmentation seg;
    seg.episode_id = ep.id;
    seg.segments = {{0, 10, Label::precision, 1.0},
                    {11, 14, Label::casual, 1.0},
                    {15, 39, Label::precision, 1.0}};
    TransferConfig cfg;
    cfg.snap_window = 0;
    int warnings = 0;
    set_warning_handler([&](const std::string&) { ++warnings; });
    const Segmentation out = transfer_labels(seg, map, f, f, cfg);
    set_warning_handler(nullptr);
    REQUIRE(out.segments.size() == 2);
    CHECK(out.segments[0].label == Label::precision);
    CHECK(out.segments[1].label == Label::precision);
    CHECK(warnings == 1);
}

TEST_CASE("label order is a subsequence of the source order") {
    std::mt19937 rng(456);
    for (int trial = 0; trial < 20; ++trial) {
        const Episode ep0 = testgen::random_episode(rng, 90, 3, 1, false, false, "s");
        const std::vector<int> source_of = testgen::monotone_warp(rng, 90);
        const Episode epk = testgen::warp_episode(rng, ep0, source_of, 0.05, "t");
        const FeatureSeries f0 = features_of(ep0);
        const FeatureSeries fk = features_of(epk);
        const AlignmentPath path = banded_dtw(f0.matrix, fk.matrix, 0.08);
        const AlignmentMap map = path_to_map(path, f0.matrix.rows, fk.matrix.rows);
        const Segmentation seg = testgen::random_segmentation(rng, 90, "s", true);
        const Segmentation out = transfer_labels(seg, map, f0, fk, TransferConfig{});

        // Sorted, non-overlapping, in range.
        validate_segmentation(out);
        if (!out.segments.empty()) CHECK(out.segments.back().end <= fk.matrix.rows - 1);

        // Output labels are a subsequence of input labels.
        size_t src = 0;
        for (const Segment& s : out.segments) {
            while (src < seg.segments.size() && seg.segments[src].label != s.label) ++src;
            REQUIRE(src < seg.segments.size());
            ++src;
        }
    }
}

TEST_CASE("snap_boundary") {
    std::mt19937 rng(66);
    const Matrix f = testgen::random_matrix(rng, 50, 4);

    SUBCASE("W=0 returns the index unchanged") {
        const std::vector<double> summary = mean_pool(f, 20, 5);
        CHECK(snap_boundary(17, summary, f, 0, 5) == 17);
    }
    SUBCASE("recovers a +3 shift") {
        // fk = f shifted by +3 frames.
        Matrix shifted(50, 4);
        for (int t = 0; t < 50; ++t)
            for (int c = 0; c < 4; ++c) shifted.at(t, c) = f.at(t >= 3 ? t - 3 : 0, c);
        const std::vector<double> summary = mean_pool(f, 20, 5);
        CHECK(snap_boundary(20, summary, shifted, 12, 5) == 23);
    }
    SUBCASE("all-equal candidates return the nearest, i.e. idx itself") {
        Matrix flat(30, 2); // all zero rows
        const std::vector<double> summary = mean_pool(flat, 10, 5);
        CHECK(snap_boundary(10, summary, flat, 8, 5) == 10);
    }
}

TEST_CASE("expand_to_frames defaults gaps to precision") {
    Segmentation seg;
    seg.episode_id = "ep";
    seg.segments = {{2, 4, Label::casual, 1.0}};
    const std::vector<Label> labels = expand_to_frames(seg, 10);
    const std::vector<Label> expected{Label::precision, Label::precision, Label::casual,
                                      Label::casual,    Label::casual,    Label::precision,
                                      Label::precision, Label::precision, Label::precision,
                                      Label::precision};
    CHECK(labels == expected);

    SUBCASE("full coverage concatenates segment labels") {
        Segmentation full;
        full.segments = {{0, 4, Label::casual, 1.0}, {5, 9, Label::precision, 1.0}};
        const auto l = expand_to_frames(full, 10);
        CHECK(l[0] == Label::casual);
        CHECK(l[4] == Label::casual);
        CHECK(l[5] == Label::precision);
    }
    SUBCASE("empty segmentation is all precision") {
        const auto l = expand_to_frames(Segmentation{"ep", {}}, 5);
        for (Label x : l) CHECK(x == Label::precision);
    }
    SUBCASE("segment past the end is a validation error") {
        Segmentation bad;
        bad.segments = {{0, 12, Label::casual, 1.0}};
        CHECK_THROWS_AS(expand_to_frames(bad, 10), ValidationError);
    }
}

TEST_CASE("synthetic warps: transferred boundaries stay within W") {
    std::mt19937 rng(2026);
    const int T0 = 300;
    const std::vector<int> boundaries{100, 200};
    const Episode ep0 = testgen::regime_episode(rng, T0, boundaries);
    const FeatureSeries f0 = features_of(ep0);
    Segmentation seg0;
    seg0.episode_id = "ep0";
    seg0.segments = {{0, 99, Label::casual, 1.0},
                     {100, 199, Label::precision, 1.0},
                     {200, 299, Label::casual, 1.0}};
    const TransferConfig cfg;

    int total = 0, within = 0;
    for (int trial = 0; trial < 20; ++trial) {
        const auto source_of = testgen::monotone_warp(rng, T0);
        const Episode epk =
            testgen::warp_episode(rng, ep0, source_of, 0.1, "w" + std::to_string(trial));
        const FeatureSeries fk = features_of(epk);
        const AlignmentPath path = banded_dtw(f0.matrix, fk.matrix, cfg.rho);
        const AlignmentMap map = path_to_map(path, f0.matrix.rows, fk.matrix.rows);
        const Segmentation out = transfer_labels(seg0, map, f0, fk, cfg);
        REQUIRE(out.segments.size() == 3);
        for (int b : boundaries) {
            const int truth = testgen::warped_boundary(source_of, b);
            const int got = b == 100 ? out.segments[1].start : out.segments[2].start;
            ++total;
            if (std::abs(got - truth) <= cfg.snap_window) ++within;
        }
    }
    // Statistical acceptance: >= 95% of boundaries within W.
    CHECK(within >= static_cast<int>(0.95 * total));
}

TEST_CASE("config validation warns outside the recommended rho range") {
    int warnings = 0;
    set_warning_handler([&](const std::string&) { ++warnings; });
    TransferConfig cfg;
    cfg.rho = 0.5;
    validate(cfg);
    set_warning_handler(nullptr);
    CHECK(warnings == 1);
    cfg.snap_window = -1;
    CHECK_THROWS_AS(validate(cfg), ValidationError);
}
