// Copyright 2026 Espada contributors
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <random>

#include "espada/errors.hpp"
#include "espada/segmentation.hpp"
#include "espada/transfer.hpp"
#include "support/generators.hpp"
#include "support/oracles.hpp"

using namespace espada;

namespace {

std::vector<Label> labels(const std::string& pattern) {
    std::vector<Label> out;
    for (char c : pattern) out.push_back(c == 'p' ? Label::precision : Label::casual);
    return out;
}

std::vector<Label> runs(std::initializer_list<std::pair<char, int>> parts) {
    std::vector<Label> out;
    for (const auto& [c, n] : parts)
        out.insert(out.end(), n, c == 'p' ? Label::precision : Label::casual);
    return out;
}

} // namespace

TEST_CASE("all-precision input collapses to a single segment") {
    const Segmentation seg = apply_stability(runs({{'p', 30}}), StabilityConfig{}, "ep");
    REQUIRE(seg.segments.size() == 1);
    CHECK(seg.segments[0].start == 0);
    CHECK(seg.segments[0].end == 29);
    CHECK(seg.segments[0].label == Label::precision);
}

TEST_CASE("a 2-frame blip inside precision is absorbed") {
    const Segmentation seg =
        apply_stability(runs({{'p', 20}, {'c', 2}, {'p', 20}}), StabilityConfig{}, "ep");
    REQUIRE(seg.segments.size() == 1);
    CHECK(seg.segments[0].label == Label::precision);
    CHECK(seg.segments[0].end == 41);
}

TEST_CASE("a 3-frame gap between casual runs merges them") {
    const Segmentation seg =
        apply_stability(runs({{'p', 10}, {'c', 10}, {'p', 3}, {'c', 10}}), StabilityConfig{},
                        "ep");
    REQUIRE(seg.segments.size() == 2);
    CHECK(seg.segments[0] == Segment{0, 9, Label::precision, 1.0});
    CHECK(seg.segments[1] == Segment{10, 32, Label::casual, 1.0});
}

TEST_CASE("hysteresis requires persistence to switch") {
    StabilityConfig cfg;
    cfg.micro_len = 0;
    cfg.merge_gap = 0;
    cfg.min_segment_len = 0;
    cfg.hysteresis = 3;
    // Two-frame casual burst reverts; three-frame burst switches.
    const Segmentation r1 = apply_stability(labels("ppppccppppp"), cfg, "ep");
    REQUIRE(r1.segments.size() == 1);
    CHECK(r1.segments[0].label == Label::precision);

    const Segmentation r2 = apply_stability(labels("ppppcccpppp"), cfg, "ep");
    REQUIRE(r2.segments.size() == 3);
    CHECK(r2.segments[1].label == Label::casual);
    CHECK(r2.segments[1].length() == 3);
}

TEST_CASE("short runs are absorbed into the longer neighbor, tie to earlier") {
    StabilityConfig cfg;
    cfg.hysteresis = 0;
    cfg.micro_len = 0;
    cfg.merge_gap = 0;
    cfg.min_segment_len = 8;
    // 5-frame casual run flanked by precision 12 and precision 9.
    const Segmentation seg = apply_stability(runs({{'p', 12}, {'c', 5}, {'p', 9}}), cfg, "ep");
    REQUIRE(seg.segments.size() == 1);
    CHECK(seg.segments[0].label == Label::precision);

    // Short run at the very start is absorbed rightward.
    const Segmentation lead = apply_stability(runs({{'c', 4}, {'p', 20}}), cfg, "ep");
    REQUIRE(lead.segments.size() == 1);
    CHECK(lead.segments[0].label == Label::precision);
}

TEST_CASE("whole-episode shorter than L_min survives as one segment") {
    const Segmentation seg = apply_stability(runs({{'c', 5}}), StabilityConfig{}, "ep");
    REQUIRE(seg.segments.size() == 1);
    CHECK(seg.segments[0].label == Label::casual);
    CHECK(seg.segments[0].length() == 5);
}

TEST_CASE("apply_stability output is full-coverage, alternating, min-length") {
    std::mt19937 rng(404);
    std::bernoulli_distribution coin(0.5);
    const StabilityConfig cfg;
    for (int trial = 0; trial < 100; ++trial) {
        std::uniform_int_distribution<int> len_dist(1, 120);
        const int T = len_dist(rng);
        std::vector<Label> l;
        for (int t = 0; t < T; ++t) l.push_back(coin(rng) ? Label::casual : Label::precision);
        const Segmentation seg = apply_stability(l, cfg, "ep");
        validate_segmentation(seg);
        REQUIRE(!seg.segments.empty());
        CHECK(seg.segments.front().start == 0);
        CHECK(seg.segments.back().end == T - 1);
        for (size_t i = 0; i < seg.segments.size(); ++i) {
            CHECK(seg.segments[i].length() >= std::min(cfg.min_segment_len, T));
            if (i > 0) {
                CHECK(seg.segments[i].start == seg.segments[i - 1].end + 1);
                CHECK(seg.segments[i].label != seg.segments[i - 1].label);
            }
        }
    }
}

TEST_CASE("apply_stability is idempotent") {
    std::mt19937 rng(777);
    std::bernoulli_distribution coin(0.4);
    const StabilityConfig cfg;
    for (int trial = 0; trial < 200; ++trial) {
        std::uniform_int_distribution<int> len_dist(1, 150);
        const int T = len_dist(rng);
        std::vector<Label> l;
        for (int t = 0; t < T; ++t) l.push_back(coin(rng) ? Label::casual : Label::precision);
        const Segmentation once = apply_stability(l, cfg, "ep");
        const Segmentation twice = apply_stability(expand_to_frames(once, T), cfg, "ep");
        CHECK(once.segments == twice.segments);
    }
}

TEST_CASE("coverage completion leaves gap-free segmentations unchanged") {
    RelationSeries r{"g", "o", "auto", {}};
    r.values.assign(40, std::nullopt);
    Segmentation seg;
    seg.episode_id = "ep";
    seg.segments = {{0, 19, Label::precision, 0.9}, {20, 39, Label::casual, 0.8}};
    const Segmentation out = coverage_completion(seg, r, 40, StabilityConfig{});
    CHECK(out.segments.size() == 2);
    CHECK(out.segments[0].label == Label::precision);
    CHECK(out.segments[0].end == 19);
    CHECK(out.segments[1].end == 39);
}

TEST_CASE("rising gap trend extends the rising casual neighbor despite confidence") {
    // Left: precision, conf 0.9, flat r. Right: casual, conf 0.6, rising r.
    // The gap has rising r, so the casual neighbor extends over it.
    RelationSeries r{"g", "o", "auto", {}};
    const int T = 60;
    for (int t = 0; t < T; ++t) {
        if (t < 20)
            r.values.push_back(1.0); // flat
        else
            r.values.push_back(1.0 + 0.05 * (t - 20)); // rising through gap and right segment
    }
    Segmentation seg;
    seg.episode_id = "ep";
    seg.segments = {{0, 19, Label::precision, 0.9}, {32, 59, Label::casual, 0.6}};
    const Segmentation out = coverage_completion(seg, r, T, StabilityConfig{});
    REQUIRE(out.segments.size() == 2);
    CHECK(out.segments[0].label == Label::precision);
    CHECK(out.segments[0].end == 19);
    CHECK(out.segments[1].start == 20); // casual extended left over the gap
    CHECK(out.segments[1].label == Label::casual);
}

TEST_CASE("without r data the higher-confidence neighbor extends") {
    RelationSeries r{"g", "o", "auto", {}};
    r.values.assign(50, std::nullopt);
    Segmentation seg;
    seg.episode_id = "ep";
    seg.segments = {{0, 14, Label::precision, 0.8}, {35, 49, Label::casual, 0.5}};
    const Segmentation out = coverage_completion(seg, r, 50, StabilityConfig{});
    REQUIRE(out.segments.size() == 2);
    CHECK(out.segments[0].end == 34); // 0.8 neighbor took the gap
    CHECK(out.segments[1].start == 35);
}

TEST_CASE("coverage completion always yields exact full coverage") {
    std::mt19937 rng(31);
    for (int trial = 0; trial < 50; ++trial) {
        const int T = 80;
        const Segmentation seg = testgen::random_segmentation(rng, T, "ep", false);
        RelationSeries r{"g", "o", "auto", {}};
        std::uniform_real_distribution<double> val(0.5, 2.0);
        for (int t = 0; t < T; ++t) {
            if (t % 7 == 3)
                r.values.push_back(std::nullopt);
            else
                r.values.push_back(val(rng));
        }
        const Segmentation out = coverage_completion(seg, r, T, StabilityConfig{});
        validate_segmentation(out);
        REQUIRE(!out.segments.empty());
        CHECK(out.segments.front().start == 0);
        CHECK(out.segments.back().end == T - 1);
        int covered = 0;
        for (const Segment& s : out.segments) covered += s.length();
        CHECK(covered == T);
    }
}

TEST_CASE("gripper event detection") {
    std::mt19937 rng(12);
    Episode ep = testgen::random_episode(rng, 30, 2, 1);
    for (auto& f : ep.frames) f.gripper[0] = 0.4;

    SUBCASE("constant gripper produces no events") {
        CHECK(detect_gripper_events(ep, GripperForceConfig{}).empty());
    }
    SUBCASE("threshold crossing marks the frame") {
        for (int t = 4; t < 30; ++t) ep.frames[t].gripper[0] = 0.45; // |0.45-0.4| = 0.05
        const auto events = detect_gripper_events(ep, GripperForceConfig{});
        REQUIRE(!events.empty());
        CHECK(events.front() == 0);
        CHECK(events.back() == 3); // frames 0..3 see the step within 4 frames
    }
    SUBCASE("any channel triggers") {
        Episode two = testgen::random_episode(rng, 30, 2, 2);
        for (auto& f : two.frames) {
            f.gripper[0] = 0.5;
            f.gripper[1] = 0.5;
        }
        for (int t = 10; t < 30; ++t) two.frames[t].gripper[1] = 1.0; // right channel only
        const auto events = detect_gripper_events(two, GripperForceConfig{});
        CHECK(!events.empty());
        for (int e : events) {
            CHECK(e >= 6);
            CHECK(e <= 9);
        }
    }
}

TEST_CASE("dbscan_1d clusters dense runs and drops isolated points") {
    const std::vector<int> points{10, 11, 12, 50, 51};
    const auto clusters = dbscan_1d(points, 3, 2);
    REQUIRE(clusters.size() == 2);
    CHECK(clusters[0] == std::vector<int>{10, 11, 12});
    CHECK(clusters[1] == std::vector<int>{50, 51});

    CHECK(dbscan_1d(std::vector<int>{}, 3, 2).empty());
    CHECK(dbscan_1d(std::vector<int>{42}, 3, 2).empty()); // noise
}

TEST_CASE("dbscan_1d agrees with the brute-force oracle") {
    std::mt19937 rng(55);
    for (int trial = 0; trial < 40; ++trial) {
        std::uniform_int_distribution<int> n_dist(0, 200);
        std::uniform_int_distribution<int> v_dist(0, 500);
        std::uniform_int_distribution<int> eps_dist(1, 12);
        std::uniform_int_distribution<int> pts_dist(1, 5);
        const int n = n_dist(rng);
        std::vector<int> points;
        for (int i = 0; i < n; ++i) points.push_back(v_dist(rng));
        std::sort(points.begin(), points.end());
        const int eps = eps_dist(rng);
        const int min_pts = pts_dist(rng);
        CHECK(dbscan_1d(points, eps, min_pts) ==
              reference::dbscan_1d_bruteforce(points, eps, min_pts));
    }
}

TEST_CASE("force_gripper_precision overrides padded windows") {
    Segmentation seg;
    seg.episode_id = "ep";
    const int T = 200;
    seg.segments = {{0, T - 1, Label::casual, 0.75}};
    const std::vector<std::vector<int>> clusters{{100, 101, 102, 103, 104}};
    const Segmentation out = force_gripper_precision(seg, clusters, 2, T);
    REQUIRE(out.segments.size() == 3);
    CHECK(out.segments[0] == Segment{0, 97, Label::casual, 0.75});
    CHECK(out.segments[1].start == 98);
    CHECK(out.segments[1].end == 106);
    CHECK(out.segments[1].label == Label::precision);
    CHECK(out.segments[2] == Segment{107, T - 1, Label::casual, 0.75});
}

TEST_CASE("forcing inside an existing precision segment changes nothing") {
    Segmentation seg;
    seg.episode_id = "ep";
    seg.segments = {{0, 49, Label::precision, 1.0}, {50, 99, Label::casual, 1.0}};
    const Segmentation out = force_gripper_precision(seg, {{10, 11, 12}}, 2, 100);
    CHECK(out.segments == seg.segments);
}

TEST_CASE("force windows clip at the episode bounds") {
    Segmentation seg;
    seg.episode_id = "ep";
    seg.segments = {{0, 99, Label::casual, 1.0}};
    const Segmentation out = force_gripper_precision(seg, {{97, 98, 99}}, 2, 100);
    REQUIRE(out.segments.size() == 2);
    CHECK(out.segments[1].start == 95);
    CHECK(out.segments[1].end == 99);
}

TEST_CASE("forcing is monotone toward precision") {
    std::mt19937 rng(91);
    for (int trial = 0; trial < 30; ++trial) {
        const int T = 120;
        Segmentation seg = testgen::random_segmentation(rng, T, "ep", true);
        std::uniform_int_distribution<int> pos(0, T - 6);
        const int at = pos(rng);
        const std::vector<std::vector<int>> clusters{{at, at + 2, at + 5}};
        const Segmentation out = force_gripper_precision(seg, clusters, 2, T);
        const auto before = expand_to_frames(seg, T);
        const auto after = expand_to_frames(out, T);
        for (int t = 0; t < T; ++t)
            if (before[t] == Label::precision) CHECK(after[t] == Label::precision);
    }
}

TEST_CASE("end-to-end gripper forcing marks every padded event window precision") {
    std::mt19937 rng(7031);
    for (int trial = 0; trial < 20; ++trial) {
        Episode ep = testgen::random_episode(rng, 300, 3, 1);
        for (auto& f : ep.frames) f.gripper[0] = 0.0;
        std::uniform_int_distribution<int> pos(20, 260);
        const std::vector<int> events{pos(rng)};
        testgen::plant_gripper_toggles(ep, events);

        Segmentation casual;
        casual.episode_id = ep.id;
        casual.segments = {{0, 299, Label::casual, 1.0}};
        const GripperForceConfig cfg;
        const Segmentation out = apply_gripper_forcing(ep, casual, cfg);
        const auto detected = detect_gripper_events(ep, cfg);
        const auto clusters = dbscan_1d(detected, cfg.dbscan_eps, cfg.dbscan_min_pts);
        const auto labels_out = expand_to_frames(out, 300);
        for (const auto& cluster : clusters) {
            for (int t = std::max(0, cluster.front() - cfg.pad);
                 t <= std::min(299, cluster.back() + cfg.pad); ++t)
                CHECK(labels_out[t] == Label::precision);
        }
    }
}

TEST_CASE("config validation enforces the documented ranges") {
    StabilityConfig stability;
    stability.merge_gap = -1;
    CHECK_THROWS_AS(validate(stability), ValidationError);
    GripperForceConfig gripper;
    gripper.lookahead = 0;
    CHECK_THROWS_AS(validate(gripper), ValidationError);
    gripper = GripperForceConfig{};
    gripper.threshold = 0.0;
    CHECK_THROWS_AS(validate(gripper), ValidationError);
    gripper = GripperForceConfig{};
    gripper.dbscan_min_pts = 0;
    CHECK_THROWS_AS(validate(gripper), ValidationError);
    CHECK_NOTHROW(validate(StabilityConfig{}));
    CHECK_NOTHROW(validate(GripperForceConfig{}));
}

TEST_CASE("trend_slope and trend_sign") {
    RelationSeries r{"g", "o", "auto", {}};
    for (int t = 0; t < 10; ++t) r.values.push_back(0.5 + 0.1 * t);
    CHECK(trend_slope(r, 0, 9) == doctest::Approx(0.1));
    CHECK(trend_sign(trend_slope(r, 0, 9)) == 1);
    CHECK(trend_sign(-0.2) == -1);
    CHECK(trend_sign(1e-6) == 0); // dead-band
    CHECK(trend_sign(std::numeric_limits<double>::quiet_NaN()) == 0);

    RelationSeries sparse{"g", "o", "auto", {}};
    sparse.values = {std::nullopt, 1.0, std::nullopt};
    CHECK(std::isnan(trend_slope(sparse, 0, 2)));
}
