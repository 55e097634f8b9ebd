// Copyright 2026 Espada contributors
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <random>
#include <set>

#include "espada/downsample.hpp"
#include "espada/errors.hpp"
#include "support/generators.hpp"

using namespace espada;

namespace {

Episode constant_velocity_episode(int T, double step = 1.0) {
    Episode ep;
    ep.id = "cv";
    ep.control_hz = 50.0;
    for (int t = 0; t < T; ++t) {
        Frame f;
        f.index = t;
        f.action = {0.0};
        f.joint_pos = {t * step, 0.0}; // exact integers: displacement sums stay exact
        f.gripper = {0.5};
        ep.frames.push_back(std::move(f));
    }
    return ep;
}

Segmentation single_label(const std::string& id, int T, Label label) {
    Segmentation seg;
    seg.episode_id = id;
    seg.segments = {{0, T - 1, label, 1.0}};
    return seg;
}

} // namespace

TEST_CASE("rbd_segment offsets partition the segment") {
    CHECK(rbd_segment(0, 5, 2, 0) == std::vector<int>{0, 2, 4});
    CHECK(rbd_segment(0, 5, 2, 1) == std::vector<int>{1, 3, 5});
    CHECK(rbd_segment(3, 9, 1, 0) == std::vector<int>{3, 4, 5, 6, 7, 8, 9});
    CHECK(rbd_segment(10, 10, 4, 0) == std::vector<int>{10});
    CHECK(rbd_segment(10, 10, 4, 1).empty());
    CHECK(rbd_segment(10, 10, 4, 3).empty());
    CHECK_THROWS_AS(rbd_segment(0, 5, 2, 2), DomainError);
    CHECK_THROWS_AS(rbd_segment(5, 0, 2, 0), DomainError);
}

TEST_CASE("all-casual episode under plan(2,4) gives 4 replicas of length 4") {
    std::mt19937 rng(1);
    const Episode ep = testgen::random_episode(rng, 16, 2, 1);
    const Segmentation seg = single_label(ep.id, 16, Label::casual);
    AccelPlan plan;
    plan.n_precision = 2;
    plan.n_casual = 4;
    const auto replicas = compile_episode(ep, seg, plan);
    REQUIRE(replicas.size() == 4);
    std::set<int> support;
    for (const auto& rep : replicas) {
        CHECK(rep.episode.length() == 4);
        support.insert(rep.source_indices.begin(), rep.source_indices.end());
    }
    CHECK(support.size() == 16);
}

TEST_CASE("all-precision episode duplicates offsets beyond N_p") {
    std::mt19937 rng(2);
    const Episode ep = testgen::random_episode(rng, 20, 2, 1);
    const Segmentation seg = single_label(ep.id, 20, Label::precision);
    AccelPlan plan; // defaults 2 / 4
    const auto replicas = compile_episode(ep, seg, plan);
    REQUIRE(replicas.size() == 4);
    CHECK(replicas[0].segment_offsets == std::vector<int>{0});
    CHECK(replicas[1].segment_offsets == std::vector<int>{1});
    CHECK(replicas[2].segment_offsets == std::vector<int>{0}); // 2 mod 2
    CHECK(replicas[3].segment_offsets == std::vector<int>{1}); // 3 mod 2
    CHECK(replicas[0].source_indices == replicas[2].source_indices);
    std::set<int> support;
    for (const auto& rep : replicas)
        support.insert(rep.source_indices.begin(), rep.source_indices.end());
    CHECK(support.size() == 20);
}

TEST_CASE("plan(1,1) reproduces the source episode") {
    std::mt19937 rng(3);
    const Episode ep = testgen::random_episode(rng, 25, 2, 1);
    Segmentation seg;
    seg.episode_id = ep.id;
    seg.segments = {{0, 12, Label::precision, 1.0}, {13, 24, Label::casual, 1.0}};
    AccelPlan plan;
    plan.n_precision = 1;
    plan.n_casual = 1;
    const auto replicas = compile_episode(ep, seg, plan);
    REQUIRE(replicas.size() == 1);
    CHECK(replicas[0].episode.length() == 25);
    for (int t = 0; t < 25; ++t) {
        CHECK(replicas[0].source_indices[t] == t);
        CHECK(replicas[0].episode.frames[t].action == ep.frames[t].action);
        CHECK(*replicas[0].episode.frames[t].source_index == t);
    }
}

TEST_CASE("uncovered frames are rejected") {
    std::mt19937 rng(4);
    const Episode ep = testgen::random_episode(rng, 30, 2, 1);
    Segmentation seg;
    seg.episode_id = ep.id;
    seg.segments = {{0, 9, Label::precision, 1.0}, {15, 29, Label::casual, 1.0}};
    CHECK_THROWS_WITH_AS(compile_episode(ep, seg, AccelPlan{}),
                         doctest::Contains("coverage completion"), ValidationError);
}

TEST_CASE("support recovery holds for random segmentations and plans") {
    std::mt19937 rng(505);
    for (int trial = 0; trial < 50; ++trial) {
        std::uniform_int_distribution<int> t_dist(5, 120);
        const int T = t_dist(rng);
        const Episode ep = testgen::random_episode(rng, T, 2, 1);
        Segmentation seg = testgen::random_segmentation(rng, T, ep.id, true);
        AccelPlan plan;
        plan.n_precision = (trial % 2) + 1;           // {1, 2}
        plan.n_casual = 2 * ((trial % 2) + 1);        // {2, 4}
        const auto replicas = compile_episode(ep, seg, plan);
        CHECK(replicas.size() == static_cast<size_t>(plan.replica_count()));

        std::set<int> support;
        for (const auto& rep : replicas) {
            // Provenance strictly increasing within each replica.
            for (size_t i = 1; i < rep.source_indices.size(); ++i)
                CHECK(rep.source_indices[i] > rep.source_indices[i - 1]);
            support.insert(rep.source_indices.begin(), rep.source_indices.end());
        }
        CHECK(static_cast<int>(support.size()) == T);

        // Each segment contributes exactly its length per N_y-group cycle.
        for (const Segment& s : seg.segments) {
            const int n = plan.factor_for(s.label);
            int counted = 0;
            for (int r = 0; r < n; ++r) {
                for (int idx : replicas[r].source_indices)
                    if (idx >= s.start && idx <= s.end) ++counted;
            }
            CHECK(counted == s.length());
        }
    }
}

TEST_CASE("replica length matches the per-segment ceiling formula") {
    std::mt19937 rng(606);
    for (int trial = 0; trial < 30; ++trial) {
        const int T = 100;
        const Episode ep = testgen::random_episode(rng, T, 2, 1);
        const Segmentation seg = testgen::random_segmentation(rng, T, ep.id, true);
        AccelPlan plan;
        const auto replicas = compile_episode(ep, seg, plan);
        for (const auto& rep : replicas) {
            long expected = 0;
            for (size_t i = 0; i < seg.segments.size(); ++i) {
                const Segment& s = seg.segments[i];
                const int n = plan.factor_for(s.label);
                const int m = rep.segment_offsets[i];
                const int len = s.length();
                expected += len > m ? (len - m + n - 1) / n : 0;
            }
            CHECK(rep.episode.length() == expected);
        }
    }
}

TEST_CASE("mean replica length stays within one frame per segment of len_i/N_i") {
    std::mt19937 rng(707);
    for (int trial = 0; trial < 20; ++trial) {
        const int T = 200;
        const Episode ep = testgen::random_episode(rng, T, 2, 1);
        const Segmentation seg = testgen::random_segmentation(rng, T, ep.id, true);
        AccelPlan plan;
        const auto replicas = compile_episode(ep, seg, plan);
        double mean_len = 0.0;
        for (const auto& rep : replicas) mean_len += rep.episode.length();
        mean_len /= replicas.size();
        double predicted = 0.0;
        for (const Segment& s : seg.segments)
            predicted += static_cast<double>(s.length()) / plan.factor_for(s.label);
        CHECK(std::abs(mean_len - predicted) <= static_cast<double>(seg.segments.size()));
    }
}

TEST_CASE("half mode rescales the horizon to ceil(K/2)") {
    const Episode ep = constant_velocity_episode(50);
    const std::vector<int> retained{0, 2, 4, 6, 8, 10};
    CHECK(rescale_horizon(ep, 100, retained, HorizonMode::half) == 50);
    CHECK(rescale_horizon(ep, 7, retained, HorizonMode::half) == 4);
    CHECK(rescale_horizon(ep, 1, retained, HorizonMode::half) == 1);
}

TEST_CASE("geometric mode on uniform constant-velocity downsampling") {
    const Episode ep = constant_velocity_episode(200);

    SUBCASE("N=2, K=10 gives 5") {
        std::vector<int> retained;
        for (int t = 0; t < 200; t += 2) retained.push_back(t);
        CHECK(rescale_horizon(ep, 10, retained, HorizonMode::geometric) == 5);
    }
    SUBCASE("N=4 gives ceil(K/4)") {
        std::vector<int> retained;
        for (int t = 0; t < 200; t += 4) retained.push_back(t);
        CHECK(rescale_horizon(ep, 10, retained, HorizonMode::geometric) == 3);
        CHECK(rescale_horizon(ep, 8, retained, HorizonMode::geometric) == 2);
    }
    SUBCASE("all frames retained gives K back") {
        std::vector<int> retained;
        for (int t = 0; t < 200; ++t) retained.push_back(t);
        CHECK(rescale_horizon(ep, 10, retained, HorizonMode::geometric) == 10);
    }
    SUBCASE("empty retained list is a domain error") {
        CHECK_THROWS_AS(rescale_horizon(ep, 10, std::vector<int>{}, HorizonMode::geometric),
                        DomainError);
    }
}

TEST_CASE("geometric mode honors ee_pos when present") {
    // Joint positions stand still; ee_pos moves. The proxy must follow ee_pos.
    Episode ep;
    ep.id = "ee";
    ep.control_hz = 50.0;
    for (int t = 0; t < 100; ++t) {
        Frame f;
        f.index = t;
        f.action = {0.0};
        f.joint_pos = {0.0};
        f.ee_pos = std::vector<double>{static_cast<double>(t), 0.0, 0.0};
        f.gripper = {0.5};
        ep.frames.push_back(std::move(f));
    }
    std::vector<int> retained;
    for (int t = 0; t < 100; t += 2) retained.push_back(t);
    CHECK(rescale_horizon(ep, 10, retained, HorizonMode::geometric) == 5);
}

TEST_CASE("compile_dataset parallel equals serial") {
    std::mt19937 rng(808);
    std::vector<Episode> eps;
    std::vector<Segmentation> segs;
    for (int i = 0; i < 6; ++i) {
        eps.push_back(testgen::random_episode(rng, 60, 2, 1, false, false,
                                              "d" + std::to_string(i)));
        segs.push_back(testgen::random_segmentation(rng, 60, eps.back().id, true));
    }
    const auto serial = compile_dataset(eps, segs, AccelPlan{}, 1);
    const auto parallel = compile_dataset(eps, segs, AccelPlan{}, 0);
    REQUIRE(serial.size() == parallel.size());
    for (size_t i = 0; i < serial.size(); ++i) {
        REQUIRE(serial[i].size() == parallel[i].size());
        for (size_t r = 0; r < serial[i].size(); ++r) {
            CHECK(serial[i][r].source_indices == parallel[i][r].source_indices);
            CHECK(serial[i][r].episode == parallel[i][r].episode);
        }
    }
}

TEST_CASE("plan validation") {
    AccelPlan plan;
    plan.n_precision = 0;
    CHECK_THROWS_AS(validate(plan), ValidationError);
    plan.n_precision = 4;
    plan.n_casual = 2;
    CHECK_THROWS_AS(validate(plan), ValidationError);
    CHECK(horizon_mode_from_string("half") == HorizonMode::half);
    CHECK(horizon_mode_from_string("geometric") == HorizonMode::geometric);
    CHECK_THROWS_AS(horizon_mode_from_string("auto"), ValidationError);
}
