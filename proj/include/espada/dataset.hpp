// Copyright 2026 Espada contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace espada {

struct CameraIntrinsics {
    double fx = 0.0;
    double fy = 0.0;
    double cx = 0.0;
    double cy = 0.0;
    double z_scale = 1.0;

    bool operator==(const CameraIntrinsics&) const = default;
};

/// One tracked point: pixel coordinates plus depth (meters or relative units).
struct TrackPoint {
    double u = 0.0;
    double v = 0.0;
    double depth = 0.0;

    bool operator==(const TrackPoint&) const = default;
};

// object label -> camera id -> tracked point
using TrackMap = std::map<std::string, std::map<std::string, TrackPoint>>;

struct Frame {
    int index = 0;
    std::vector<double> action;
    std::vector<double> joint_pos;
    std::optional<std::vector<double>> joint_vel;
    std::vector<double> gripper;
    std::optional<std::vector<double>> ee_pos;
    std::optional<TrackMap> tracks;
    // Provenance: original frame index, set on frames of replica episodes.
    std::optional<int> source_index;

    bool operator==(const Frame&) const = default;
};

struct Episode {
    std::string id;
    double control_hz = 0.0;
    std::map<std::string, CameraIntrinsics> cameras;
    std::vector<Frame> frames;

    int length() const { return static_cast<int>(frames.size()); }

    bool operator==(const Episode&) const = default;
};

enum class Label { precision, casual };

const char* to_string(Label label);
Label label_from_string(const std::string& name);

/// Inclusive frame range [start, end] with a label and a confidence in [0,1].
struct Segment {
    int start = 0;
    int end = 0;
    Label label = Label::precision;
    double confidence = 1.0;

    int length() const { return end - start + 1; }

    bool operator==(const Segment&) const = default;
};

struct Segmentation {
    std::string episode_id;
    std::vector<Segment> segments;

    bool operator==(const Segmentation&) const = default;
};

// Throw ValidationError on any invariant violation.
void validate_episode(const Episode& ep);
void validate_segmentation(const Segmentation& seg);

// Episode files: one header line {"id","control_hz","cameras"} followed by
// one frame record per line. Optional fields are omitted, never null.
Episode read_episode(const std::filesystem::path& path);
void write_episode(const Episode& ep, const std::filesystem::path& path);

Segmentation read_segmentation(const std::filesystem::path& path);
void write_segmentation(const Segmentation& seg, const std::filesystem::path& path);

} // namespace espada
