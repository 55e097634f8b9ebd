// Copyright 2026 Espada contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "espada/dataset.hpp"

namespace espada {

struct Point3 {
    double x = 0.0;
    double y = 0.0;
    double z = 0.0;

    bool operator==(const Point3&) const = default;
};

struct Pixel {
    double u = 0.0;
    double v = 0.0;
    double depth = 0.0;
};

/// Frame-wise gripper-object distance series for one camera. Absent entries
/// mark frames where at least one of the two tracks is missing.
struct RelationSeries {
    std::string gripper_label;
    std::string object_label;
    std::string camera_id;
    std::vector<std::optional<double>> values;

    int count_present() const;
};

/// Pinhole back-projection: p = Z * K^-1 * [u, v, 1]^T with Z = depth * z_scale.
Point3 back_project(double u, double v, double depth, const CameraIntrinsics& intr);

/// Forward pinhole projection, inverse of back_project for z > 0.
Pixel project(const Point3& p, const CameraIntrinsics& intr);

/// Track labels naming a gripper (substring "gripper", case-insensitive).
bool is_gripper_label(std::string_view label);

std::vector<std::string> gripper_labels(const Episode& ep);
std::vector<std::string> object_labels(const Episode& ep);

/// Distance series r_t for a fixed camera. Throws LookupError when either
/// label never appears for that camera.
RelationSeries relation_series(const Episode& ep, const std::string& gripper_label,
                               const std::string& object_label, const std::string& camera_id);

/// Camera used at one frame: the head camera when it has at least one valid
/// gripper-object relation there, otherwise the camera with the most valid
/// relations (ties broken lexicographically). Empty when no camera has any.
std::optional<std::string> select_camera(const Episode& ep, int frame,
                                         const std::string& head_camera = "head");

/// Distance series using the per-frame camera choice of select_camera.
/// camera_id of the result is "auto".
RelationSeries relation_series_auto(const Episode& ep, const std::string& gripper_label,
                                    const std::string& object_label,
                                    const std::string& head_camera = "head");

/// Opt-in linear interpolation across gaps of at most max_gap missing frames.
RelationSeries interpolate_gaps(RelationSeries series, int max_gap = 10);

/// The gripper-object pair with the most present values over the episode
/// (auto camera). Ties broken lexicographically on (gripper, object).
/// Empty when the episode has no usable pair.
std::optional<RelationSeries> primary_relation(const Episode& ep,
                                               const std::string& head_camera = "head");

/// Every (gripper, object, camera) series with at least one present value.
std::vector<RelationSeries> all_relations(const Episode& ep);

// <name>.relations.json: {"pairs":[{"gripper","object","camera","values":[..|null]}]}
void write_relations(const std::vector<RelationSeries>& series, const std::filesystem::path& path);
std::vector<RelationSeries> read_relations(const std::filesystem::path& path);

} // namespace espada
