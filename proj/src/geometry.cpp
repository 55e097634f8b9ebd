// Copyright 2026 Espada contributors
// SPDX-License-Identifier: Apache-2.0

#include "espada/geometry.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <set>

#include <json.hpp>

#include "espada/errors.hpp"

namespace espada {

int RelationSeries::count_present() const {
    int n = 0;
    for (const auto& v : values)
        if (v) ++n;
    return n;
}

Point3 back_project(double u, double v, double depth, const CameraIntrinsics& intr) {
    if (!std::isfinite(u) || !std::isfinite(v) || !std::isfinite(depth))
        throw DomainError("back_project: non-finite input");
    if (!(intr.fx > 0.0) || !(intr.fy > 0.0))
        throw DomainError("back_project: non-positive focal length");
    const double z = depth * intr.z_scale;
    return {z * (u - intr.cx) / intr.fx, z * (v - intr.cy) / intr.fy, z};
}

Pixel project(const Point3& p, const CameraIntrinsics& intr) {
    if (p.z == 0.0) throw DomainError("project: zero depth");
    return {intr.fx * p.x / p.z + intr.cx, intr.fy * p.y / p.z + intr.cy, p.z / intr.z_scale};
}

bool is_gripper_label(std::string_view label) {
    static constexpr std::string_view kNeedle = "gripper";
    if (label.size() < kNeedle.size()) return false;
    for (size_t i = 0; i + kNeedle.size() <= label.size(); ++i) {
        size_t j = 0;
        while (j < kNeedle.size() &&
               std::tolower(static_cast<unsigned char>(label[i + j])) == kNeedle[j])
            ++j;
        if (j == kNeedle.size()) return true;
    }
    return false;
}

namespace {

std::vector<std::string> collect_labels(const Episode& ep, bool grippers) {
    std::set<std::string> labels;
    for (const Frame& f : ep.frames) {
        if (!f.tracks) continue;
        for (const auto& [label, cams] : *f.tracks)
            if (is_gripper_label(label) == grippers) labels.insert(label);
    }
    return {labels.begin(), labels.end()};
}

const TrackPoint* find_track(const Frame& f, const std::string& label, const std::string& cam) {
    if (!f.tracks) return nullptr;
    auto it = f.tracks->find(label);
    if (it == f.tracks->end()) return nullptr;
    auto jt = it->second.find(cam);
    if (jt == it->second.end()) return nullptr;
    return &jt->second;
}

std::optional<double> pair_distance(const Episode& ep, const Frame& f,
                                    const std::string& gripper_label,
                                    const std::string& object_label, const std::string& cam) {
    const TrackPoint* g = find_track(f, gripper_label, cam);
    const TrackPoint* o = find_track(f, object_label, cam);
    if (!g || !o) return std::nullopt;
    auto it = ep.cameras.find(cam);
    if (it == ep.cameras.end()) return std::nullopt;
    const Point3 pg = back_project(g->u, g->v, g->depth, it->second);
    const Point3 po = back_project(o->u, o->v, o->depth, it->second);
    const double dx = pg.x - po.x, dy = pg.y - po.y, dz = pg.z - po.z;
    return std::sqrt(dx * dx + dy * dy + dz * dz);
}

/// Number of gripper-object pairs with both tracks present at this frame.
int valid_relations_at(const Episode& ep, const Frame& f, const std::string& cam) {
    if (!f.tracks) return 0;
    int count = 0;
    for (const auto& [ga, cams_a] : *f.tracks) {
        if (!is_gripper_label(ga) || !cams_a.count(cam)) continue;
        for (const auto& [ob, cams_b] : *f.tracks) {
            if (is_gripper_label(ob)) continue;
            if (cams_b.count(cam) && ep.cameras.count(cam)) ++count;
        }
    }
    return count;
}

} // namespace

std::vector<std::string> gripper_labels(const Episode& ep) { return collect_labels(ep, true); }
std::vector<std::string> object_labels(const Episode& ep) { return collect_labels(ep, false); }

RelationSeries relation_series(const Episode& ep, const std::string& gripper_label,
                               const std::string& object_label, const std::string& camera_id) {
    bool gripper_seen = false, object_seen = false;
    RelationSeries out{gripper_label, object_label, camera_id, {}};
    out.values.reserve(ep.frames.size());
    for (const Frame& f : ep.frames) {
        gripper_seen = gripper_seen || find_track(f, gripper_label, camera_id) != nullptr;
        object_seen = object_seen || find_track(f, object_label, camera_id) != nullptr;
        out.values.push_back(pair_distance(ep, f, gripper_label, object_label, camera_id));
    }
    if (!gripper_seen)
        throw LookupError("label \"" + gripper_label + "\" never appears for camera " + camera_id);
    if (!object_seen)
        throw LookupError("label \"" + object_label + "\" never appears for camera " + camera_id);
    return out;
}

std::optional<std::string> select_camera(const Episode& ep, int frame,
                                         const std::string& head_camera) {
    if (ep.cameras.empty()) throw LookupError("episode " + ep.id + " declares no cameras");
    const Frame& f = ep.frames.at(frame);

    auto head = ep.cameras.find(head_camera);
    if (head != ep.cameras.end() && valid_relations_at(ep, f, head_camera) > 0)
        return head_camera;

    std::string best;
    int best_count = 0;
    for (const auto& [cam, intr] : ep.cameras) { // std::map: lexicographic tie-break
        const int count = valid_relations_at(ep, f, cam);
        if (count > best_count) {
            best_count = count;
            best = cam;
        }
    }
    if (best_count == 0) return std::nullopt;
    return best;
}

RelationSeries relation_series_auto(const Episode& ep, const std::string& gripper_label,
                                    const std::string& object_label,
                                    const std::string& head_camera) {
    RelationSeries out{gripper_label, object_label, "auto", {}};
    out.values.reserve(ep.frames.size());
    bool any_label = false;
    for (int t = 0; t < ep.length(); ++t) {
        const auto cam = select_camera(ep, t, head_camera);
        std::optional<double> value;
        if (cam) value = pair_distance(ep, ep.frames[t], gripper_label, object_label, *cam);
        any_label = any_label || value.has_value();
        out.values.push_back(value);
    }
    if (!any_label)
        throw LookupError("pair (" + gripper_label + ", " + object_label +
                          ") never valid in episode " + ep.id);
    return out;
}

RelationSeries interpolate_gaps(RelationSeries series, int max_gap) {
    const int n = static_cast<int>(series.values.size());
    int prev = -1;
    for (int t = 0; t < n; ++t) {
        if (!series.values[t]) continue;
        if (prev >= 0 && t - prev > 1 && t - prev - 1 <= max_gap) {
            const double a = *series.values[prev];
            const double b = *series.values[t];
            for (int k = prev + 1; k < t; ++k)
                series.values[k] = a + (b - a) * (k - prev) / double(t - prev);
        }
        prev = t;
    }
    return series;
}

std::optional<RelationSeries> primary_relation(const Episode& ep, const std::string& head_camera) {
    std::optional<RelationSeries> best;
    int best_count = 0;
    for (const auto& g : gripper_labels(ep)) {
        for (const auto& o : object_labels(ep)) {
            RelationSeries series{g, o, "auto", {}};
            try {
                series = relation_series_auto(ep, g, o, head_camera);
            } catch (const LookupError&) {
                continue;
            }
            const int count = series.count_present();
            if (count > best_count) { // lexicographic (g, o) order wins ties
                best_count = count;
                best = std::move(series);
            }
        }
    }
    return best;
}

std::vector<RelationSeries> all_relations(const Episode& ep) {
    std::vector<RelationSeries> out;
    for (const auto& g : gripper_labels(ep)) {
        for (const auto& o : object_labels(ep)) {
            for (const auto& [cam, intr] : ep.cameras) {
                RelationSeries series{g, o, cam, {}};
                series.values.reserve(ep.frames.size());
                for (const Frame& f : ep.frames)
                    series.values.push_back(pair_distance(ep, f, g, o, cam));
                if (series.count_present() > 0) out.push_back(std::move(series));
            }
        }
    }
    return out;
}

void write_relations(const std::vector<RelationSeries>& series,
                     const std::filesystem::path& path) {
    nlohmann::ordered_json pairs = nlohmann::ordered_json::array();
    for (const RelationSeries& s : series) {
        nlohmann::ordered_json values = nlohmann::ordered_json::array();
        for (const auto& v : s.values) {
            if (v)
                values.push_back(*v);
            else
                values.push_back(nullptr);
        }
        pairs.push_back(nlohmann::ordered_json{{"gripper", s.gripper_label},
                                               {"object", s.object_label},
                                               {"camera", s.camera_id},
                                               {"values", std::move(values)}});
    }
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write " + path.string());
    out << nlohmann::ordered_json{{"pairs", std::move(pairs)}}.dump() << "\n";
}

std::vector<RelationSeries> read_relations(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path.string());
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw ParseError("bad relations file " + path.string() + ": " + e.what());
    }
    std::vector<RelationSeries> out;
    for (const auto& p : j.at("pairs")) {
        RelationSeries s{p.at("gripper").get<std::string>(), p.at("object").get<std::string>(),
                         p.at("camera").get<std::string>(), {}};
        for (const auto& v : p.at("values")) {
            if (v.is_null())
                s.values.push_back(std::nullopt);
            else
                s.values.push_back(v.get<double>());
        }
        out.push_back(std::move(s));
    }
    return out;
}

} // namespace espada
