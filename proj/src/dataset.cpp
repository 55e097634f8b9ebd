// Copyright 2026 Espada contributors
// SPDX-License-Identifier: Apache-2.0

#include "espada/dataset.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "espada/errors.hpp"

namespace espada {

using ordered_json = nlohmann::ordered_json;

const char* to_string(Label label) {
    return label == Label::precision ? "precision" : "casual";
}

Label label_from_string(const std::string& name) {
    if (name == "precision") return Label::precision;
    if (name == "casual") return Label::casual;
    throw ValidationError("unknown label \"" + name + "\" (expected precision|casual)");
}

namespace {

bool all_finite(const std::vector<double>& v) {
    for (double x : v)
        if (!std::isfinite(x)) return false;
    return true;
}

std::vector<double> read_vector(const ordered_json& j, const char* key, int line) {
    const auto& arr = j.at(key);
    if (!arr.is_array())
        throw ParseError(std::string(key) + " is not an array at line " + std::to_string(line));
    std::vector<double> out;
    out.reserve(arr.size());
    for (const auto& x : arr) out.push_back(x.get<double>());
    return out;
}

ordered_json intrinsics_to_json(const CameraIntrinsics& intr) {
    return ordered_json{{"fx", intr.fx}, {"fy", intr.fy}, {"cx", intr.cx},
                        {"cy", intr.cy}, {"z_scale", intr.z_scale}};
}

CameraIntrinsics intrinsics_from_json(const ordered_json& j) {
    CameraIntrinsics intr;
    intr.fx = j.at("fx").get<double>();
    intr.fy = j.at("fy").get<double>();
    intr.cx = j.at("cx").get<double>();
    intr.cy = j.at("cy").get<double>();
    intr.z_scale = j.value("z_scale", 1.0);
    return intr;
}

ordered_json frame_to_json(const Frame& f) {
    ordered_json j;
    j["index"] = f.index;
    j["action"] = f.action;
    j["joint_pos"] = f.joint_pos;
    if (f.joint_vel) j["joint_vel"] = *f.joint_vel;
    j["gripper"] = f.gripper;
    if (f.ee_pos) j["ee_pos"] = *f.ee_pos;
    if (f.tracks) {
        ordered_json tracks = ordered_json::object();
        for (const auto& [label, cams] : *f.tracks) {
            ordered_json per_cam = ordered_json::object();
            for (const auto& [cam, pt] : cams)
                per_cam[cam] = ordered_json{{"u", pt.u}, {"v", pt.v}, {"depth", pt.depth}};
            tracks[label] = std::move(per_cam);
        }
        j["tracks"] = std::move(tracks);
    }
    if (f.source_index) j["source_index"] = *f.source_index;
    return j;
}

Frame frame_from_json(const ordered_json& j, int line) {
    Frame f;
    f.index = j.at("index").get<int>();
    f.action = read_vector(j, "action", line);
    f.joint_pos = read_vector(j, "joint_pos", line);
    if (j.contains("joint_vel")) {
        if (j.at("joint_vel").is_null())
            throw ParseError("joint_vel must be omitted, not null, at line " + std::to_string(line));
        f.joint_vel = read_vector(j, "joint_vel", line);
    }
    f.gripper = read_vector(j, "gripper", line);
    if (j.contains("ee_pos")) f.ee_pos = read_vector(j, "ee_pos", line);
    if (j.contains("tracks")) {
        TrackMap tracks;
        for (const auto& [label, cams] : j.at("tracks").items()) {
            for (const auto& [cam, pt] : cams.items()) {
                TrackPoint p;
                p.u = pt.at("u").get<double>();
                p.v = pt.at("v").get<double>();
                p.depth = pt.at("depth").get<double>();
                tracks[label][cam] = p;
            }
        }
        f.tracks = std::move(tracks);
    }
    if (j.contains("source_index")) f.source_index = j.at("source_index").get<int>();
    return f;
}

} // namespace

void validate_episode(const Episode& ep) {
    if (ep.frames.empty()) throw ValidationError("episode " + ep.id + ": no frames");
    if (!(ep.control_hz > 0.0))
        throw ValidationError("episode " + ep.id + ": control_hz must be > 0");
    for (const auto& [cam, intr] : ep.cameras) {
        if (!(intr.fx > 0.0) || !(intr.fy > 0.0))
            throw ValidationError("episode " + ep.id + ": camera " + cam +
                                  " has non-positive focal length");
    }
    const size_t action_dim = ep.frames.front().action.size();
    const size_t joint_dim = ep.frames.front().joint_pos.size();
    const size_t gripper_count = ep.frames.front().gripper.size();
    const bool has_vel = ep.frames.front().joint_vel.has_value();
    for (size_t i = 0; i < ep.frames.size(); ++i) {
        const Frame& f = ep.frames[i];
        const int line = static_cast<int>(i) + 1; // frame-record line, header excluded
        if (f.index != static_cast<int>(i))
            throw ValidationError("non-contiguous index at line " + std::to_string(line));
        if (f.action.size() != action_dim)
            throw ValidationError("action dimension changed at line " + std::to_string(line));
        if (f.joint_pos.size() != joint_dim)
            throw ValidationError("joint_pos dimension changed at line " + std::to_string(line));
        if (f.gripper.size() != gripper_count)
            throw ValidationError("gripper count changed at line " + std::to_string(line));
        if (f.joint_vel.has_value() != has_vel)
            throw ValidationError("joint_vel present in some frames only, at line " +
                                  std::to_string(line));
        if (!all_finite(f.action) || !all_finite(f.joint_pos))
            throw ValidationError("non-finite value at line " + std::to_string(line));
        for (double g : f.gripper) {
            if (!(g >= 0.0 && g <= 1.0))
                throw ValidationError("gripper value outside [0,1] at line " +
                                      std::to_string(line));
        }
        if (f.joint_vel && !all_finite(*f.joint_vel))
            throw ValidationError("non-finite joint_vel at line " + std::to_string(line));
    }
}

void validate_segmentation(const Segmentation& seg) {
    for (size_t i = 0; i < seg.segments.size(); ++i) {
        const Segment& s = seg.segments[i];
        if (s.start > s.end)
            throw ValidationError("segment " + std::to_string(i) + " has start > end");
        if (s.start < 0)
            throw ValidationError("segment " + std::to_string(i) + " has negative start");
        if (!(s.confidence >= 0.0 && s.confidence <= 1.0))
            throw ValidationError("segment " + std::to_string(i) + " confidence outside [0,1]");
        if (i > 0) {
            const Segment& prev = seg.segments[i - 1];
            if (s.start <= prev.end)
                throw ValidationError(
                    "overlapping segments [" + std::to_string(prev.start) + "," +
                    std::to_string(prev.end) + "] and [" + std::to_string(s.start) + "," +
                    std::to_string(s.end) + "]");
        }
    }
}

Episode read_episode(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path.string());

    std::string line;
    if (!std::getline(in, line)) throw ParseError("empty episode file " + path.string());

    Episode ep;
    try {
        const ordered_json header = ordered_json::parse(line);
        ep.id = header.at("id").get<std::string>();
        ep.control_hz = header.at("control_hz").get<double>();
        if (header.contains("cameras")) {
            for (const auto& [cam, j] : header.at("cameras").items())
                ep.cameras[cam] = intrinsics_from_json(j);
        }
    } catch (const nlohmann::json::exception& e) {
        throw ParseError("bad header in " + path.string() + ": " + e.what());
    }

    int record = 0;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        ++record;
        try {
            ep.frames.push_back(frame_from_json(ordered_json::parse(line), record));
        } catch (const nlohmann::json::exception& e) {
            throw ParseError("bad frame record at line " + std::to_string(record) + " of " +
                             path.string() + ": " + e.what());
        }
    }

    validate_episode(ep);
    return ep;
}

void write_episode(const Episode& ep, const std::filesystem::path& path) {
    validate_episode(ep);
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write " + path.string());

    ordered_json header;
    header["id"] = ep.id;
    header["control_hz"] = ep.control_hz;
    ordered_json cams = ordered_json::object();
    for (const auto& [cam, intr] : ep.cameras) cams[cam] = intrinsics_to_json(intr);
    header["cameras"] = std::move(cams);
    out << header.dump() << "\n";

    for (const Frame& f : ep.frames) out << frame_to_json(f).dump() << "\n";
    if (!out) throw IoError("write failed for " + path.string());
}

Segmentation read_segmentation(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path.string());
    ordered_json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw ParseError("bad segmentation file " + path.string() + ": " + e.what());
    }
    Segmentation seg;
    try {
        seg.episode_id = j.at("episode_id").get<std::string>();
        for (const auto& js : j.at("segments")) {
            Segment s;
            s.start = js.at("start").get<int>();
            s.end = js.at("end").get<int>();
            s.label = label_from_string(js.at("label").get<std::string>());
            s.confidence = js.value("confidence", 0.5);
            seg.segments.push_back(s);
        }
    } catch (const nlohmann::json::exception& e) {
        throw ParseError("bad segmentation file " + path.string() + ": " + e.what());
    }
    validate_segmentation(seg);
    return seg;
}

void write_segmentation(const Segmentation& seg, const std::filesystem::path& path) {
    validate_segmentation(seg);
    ordered_json j;
    j["episode_id"] = seg.episode_id;
    ordered_json arr = ordered_json::array();
    for (const Segment& s : seg.segments) {
        arr.push_back(ordered_json{{"start", s.start},
                                   {"end", s.end},
                                   {"label", to_string(s.label)},
                                   {"confidence", s.confidence}});
    }
    j["segments"] = std::move(arr);
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write " + path.string());
    out << j.dump(2) << "\n";
    if (!out) throw IoError("write failed for " + path.string());
}

} // namespace espada
