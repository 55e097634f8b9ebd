// Copyright 2026 Espada contributors
// SPDX-License-Identifier: Apache-2.0

#include "espada/provider.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <thread>

#include <httplib.h>

#include "espada/errors.hpp"
#include "espada/geometry.hpp"
#include "espada/transfer.hpp"

namespace espada {

using nlohmann::json;

ProviderConfig provider_config_from_json(const json& j) {
    ProviderConfig cfg;
    cfg.kind = j.value("kind", "");
    cfg.path = j.value("path", "");
    cfg.url = j.value("url", "");
    if (j.contains("headers"))
        for (const auto& [k, v] : j.at("headers").items()) cfg.headers[k] = v.get<std::string>();
    cfg.max_chars = j.value("max_chars", 60000);
    cfg.decimals = j.value("decimals", 3);
    cfg.retry_attempts = j.value("retry_attempts", 3);
    cfg.retry_base_ms = j.value("retry_base_ms", 250);
    cfg.log_dir = j.value("log_dir", "");
    return cfg;
}

json provider_config_to_json(const ProviderConfig& cfg) {
    json j{{"kind", cfg.kind},         {"path", cfg.path},
           {"url", cfg.url},           {"max_chars", cfg.max_chars},
           {"decimals", cfg.decimals}, {"retry_attempts", cfg.retry_attempts},
           {"retry_base_ms", cfg.retry_base_ms}, {"log_dir", cfg.log_dir}};
    json headers = json::object();
    for (const auto& [k, v] : cfg.headers) headers[k] = v;
    j["headers"] = std::move(headers);
    return j;
}

std::vector<int> budget_sample(int T, int per_frame_chars, int max_chars) {
    if (T < 1) throw DomainError("budget_sample: T must be >= 1");
    if (per_frame_chars <= 0 || max_chars <= 0)
        throw DomainError("budget_sample: budget and frame size must be positive");
    if (per_frame_chars > max_chars)
        throw DomainError("budget too small: one frame needs " +
                          std::to_string(per_frame_chars) + " chars, budget is " +
                          std::to_string(max_chars));

    // Largest k with k * per_frame_chars <= max_chars.
    int lo = 1, hi = T;
    while (lo < hi) {
        const int mid = lo + (hi - lo + 1) / 2;
        if (static_cast<long>(mid) * per_frame_chars <= max_chars)
            lo = mid;
        else
            hi = mid - 1;
    }
    const int k = lo;

    std::vector<int> indices;
    indices.reserve(k);
    if (k == 1) {
        indices.push_back(0);
        return indices;
    }
    for (int i = 0; i < k; ++i) {
        const double pos = static_cast<double>(i) * (T - 1) / (k - 1);
        const int idx = static_cast<int>(std::llround(pos));
        if (indices.empty() || indices.back() != idx) indices.push_back(idx);
    }
    return indices;
}

namespace {

double round_places(double v, int decimals) {
    const double scale = std::pow(10.0, decimals);
    const double scaled = v * scale;
    if (!std::isfinite(scaled)) return v;
    return std::round(scaled) / scale;
}

json round_floats(const json& j, int decimals) {
    switch (j.type()) {
    case json::value_t::number_float:
        return json(round_places(j.get<double>(), decimals));
    case json::value_t::array: {
        json out = json::array();
        for (const auto& x : j) out.push_back(round_floats(x, decimals));
        return out;
    }
    case json::value_t::object: {
        json out = json::object();
        for (const auto& [k, v] : j.items()) out[k] = round_floats(v, decimals);
        return out;
    }
    default:
        return j;
    }
}

} // namespace

std::string slim_json(const json& payload, int decimals) {
    // json objects keep keys sorted; dump() emits no whitespace.
    return round_floats(payload, decimals).dump();
}

namespace {

/// Frame payload for the prompt: tracked 3D centers and pairwise distances,
/// from the per-frame camera choice.
json frame_payload(const Episode& ep, int t, const std::string& head_camera) {
    json j;
    j["index"] = t;
    const auto cam = select_camera(ep, t, head_camera);
    if (!cam) return j;
    const Frame& f = ep.frames[t];
    const CameraIntrinsics& intr = ep.cameras.at(*cam);

    json centers = json::object();
    if (f.tracks) {
        for (const auto& [label, cams] : *f.tracks) {
            auto it = cams.find(*cam);
            if (it == cams.end()) continue;
            const Point3 p = back_project(it->second.u, it->second.v, it->second.depth, intr);
            centers[label] = json::array({p.x, p.y, p.z});
        }
    }
    if (!centers.empty()) j["center_3d"] = std::move(centers);

    json relations = json::object();
    if (f.tracks) {
        for (const auto& [g, g_cams] : *f.tracks) {
            if (!is_gripper_label(g) || !g_cams.count(*cam)) continue;
            for (const auto& [o, o_cams] : *f.tracks) {
                if (is_gripper_label(o) || !o_cams.count(*cam)) continue;
                const Point3 pg = back_project(g_cams.at(*cam).u, g_cams.at(*cam).v,
                                               g_cams.at(*cam).depth, intr);
                const Point3 po = back_project(o_cams.at(*cam).u, o_cams.at(*cam).v,
                                               o_cams.at(*cam).depth, intr);
                const double dx = pg.x - po.x, dy = pg.y - po.y, dz = pg.z - po.z;
                relations[g + "|" + o] = std::sqrt(dx * dx + dy * dy + dz * dz);
            }
        }
    }
    if (!relations.empty()) j["relations_3d"] = std::move(relations);
    return j;
}

json hints_to_json(const PolicyHints& hints) {
    return json{{"min_segment_len", hints.min_segment_len},
                {"merge_gap", hints.merge_gap},
                {"hysteresis", hints.hysteresis},
                {"micro_len", hints.micro_len},
                {"parsimony", hints.parsimony}};
}

std::string request_body(const ProviderRequest& req, int decimals) {
    json j{{"task_summary", req.task_summary},
           {"frames", req.frames},
           {"policy_hints", hints_to_json(req.policy_hints)}};
    return slim_json(j, decimals);
}

void log_exchange(const ProviderConfig& cfg, const std::string& episode_id,
                  const std::string& suffix, const std::string& content) {
    if (cfg.log_dir.empty()) return;
    std::filesystem::create_directories(cfg.log_dir);
    const auto path = std::filesystem::path(cfg.log_dir) / (episode_id + "." + suffix + ".json");
    std::ofstream out(path, std::ios::binary);
    if (out) out << content << "\n";
}

} // namespace

ProviderRequest build_request(const Episode& ep, const std::string& task_summary,
                              const ProviderConfig& cfg, const std::string& head_camera) {
    const int T = ep.length();
    ProviderRequest req;
    req.episode_id = ep.id;
    req.episode_len = T;
    req.task_summary = task_summary;

    // Measure the slimmed per-frame length on the median-size frame.
    std::vector<int> lengths;
    lengths.reserve(T);
    std::vector<json> payloads;
    payloads.reserve(T);
    for (int t = 0; t < T; ++t) {
        payloads.push_back(frame_payload(ep, t, head_camera));
        lengths.push_back(static_cast<int>(slim_json(payloads.back(), cfg.decimals).size()));
    }
    std::vector<int> sorted = lengths;
    std::nth_element(sorted.begin(), sorted.begin() + sorted.size() / 2, sorted.end());
    const int per_frame = std::max(1, sorted[sorted.size() / 2]);

    const std::vector<int> sampled = budget_sample(T, per_frame, cfg.max_chars);
    req.budget = {cfg.max_chars, per_frame, static_cast<int>(sampled.size())};
    req.frames = json::array();
    for (int t : sampled) req.frames.push_back(std::move(payloads[t]));
    return req;
}

Segmentation parse_provider_response(const std::string& body, const std::string& episode_id,
                                     int T) {
    const auto excerpt = [&]() {
        return body.size() <= 200 ? body : body.substr(0, 200) + "...";
    };
    json j;
    try {
        j = json::parse(body);
    } catch (const json::exception& e) {
        throw ProtocolError("provider response is not valid JSON (" + std::string(e.what()) +
                            "): " + excerpt());
    }
    if (!j.is_object() || !j.contains("segments") || !j.at("segments").is_array())
        throw ProtocolError("provider response lacks a segments array: " + excerpt());

    Segmentation seg;
    seg.episode_id = episode_id;
    for (const auto& js : j.at("segments")) {
        Segment s;
        try {
            s.start = js.at("start").get<int>();
            s.end = js.at("end").get<int>();
            s.label = label_from_string(js.at("label").get<std::string>());
            s.confidence = js.value("confidence", 0.5);
        } catch (const Error& e) {
            throw ProtocolError(std::string("bad segment in provider response: ") + e.what());
        } catch (const json::exception& e) {
            throw ProtocolError(std::string("bad segment in provider response: ") + e.what());
        }
        if (!(s.confidence >= 0.0 && s.confidence <= 1.0))
            throw ProtocolError("segment confidence outside [0,1] in provider response");
        if (s.start > T - 1) {
            log_warning("provider segment [" + std::to_string(s.start) + "," +
                        std::to_string(s.end) + "] outside episode, dropped");
            continue;
        }
        if (s.start < 0 || s.end > T - 1) {
            log_warning("provider segment [" + std::to_string(s.start) + "," +
                        std::to_string(s.end) + "] clipped to episode bounds");
            s.start = std::max(s.start, 0);
            s.end = std::min(s.end, T - 1);
        }
        if (s.end < s.start) continue;
        seg.segments.push_back(s);
    }
    std::sort(seg.segments.begin(), seg.segments.end(),
              [](const Segment& a, const Segment& b) { return a.start < b.start; });
    for (size_t i = 1; i < seg.segments.size(); ++i) {
        if (seg.segments[i].start <= seg.segments[i - 1].end)
            throw ProtocolError(
                "provider returned overlapping segments [" +
                std::to_string(seg.segments[i - 1].start) + "," +
                std::to_string(seg.segments[i - 1].end) + "] and [" +
                std::to_string(seg.segments[i].start) + "," +
                std::to_string(seg.segments[i].end) + "]");
    }
    return seg;
}

Segmentation mock_segmentation(const ProviderRequest& req) {
    const int T = req.episode_len;
    // Primary relation key: lexicographically smallest seen in the payload.
    std::string key;
    for (const auto& f : req.frames) {
        if (!f.contains("relations_3d")) continue;
        for (const auto& [k, v] : f.at("relations_3d").items())
            if (key.empty() || k < key) key = k;
    }

    std::vector<Label> labels(T, Label::precision);
    Label current = Label::precision;
    for (size_t i = 0; i + 1 < req.frames.size(); ++i) {
        const auto& a = req.frames[i];
        const auto& b = req.frames[i + 1];
        const int ta = a.at("index").get<int>();
        const int tb = b.at("index").get<int>();
        const bool has_a = !key.empty() && a.contains("relations_3d") &&
                           a.at("relations_3d").contains(key);
        const bool has_b = !key.empty() && b.contains("relations_3d") &&
                           b.at("relations_3d").contains(key);
        if (has_a && has_b) {
            const double ra = a.at("relations_3d").at(key).get<double>();
            const double rb = b.at("relations_3d").at(key).get<double>();
            current = rb - ra > 1e-9 ? Label::casual : Label::precision;
        }
        for (int t = ta; t < tb && t < T; ++t) labels[t] = current;
        if (i + 2 == req.frames.size())
            for (int t = tb; t < T; ++t) labels[t] = current;
    }
    Segmentation seg = labels_to_segmentation(labels, req.episode_id);
    for (Segment& s : seg.segments) s.confidence = 0.8;
    return seg;
}

namespace {

Segmentation fetch_http(const ProviderRequest& req, const ProviderConfig& cfg) {
    const auto scheme_end = cfg.url.find("://");
    if (scheme_end == std::string::npos)
        throw ValidationError("provider url must include a scheme: " + cfg.url);
    const auto path_start = cfg.url.find('/', scheme_end + 3);
    const std::string base =
        path_start == std::string::npos ? cfg.url : cfg.url.substr(0, path_start);
    const std::string path = path_start == std::string::npos ? "/" : cfg.url.substr(path_start);

    httplib::Headers headers;
    for (const auto& [k, v] : cfg.headers) headers.emplace(k, v);
    const std::string body = request_body(req, cfg.decimals);
    log_exchange(cfg, req.episode_id, "request", body);

    std::string last_error;
    for (int attempt = 0; attempt < cfg.retry_attempts; ++attempt) {
        if (attempt > 0) {
            const auto delay = cfg.retry_base_ms * (1 << (attempt - 1));
            std::this_thread::sleep_for(std::chrono::milliseconds(delay));
        }
        httplib::Client client(base);
        client.set_connection_timeout(10);
        client.set_read_timeout(60);
        auto res = client.Post(path, headers, body, "application/json");
        if (!res) {
            last_error = httplib::to_string(res.error());
            continue;
        }
        if (res->status != 200)
            throw ProtocolError("provider returned HTTP " + std::to_string(res->status) + ": " +
                                (res->body.size() <= 200 ? res->body
                                                         : res->body.substr(0, 200) + "..."));
        log_exchange(cfg, req.episode_id, "response", res->body);
        return parse_provider_response(res->body, req.episode_id, req.episode_len);
    }
    throw IoError("provider unreachable after " + std::to_string(cfg.retry_attempts) +
                  " attempts (" + last_error + "): " + cfg.url);
}

} // namespace

Segmentation fetch_segmentation(const ProviderRequest& req, const ProviderConfig& cfg) {
    if (cfg.kind == "file") {
        std::ifstream in(cfg.path);
        if (!in) throw IoError("cannot open provider fixture " + cfg.path);
        std::string body((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
        log_exchange(cfg, req.episode_id, "response", body);
        return parse_provider_response(body, req.episode_id, req.episode_len);
    }
    if (cfg.kind == "http") return fetch_http(req, cfg);
    if (cfg.kind == "mock") {
        Segmentation seg = mock_segmentation(req);
        log_exchange(cfg, req.episode_id, "request", request_body(req, cfg.decimals));
        return seg;
    }
    throw ValidationError("unknown provider kind \"" + cfg.kind + "\"");
}

} // namespace espada
