// Copyright 2026 Espada contributors
// SPDX-License-Identifier: Apache-2.0

#include "espada/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <ctime>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "espada/dtw.hpp"
#include "espada/errors.hpp"
#include "espada/features.hpp"
#include "espada/parallel.hpp"

namespace espada {

using nlohmann::json;
using nlohmann::ordered_json;

namespace {

[[noreturn]] void rethrow_with_stage(const Error& e, const std::string& stage,
                                     const std::string& episode_id) {
    std::string msg = "stage " + stage;
    if (!episode_id.empty()) msg += ", episode " + episode_id;
    msg += ": ";
    msg += e.what();
    if (dynamic_cast<const IoError*>(&e)) throw IoError(msg);
    throw ValidationError(msg);
}

std::string episode_stem(const std::filesystem::path& path) {
    std::string name = path.filename().string();
    const std::string suffix = ".episode.jsonl";
    if (name.size() > suffix.size() && name.ends_with(suffix))
        name.resize(name.size() - suffix.size());
    return name;
}

std::string utc_timestamp() {
    const auto now = std::chrono::system_clock::now();
    const std::time_t t = std::chrono::system_clock::to_time_t(now);
    std::tm tm{};
    gmtime_r(&t, &tm);
    std::ostringstream out;
    out << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
    return out.str();
}

ordered_json segments_to_json(const Segmentation& seg) {
    ordered_json arr = ordered_json::array();
    for (const Segment& s : seg.segments)
        arr.push_back(ordered_json{{"start", s.start},
                                   {"end", s.end},
                                   {"label", to_string(s.label)},
                                   {"confidence", s.confidence}});
    return arr;
}

double casual_fraction(const Segmentation& seg, int T) {
    int casual = 0;
    for (const Segment& s : seg.segments)
        if (s.label == Label::casual) casual += s.length();
    return T > 0 ? static_cast<double>(casual) / T : 0.0;
}

} // namespace

void merge_config_json(PipelineConfig& cfg, const json& j) {
    if (j.contains("dataset_dir")) cfg.dataset_dir = j.at("dataset_dir").get<std::string>();
    if (j.contains("out_dir")) cfg.out_dir = j.at("out_dir").get<std::string>();
    if (j.contains("head_camera")) cfg.head_camera = j.at("head_camera").get<std::string>();
    if (j.contains("task_summary")) cfg.task_summary = j.at("task_summary").get<std::string>();
    if (j.contains("jobs")) cfg.jobs = j.at("jobs").get<int>();
    if (j.contains("transfer")) {
        const auto& t = j.at("transfer");
        cfg.transfer.rho = t.value("rho", cfg.transfer.rho);
        cfg.transfer.snap_window = t.value("snap_window", cfg.transfer.snap_window);
        cfg.transfer.snap_summary_len = t.value("snap_summary_len", cfg.transfer.snap_summary_len);
    }
    if (j.contains("stability")) {
        const auto& s = j.at("stability");
        cfg.stability.min_segment_len = s.value("min_segment_len", cfg.stability.min_segment_len);
        cfg.stability.merge_gap = s.value("merge_gap", cfg.stability.merge_gap);
        cfg.stability.hysteresis = s.value("hysteresis", cfg.stability.hysteresis);
        cfg.stability.micro_len = s.value("micro_len", cfg.stability.micro_len);
    }
    if (j.contains("gripper")) {
        const auto& g = j.at("gripper");
        cfg.gripper.lookahead = g.value("lookahead", cfg.gripper.lookahead);
        cfg.gripper.threshold = g.value("threshold", cfg.gripper.threshold);
        cfg.gripper.pad = g.value("pad", cfg.gripper.pad);
        cfg.gripper.dbscan_eps = g.value("dbscan_eps", cfg.gripper.dbscan_eps);
        cfg.gripper.dbscan_min_pts = g.value("dbscan_min_pts", cfg.gripper.dbscan_min_pts);
    }
    if (j.contains("plan")) {
        const auto& p = j.at("plan");
        cfg.plan.n_precision = p.value("n_precision", cfg.plan.n_precision);
        cfg.plan.n_casual = p.value("n_casual", cfg.plan.n_casual);
        cfg.plan.chunk_horizon = p.value("chunk_horizon", cfg.plan.chunk_horizon);
        if (p.contains("horizon_mode"))
            cfg.plan.horizon_mode =
                horizon_mode_from_string(p.at("horizon_mode").get<std::string>());
    }
    if (j.contains("provider")) cfg.provider = provider_config_from_json(j.at("provider"));
}

PipelineConfig load_pipeline_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open config " + path.string());
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw ParseError("bad config " + path.string() + ": " + e.what());
    }
    PipelineConfig cfg;
    merge_config_json(cfg, j);
    return cfg;
}

ordered_json config_to_json(const PipelineConfig& cfg) {
    ordered_json j;
    j["dataset_dir"] = cfg.dataset_dir.string();
    j["out_dir"] = cfg.out_dir.string();
    j["head_camera"] = cfg.head_camera;
    j["task_summary"] = cfg.task_summary;
    j["jobs"] = cfg.jobs;
    j["transfer"] = ordered_json{{"rho", cfg.transfer.rho},
                                 {"snap_window", cfg.transfer.snap_window},
                                 {"snap_summary_len", cfg.transfer.snap_summary_len}};
    j["stability"] = ordered_json{{"min_segment_len", cfg.stability.min_segment_len},
                                  {"merge_gap", cfg.stability.merge_gap},
                                  {"hysteresis", cfg.stability.hysteresis},
                                  {"micro_len", cfg.stability.micro_len}};
    j["gripper"] = ordered_json{{"lookahead", cfg.gripper.lookahead},
                                {"threshold", cfg.gripper.threshold},
                                {"pad", cfg.gripper.pad},
                                {"dbscan_eps", cfg.gripper.dbscan_eps},
                                {"dbscan_min_pts", cfg.gripper.dbscan_min_pts}};
    j["plan"] = ordered_json{{"n_precision", cfg.plan.n_precision},
                             {"n_casual", cfg.plan.n_casual},
                             {"chunk_horizon", cfg.plan.chunk_horizon},
                             {"horizon_mode", to_string(cfg.plan.horizon_mode)}};
    j["provider"] = ordered_json(provider_config_to_json(cfg.provider));
    return j;
}

std::string config_hash(const PipelineConfig& cfg) {
    const std::string canon = config_to_json(cfg).dump();
    std::uint64_t hash = 1469598103934665603ull; // FNV-1a
    for (unsigned char c : canon) {
        hash ^= c;
        hash *= 1099511628211ull;
    }
    std::ostringstream out;
    out << std::hex << std::setw(16) << std::setfill('0') << hash;
    return out.str();
}

std::vector<std::filesystem::path> list_episode_files(const std::filesystem::path& dir) {
    std::error_code ec;
    if (!std::filesystem::is_directory(dir, ec))
        throw IoError("not a directory: " + dir.string());
    std::vector<std::filesystem::path> files;
    for (const auto& entry : std::filesystem::directory_iterator(dir)) {
        if (entry.is_regular_file() && entry.path().filename().string().ends_with(".episode.jsonl"))
            files.push_back(entry.path());
    }
    std::sort(files.begin(), files.end());
    return files;
}

ValidateReport cmd_validate(const std::filesystem::path& dir) {
    ValidateReport report;
    for (const auto& file : list_episode_files(dir)) {
        ValidateEntry entry;
        entry.file = file.filename().string();
        try {
            read_episode(file);
            entry.ok = true;
        } catch (const Error& e) {
            entry.ok = false;
            entry.error = e.what();
            report.all_ok = false;
        }
        report.entries.push_back(std::move(entry));
    }
    return report;
}

Segmentation refine_episode0(const Episode& ep, const Segmentation& raw,
                             const std::optional<RelationSeries>& primary,
                             const StabilityConfig& stability,
                             const GripperForceConfig& gripper) {
    RelationSeries relation{"", "", "none", {}};
    relation.values.assign(ep.length(), std::nullopt);
    if (primary) relation = *primary;
    Segmentation completed = coverage_completion(raw, relation, ep.length(), stability);
    return apply_gripper_forcing(ep, completed, gripper);
}

Segmentation finalize_transferred(const Episode& ep, const Segmentation& transferred,
                                  const GripperForceConfig& gripper) {
    const int T = ep.length();
    const std::vector<Label> labels = expand_to_frames(transferred, T);
    std::vector<double> confidences(T, 0.5); // uncovered frames carry neutral confidence
    for (const Segment& s : transferred.segments)
        for (int t = s.start; t <= s.end; ++t) confidences[t] = s.confidence;
    const Segmentation full = labels_to_segmentation(labels, ep.id, confidences);
    return apply_gripper_forcing(ep, full, gripper);
}

PipelineResult run_pipeline(const PipelineConfig& cfg) {
    PipelineResult result;
    std::vector<std::filesystem::path>& written = result.written;

    const auto emit = [&](const std::filesystem::path& path, auto&& writer) {
        writer(path);
        written.push_back(path);
    };

    try {
        validate(cfg.transfer);
        validate(cfg.stability);
        validate(cfg.gripper);
        validate(cfg.plan);
        std::filesystem::create_directories(cfg.out_dir);

        // load
        std::vector<Episode> episodes;
        std::vector<std::string> stems;
        const std::vector<std::filesystem::path> files = list_episode_files(cfg.dataset_dir);
        if (files.empty()) throw ValidationError("no .episode.jsonl files in " +
                                                 cfg.dataset_dir.string());
        try {
            for (const auto& f : files) {
                episodes.push_back(read_episode(f));
                stems.push_back(episode_stem(f));
            }
        } catch (const Error& e) {
            rethrow_with_stage(e, "load", "");
        }
        const int n = static_cast<int>(episodes.size());

        // relate
        std::vector<std::optional<RelationSeries>> primaries(n);
        try {
            parallel_for(n, cfg.jobs, [&](int i) {
                primaries[i] = primary_relation(episodes[i], cfg.head_camera);
            });
            for (int i = 0; i < n; ++i) {
                const auto relations = all_relations(episodes[i]);
                if (relations.empty()) continue;
                emit(cfg.out_dir / (stems[i] + ".relations.json"),
                     [&](const auto& p) { write_relations(relations, p); });
            }
        } catch (const Error& e) {
            rethrow_with_stage(e, "relate", "");
        }

        // episode-0 segmentation source
        Segmentation seg0_raw;
        try {
            if (cfg.provider.configured()) {
                const ProviderRequest req =
                    build_request(episodes[0], cfg.task_summary, cfg.provider, cfg.head_camera);
                seg0_raw = fetch_segmentation(req, cfg.provider);
                seg0_raw.episode_id = episodes[0].id;
            } else {
                const auto sibling = files[0].parent_path() / (stems[0] + ".segments.json");
                if (!std::filesystem::exists(sibling))
                    throw ValidationError("no segmentation source: configure a provider or put " +
                                          sibling.string() + " next to episode 0");
                seg0_raw = read_segmentation(sibling);
                if (seg0_raw.episode_id != episodes[0].id)
                    throw ValidationError("segmentation " + sibling.string() +
                                          " names episode \"" + seg0_raw.episode_id +
                                          "\", expected \"" + episodes[0].id + "\"");
            }
        } catch (const Error& e) {
            rethrow_with_stage(e, "segment", episodes[0].id);
        }

        // episode-0 refinement
        std::vector<Segmentation> final_segs(n);
        try {
            final_segs[0] = refine_episode0(episodes[0], seg0_raw, primaries[0], cfg.stability,
                                            cfg.gripper);
        } catch (const Error& e) {
            rethrow_with_stage(e, "refine", episodes[0].id);
        }

        // features
        std::vector<FeatureSeries> features;
        try {
            features = build_features_all(episodes, cfg.jobs);
        } catch (const Error& e) {
            rethrow_with_stage(e, "features", "");
        }

        // banded DTW transfer + per-episode finalization
        try {
            parallel_for(n - 1, cfg.jobs, [&](int idx) {
                const int k = idx + 1;
                try {
                    const AlignmentPath path =
                        banded_dtw(features[0].matrix, features[k].matrix, cfg.transfer.rho);
                    const AlignmentMap map =
                        path_to_map(path, features[0].matrix.rows, features[k].matrix.rows);
                    const Segmentation transferred =
                        transfer_labels(final_segs[0], map, features[0], features[k],
                                        cfg.transfer);
                    final_segs[k] = finalize_transferred(episodes[k], transferred, cfg.gripper);
                } catch (const Error& e) {
                    rethrow_with_stage(e, "transfer", episodes[k].id);
                }
            });
            for (int i = 0; i < n; ++i) {
                emit(cfg.out_dir / (stems[i] + ".segments.json"),
                     [&](const auto& p) { write_segmentation(final_segs[i], p); });
            }
        } catch (const Error& e) {
            if (std::string(e.what()).starts_with("stage ")) throw;
            rethrow_with_stage(e, "transfer", "");
        }

        // compile
        ordered_json manifest_episodes = ordered_json::array();
        long total_source_frames = 0, total_replica_frames = 0;
        std::vector<int> k_primes;
        try {
            const auto compiled = compile_dataset(episodes, final_segs, cfg.plan, cfg.jobs);
            for (int i = 0; i < n; ++i) {
                ordered_json replicas = ordered_json::array();
                long replica_frames = 0;
                for (const ReplicaEpisode& rep : compiled[i]) {
                    const std::string file =
                        stems[i] + ".r" + std::to_string(rep.replica_index) + ".episode.jsonl";
                    emit(cfg.out_dir / file,
                         [&](const auto& p) { write_episode(rep.episode, p); });
                    replicas.push_back(ordered_json{{"id", rep.episode.id},
                                                    {"file", file},
                                                    {"frames", rep.episode.length()}});
                    replica_frames += rep.episode.length();
                }
                const int k_prime = rescale_horizon(episodes[i], cfg.plan.chunk_horizon,
                                                    compiled[i].front().source_indices,
                                                    cfg.plan.horizon_mode);
                k_primes.push_back(k_prime);
                const double mean_len =
                    static_cast<double>(replica_frames) / compiled[i].size();
                const double ratio = episodes[i].length() / mean_len;
                total_source_frames += episodes[i].length();
                total_replica_frames += replica_frames;
                manifest_episodes.push_back(
                    ordered_json{{"id", episodes[i].id},
                                 {"source_file", files[i].filename().string()},
                                 {"frames", episodes[i].length()},
                                 {"casual_fraction", casual_fraction(final_segs[i],
                                                                     episodes[i].length())},
                                 {"segments", segments_to_json(final_segs[i])},
                                 {"k_prime", k_prime},
                                 {"compression_ratio", ratio},
                                 {"replicas", std::move(replicas)}});
            }
        } catch (const Error& e) {
            rethrow_with_stage(e, "compile", "");
        }

        std::vector<int> sorted_k = k_primes;
        std::sort(sorted_k.begin(), sorted_k.end());
        const int overall_k = sorted_k[(sorted_k.size() - 1) / 2];
        const double overall_ratio =
            total_replica_frames > 0
                ? static_cast<double>(total_source_frames) * cfg.plan.replica_count() /
                      total_replica_frames
                : 1.0;

        ordered_json manifest;
        manifest["created_at"] = utc_timestamp();
        manifest["config"] = config_to_json(cfg);
        manifest["config_hash"] = config_hash(cfg);
        manifest["episodes"] = std::move(manifest_episodes);
        manifest["totals"] = ordered_json{{"episodes", n},
                                          {"source_frames", total_source_frames},
                                          {"replica_frames", total_replica_frames},
                                          {"compression_ratio", overall_ratio},
                                          {"k_prime", overall_k}};
        emit(cfg.out_dir / "manifest.json", [&](const auto& p) {
            std::ofstream out(p, std::ios::binary);
            if (!out) throw IoError("cannot write " + p.string());
            out << manifest.dump(2) << "\n";
        });
        result.manifest = std::move(manifest);
        return result;
    } catch (...) {
        // A failed stage leaves no partial outputs behind.
        for (const auto& p : written) {
            std::error_code ec;
            std::filesystem::remove(p, ec);
        }
        throw;
    }
}

std::string inspect_report(const Episode& ep, const Segmentation& seg,
                           const GripperForceConfig& gripper, const std::string& head_camera) {
    if (seg.episode_id != ep.id)
        throw ValidationError("segmentation names episode \"" + seg.episode_id +
                              "\", expected \"" + ep.id + "\"");
    validate_segmentation(seg);
    const int T = ep.length();
    const auto primary = primary_relation(ep, head_camera);
    const std::vector<int> events = detect_gripper_events(ep, gripper);
    const auto clusters = dbscan_1d(events, gripper.dbscan_eps, gripper.dbscan_min_pts);

    std::ostringstream out;
    out << "episode " << ep.id << ": " << T << " frames @ " << ep.control_hz << " Hz\n";
    if (primary)
        out << "primary relation: " << primary->gripper_label << " | " << primary->object_label
            << " (" << primary->count_present() << "/" << T << " frames)\n";
    out << std::left << std::setw(4) << "#" << std::setw(14) << "span" << std::setw(11)
        << "label" << std::setw(7) << "len" << std::setw(10) << "mean_r" << "events\n";
    int covered = 0;
    for (size_t i = 0; i < seg.segments.size(); ++i) {
        const Segment& s = seg.segments[i];
        covered += s.length();
        double sum = 0.0;
        int count = 0;
        if (primary) {
            for (int t = s.start; t <= s.end && t < static_cast<int>(primary->values.size());
                 ++t) {
                if (primary->values[t]) {
                    sum += *primary->values[t];
                    ++count;
                }
            }
        }
        int events_inside = 0;
        for (int e : events)
            if (e >= s.start && e <= s.end) ++events_inside;
        std::ostringstream span;
        span << "[" << s.start << "," << s.end << "]";
        out << std::left << std::setw(4) << i << std::setw(14) << span.str() << std::setw(11)
            << to_string(s.label) << std::setw(7) << s.length();
        if (count > 0)
            out << std::setw(10) << std::fixed << std::setprecision(4) << (sum / count);
        else
            out << std::setw(10) << "-";
        out << events_inside << "\n";
        out.unsetf(std::ios::fixed);
    }
    for (size_t c = 0; c < clusters.size(); ++c) {
        const int lo = clusters[c].front();
        const int hi = clusters[c].back();
        out << "gripper cluster " << c << ": frames [" << lo << "," << hi << "], padded window ["
            << std::max(0, lo - gripper.pad) << "," << std::min(T - 1, hi + gripper.pad)
            << "]\n";
    }
    out << "coverage: " << std::fixed << std::setprecision(1) << (100.0 * covered / T) << "%\n";
    return out.str();
}

void write_inspect_svg(const Episode& ep, const Segmentation& seg,
                       const std::optional<RelationSeries>& relation,
                       const std::filesystem::path& path) {
    const int T = ep.length();
    const double width = 960.0, height = 240.0, margin = 30.0;
    const double plot_w = width - 2 * margin, plot_h = height - 2 * margin;
    const auto x_of = [&](double t) { return margin + plot_w * t / std::max(1, T - 1); };

    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write " + path.string());
    out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\""
        << height << "\">\n";
    out << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    for (const Segment& s : seg.segments) {
        const char* fill = s.label == Label::precision ? "#e57373" : "#81c784";
        out << "<rect x=\"" << x_of(s.start) << "\" y=\"" << margin << "\" width=\""
            << (x_of(s.end) - x_of(s.start) + plot_w / std::max(1, T - 1)) << "\" height=\""
            << plot_h << "\" fill=\"" << fill << "\" opacity=\"0.5\"/>\n";
    }
    if (relation) {
        double max_r = 0.0;
        for (const auto& v : relation->values)
            if (v && *v > max_r) max_r = *v;
        if (max_r > 0.0) {
            std::ostringstream points;
            bool open = false;
            for (int t = 0; t < static_cast<int>(relation->values.size()); ++t) {
                if (!relation->values[t]) {
                    if (open) out << "<polyline fill=\"none\" stroke=\"#1565c0\" points=\""
                                  << points.str() << "\"/>\n";
                    points.str("");
                    open = false;
                    continue;
                }
                points << x_of(t) << "," << (margin + plot_h * (1.0 - *relation->values[t] / max_r))
                       << " ";
                open = true;
            }
            if (open)
                out << "<polyline fill=\"none\" stroke=\"#1565c0\" points=\"" << points.str()
                    << "\"/>\n";
        }
    }
    out << "<text x=\"" << margin << "\" y=\"" << (height - 8)
        << "\" font-size=\"12\">precision=red casual=green r_t=blue, episode " << ep.id
        << "</text>\n";
    out << "</svg>\n";
}

} // namespace espada
