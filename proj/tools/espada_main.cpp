// Copyright 2026 Espada contributors
// SPDX-License-Identifier: Apache-2.0
//
// espada: offline acceleration of robot-demonstration datasets.
// Subcommands: validate, relate, segment, transfer, refine, accelerate,
// inspect, pipeline.

#include <filesystem>
#include <iostream>
#include <optional>

#include <CLI11.hpp>

#include "espada/dtw.hpp"
#include "espada/errors.hpp"
#include "espada/features.hpp"
#include "espada/pipeline.hpp"

namespace fs = std::filesystem;
using namespace espada;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitDomain = 1; // validation / domain failures
constexpr int kExitIo = 2;     // environment / I/O failures

std::string stem_of(const fs::path& episode_file) {
    std::string name = episode_file.filename().string();
    const std::string suffix = ".episode.jsonl";
    if (name.size() > suffix.size() && name.ends_with(suffix))
        name.resize(name.size() - suffix.size());
    return name;
}

int run_validate(const fs::path& dir) {
    const ValidateReport report = cmd_validate(dir);
    if (report.entries.empty()) {
        log_warning("no .episode.jsonl files in " + dir.string());
        std::cout << "0 episodes OK\n";
        return kExitOk;
    }
    int ok = 0;
    for (const auto& entry : report.entries) {
        if (entry.ok) {
            ++ok;
            std::cout << "PASS " << entry.file << "\n";
        } else {
            std::cout << "FAIL " << entry.file << ": " << entry.error << "\n";
        }
    }
    std::cout << ok << "/" << report.entries.size() << " episodes OK\n";
    return report.all_ok ? kExitOk : kExitDomain;
}

int run_relate(const fs::path& dir, const fs::path& out_dir, bool export_features) {
    fs::create_directories(out_dir);
    int wrote = 0;
    for (const auto& file : list_episode_files(dir)) {
        const Episode ep = read_episode(file);
        if (export_features) {
            const FeatureSeries fs = build_features(ep);
            write_feature_series(fs, out_dir / (stem_of(file) + ".features.bin"),
                                 out_dir / (stem_of(file) + ".features.json"));
        }
        const auto relations = all_relations(ep);
        if (relations.empty()) {
            log_warning("episode " + ep.id + " has no trackable relations, skipped");
            continue;
        }
        write_relations(relations, out_dir / (stem_of(file) + ".relations.json"));
        ++wrote;
    }
    std::cout << "wrote " << wrote << " relation files to " << out_dir.string() << "\n";
    return kExitOk;
}

int run_segment(const PipelineConfig& cfg, const fs::path& episode_file, const fs::path& out) {
    if (!cfg.provider.configured())
        throw ValidationError("no segmentation source: configure a provider");
    const Episode ep = read_episode(episode_file);
    const ProviderRequest req = build_request(ep, cfg.task_summary, cfg.provider,
                                              cfg.head_camera);
    Segmentation seg = fetch_segmentation(req, cfg.provider);
    seg.episode_id = ep.id;
    write_segmentation(seg, out);
    std::cout << "wrote " << out.string() << " (" << seg.segments.size() << " segments, K="
              << req.budget.k_samples << " sampled frames)\n";
    return kExitOk;
}

int run_transfer(const PipelineConfig& cfg, const fs::path& source_episode,
                 const fs::path& source_segments, const std::vector<fs::path>& targets,
                 const fs::path& out_dir, bool dump_paths) {
    fs::create_directories(out_dir);
    validate(cfg.transfer);
    const Episode ep0 = read_episode(source_episode);
    const Segmentation seg0 = read_segmentation(source_segments);
    const FeatureSeries f0 = build_features(ep0);
    for (const auto& target : targets) {
        const Episode epk = read_episode(target);
        const FeatureSeries fk = build_features(epk);
        const int b = compute_band(f0.matrix.rows, fk.matrix.rows, cfg.transfer.rho);
        const AlignmentPath path = banded_dtw(f0.matrix, fk.matrix, cfg.transfer.rho);
        const AlignmentMap map = path_to_map(path, f0.matrix.rows, fk.matrix.rows);
        Segmentation transferred = transfer_labels(seg0, map, f0, fk, cfg.transfer);
        transferred.episode_id = epk.id;
        write_segmentation(transferred, out_dir / (stem_of(target) + ".segments.json"));
        if (dump_paths)
            write_path(path, cfg.transfer.rho, b,
                       out_dir / (stem_of(source_episode) + "-" + stem_of(target) +
                                  ".path.json"));
        std::cout << stem_of(target) << ": " << transferred.segments.size()
                  << " segments, dtw cost " << path.cost << "\n";
    }
    return kExitOk;
}

int run_refine(const PipelineConfig& cfg, const fs::path& episode_file,
               const fs::path& segments_file, const fs::path& out) {
    const Episode ep = read_episode(episode_file);
    const Segmentation raw = read_segmentation(segments_file);
    const auto primary = primary_relation(ep, cfg.head_camera);
    const Segmentation refined =
        refine_episode0(ep, raw, primary, cfg.stability, cfg.gripper);
    write_segmentation(refined, out);
    std::cout << "wrote " << out.string() << " (" << refined.segments.size() << " segments)\n";
    return kExitOk;
}

int run_accelerate(const PipelineConfig& cfg, const fs::path& dir, const fs::path& segments_dir,
                   const fs::path& out_dir) {
    fs::create_directories(out_dir);
    validate(cfg.plan);
    std::vector<Episode> episodes;
    std::vector<Segmentation> segs;
    std::vector<std::string> stems;
    for (const auto& file : list_episode_files(dir)) {
        episodes.push_back(read_episode(file));
        stems.push_back(stem_of(file));
        const fs::path seg_path = segments_dir / (stems.back() + ".segments.json");
        if (!fs::exists(seg_path))
            throw ValidationError("missing segmentation " + seg_path.string());
        segs.push_back(read_segmentation(seg_path));
    }
    const auto compiled = compile_dataset(episodes, segs, cfg.plan, cfg.jobs);
    nlohmann::ordered_json manifest_eps = nlohmann::ordered_json::array();
    for (size_t i = 0; i < compiled.size(); ++i) {
        nlohmann::ordered_json replicas = nlohmann::ordered_json::array();
        long frames = 0;
        for (const ReplicaEpisode& rep : compiled[i]) {
            const std::string file =
                stems[i] + ".r" + std::to_string(rep.replica_index) + ".episode.jsonl";
            write_episode(rep.episode, out_dir / file);
            frames += rep.episode.length();
            replicas.push_back({{"id", rep.episode.id}, {"file", file},
                                {"frames", rep.episode.length()}});
        }
        const int k_prime = rescale_horizon(episodes[i], cfg.plan.chunk_horizon,
                                            compiled[i].front().source_indices,
                                            cfg.plan.horizon_mode);
        const double ratio = episodes[i].length() * compiled[i].size() /
                             static_cast<double>(frames);
        manifest_eps.push_back({{"id", episodes[i].id},
                                {"frames", episodes[i].length()},
                                {"k_prime", k_prime},
                                {"compression_ratio", ratio},
                                {"replicas", std::move(replicas)}});
        std::cout << episodes[i].id << ": " << compiled[i].size() << " replicas, ratio "
                  << ratio << ", K'=" << k_prime << "\n";
    }
    nlohmann::ordered_json manifest{{"plan",
                                     {{"n_precision", cfg.plan.n_precision},
                                      {"n_casual", cfg.plan.n_casual},
                                      {"chunk_horizon", cfg.plan.chunk_horizon},
                                      {"horizon_mode", to_string(cfg.plan.horizon_mode)}}},
                                    {"episodes", std::move(manifest_eps)}};
    std::ofstream out(out_dir / "manifest.json", std::ios::binary);
    if (!out) throw IoError("cannot write manifest");
    out << manifest.dump(2) << "\n";
    return kExitOk;
}

int run_inspect(const PipelineConfig& cfg, const fs::path& episode_file,
                const fs::path& segments_file, const std::optional<fs::path>& svg) {
    const Episode ep = read_episode(episode_file);
    const Segmentation seg = read_segmentation(segments_file);
    std::cout << inspect_report(ep, seg, cfg.gripper, cfg.head_camera);
    if (svg) {
        write_inspect_svg(ep, seg, primary_relation(ep, cfg.head_camera), *svg);
        std::cout << "wrote " << svg->string() << "\n";
    }
    return kExitOk;
}

int run_full_pipeline(const PipelineConfig& cfg) {
    const PipelineResult result = run_pipeline(cfg);
    const auto& totals = result.manifest.at("totals");
    std::cout << "pipeline complete: " << totals.at("episodes").get<int>() << " episodes, "
              << result.written.size() << " files, compression "
              << totals.at("compression_ratio").get<double>() << "x, K'="
              << totals.at("k_prime").get<int>() << "\n";
    std::cout << "manifest: " << (cfg.out_dir / "manifest.json").string() << "\n";
    return kExitOk;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"espada: acceleration-aware robot demonstration dataset compiler"};
    app.require_subcommand(1);

    std::string config_path;
    int jobs = 0;
    unsigned seed = 0;
    app.add_option("--config", config_path, "pipeline config JSON");
    app.add_option("--jobs", jobs, "worker threads (0 = all cores)");
    app.add_option("--seed", seed, "seed for data-generation utilities (pipeline itself is deterministic)");

    std::string dir, out_dir = ".", episode_file, segments_file, segments_dir, out_file;
    std::vector<std::string> targets;
    std::string svg_path, task_summary, horizon_mode;
    bool dump_paths = false;
    double rho = 0.0;
    int snap_window = -1, n_precision = 0, n_casual = 0, chunk_horizon = 0;
    int min_segment_len = -1, merge_gap = -1, hysteresis = -1, micro_len = -1;

    auto* validate_cmd = app.add_subcommand("validate", "check every episode file in a directory");
    validate_cmd->add_option("dir", dir, "dataset directory")->required();

    auto* relate_cmd = app.add_subcommand("relate", "export gripper-object relation series");
    relate_cmd->add_option("dir", dir, "dataset directory")->required();
    relate_cmd->add_option("--out-dir", out_dir, "output directory");
    bool export_features = false;
    relate_cmd->add_flag("--export-features", export_features,
                         "also write .features.bin/.features.json per episode");

    auto* segment_cmd = app.add_subcommand("segment", "query the provider for episode-0 labels");
    segment_cmd->add_option("episode", episode_file, "episode file")->required();
    segment_cmd->add_option("--out", out_file, "output segments.json")->required();
    segment_cmd->add_option("--task-summary", task_summary, "task descriptor text");

    auto* transfer_cmd = app.add_subcommand("transfer", "propagate labels via banded DTW");
    transfer_cmd->add_option("source", episode_file, "annotated episode")->required();
    transfer_cmd->add_option("segments", segments_file, "annotated segments.json")->required();
    transfer_cmd->add_option("targets", targets, "target episode files")->required();
    transfer_cmd->add_option("--out-dir", out_dir, "output directory");
    transfer_cmd->add_option("--rho", rho, "Sakoe-Chiba band ratio");
    transfer_cmd->add_option("--snap-window", snap_window, "boundary snap window W");
    transfer_cmd->add_flag("--dump-paths", dump_paths, "write .path.json debug dumps");

    auto* refine_cmd =
        app.add_subcommand("refine", "stability + coverage completion + gripper forcing");
    refine_cmd->alias("segment-refine");
    refine_cmd->add_option("episode", episode_file, "episode file")->required();
    refine_cmd->add_option("segments", segments_file, "segments.json to refine")->required();
    refine_cmd->add_option("--out", out_file, "output segments.json")->required();
    refine_cmd->add_option("--min-segment-len", min_segment_len, "L_min");
    refine_cmd->add_option("--merge-gap", merge_gap, "G_min");
    refine_cmd->add_option("--hysteresis", hysteresis, "label switch persistence");
    refine_cmd->add_option("--micro-len", micro_len, "micro-oscillation length");

    auto* accel_cmd = app.add_subcommand("accelerate", "compile the acceleration-aware dataset");
    accel_cmd->add_option("dir", dir, "dataset directory")->required();
    accel_cmd->add_option("--segments-dir", segments_dir, "directory of final segmentations")
        ->required();
    accel_cmd->add_option("--out-dir", out_dir, "output directory");
    accel_cmd->add_option("--n-precision", n_precision, "precision factor");
    accel_cmd->add_option("--n-casual", n_casual, "casual factor");
    accel_cmd->add_option("--chunk-horizon", chunk_horizon, "policy chunk horizon K");
    accel_cmd->add_option("--horizon-mode", horizon_mode, "half|geometric");

    auto* inspect_cmd = app.add_subcommand("inspect", "per-segment report for one episode");
    inspect_cmd->add_option("episode", episode_file, "episode file")->required();
    inspect_cmd->add_option("segments", segments_file, "segments.json")->required();
    inspect_cmd->add_option("--svg", svg_path, "write a label/r_t timeline SVG");

    auto* pipeline_cmd = app.add_subcommand("pipeline", "run the full pipeline");
    pipeline_cmd->add_option("--dataset-dir", dir, "dataset directory");
    pipeline_cmd->add_option("--out-dir", out_dir, "output directory");

    for (CLI::App* sub : app.get_subcommands({})) sub->fallthrough();

    CLI11_PARSE(app, argc, argv);

    try {
        PipelineConfig cfg;
        if (!config_path.empty()) cfg = load_pipeline_config(config_path);
        // Flags set on the command line win over config-file values.
        if (rho > 0.0) cfg.transfer.rho = rho;
        if (snap_window >= 0) cfg.transfer.snap_window = snap_window;
        if (n_precision > 0) cfg.plan.n_precision = n_precision;
        if (n_casual > 0) cfg.plan.n_casual = n_casual;
        if (chunk_horizon > 0) cfg.plan.chunk_horizon = chunk_horizon;
        if (min_segment_len >= 0) cfg.stability.min_segment_len = min_segment_len;
        if (merge_gap >= 0) cfg.stability.merge_gap = merge_gap;
        if (hysteresis >= 0) cfg.stability.hysteresis = hysteresis;
        if (micro_len >= 0) cfg.stability.micro_len = micro_len;
        if (!task_summary.empty()) cfg.task_summary = task_summary;
        if (!horizon_mode.empty()) cfg.plan.horizon_mode = horizon_mode_from_string(horizon_mode);
        if (jobs != 0) cfg.jobs = jobs;

        if (validate_cmd->parsed()) return run_validate(dir);
        if (relate_cmd->parsed()) return run_relate(dir, out_dir, export_features);
        if (segment_cmd->parsed()) return run_segment(cfg, episode_file, out_file);
        if (transfer_cmd->parsed()) {
            std::vector<fs::path> target_paths(targets.begin(), targets.end());
            return run_transfer(cfg, episode_file, segments_file, target_paths, out_dir,
                                dump_paths);
        }
        if (refine_cmd->parsed()) return run_refine(cfg, episode_file, segments_file, out_file);
        if (accel_cmd->parsed()) return run_accelerate(cfg, dir, segments_dir, out_dir);
        if (inspect_cmd->parsed()) {
            std::optional<fs::path> svg;
            if (!svg_path.empty()) svg = svg_path;
            return run_inspect(cfg, episode_file, segments_file, svg);
        }
        if (pipeline_cmd->parsed()) {
            if (!dir.empty()) cfg.dataset_dir = dir;
            if (pipeline_cmd->count("--out-dir") || cfg.out_dir.empty()) cfg.out_dir = out_dir;
            if (cfg.dataset_dir.empty())
                throw ValidationError("pipeline needs --dataset-dir or a config file");
            return run_full_pipeline(cfg);
        }
    } catch (const IoError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitIo;
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitDomain;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitDomain;
    }
    return kExitOk;
}
