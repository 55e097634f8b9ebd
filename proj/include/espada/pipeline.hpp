// Copyright 2026 Espada contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "espada/dataset.hpp"
#include "espada/downsample.hpp"
#include "espada/geometry.hpp"
#include "espada/provider.hpp"
#include "espada/segmentation.hpp"
#include "espada/transfer.hpp"

namespace espada {

struct PipelineConfig {
    std::filesystem::path dataset_dir;
    std::filesystem::path out_dir;
    std::string head_camera = "head";
    std::string task_summary;
    TransferConfig transfer;
    StabilityConfig stability;
    GripperForceConfig gripper;
    AccelPlan plan;
    ProviderConfig provider;
    int jobs = 0;
};

PipelineConfig load_pipeline_config(const std::filesystem::path& path);
void merge_config_json(PipelineConfig& cfg, const nlohmann::json& j);
nlohmann::ordered_json config_to_json(const PipelineConfig& cfg);

/// FNV-1a over the canonical config serialization (timestamp-free).
std::string config_hash(const PipelineConfig& cfg);

struct ValidateEntry {
    std::string file;
    bool ok = false;
    std::string error;
};

struct ValidateReport {
    std::vector<ValidateEntry> entries;
    bool all_ok = true;
};

ValidateReport cmd_validate(const std::filesystem::path& dir);

/// Episode files of a directory in lexicographic order; the first one is
/// episode 0 (the annotated episode).
std::vector<std::filesystem::path> list_episode_files(const std::filesystem::path& dir);

/// Episode-0 refinement: coverage completion over the primary relation
/// (stability re-applied inside), then gripper-event precision forcing.
Segmentation refine_episode0(const Episode& ep, const Segmentation& raw,
                             const std::optional<RelationSeries>& primary,
                             const StabilityConfig& stability, const GripperForceConfig& gripper);

/// Target-episode finalization after transfer: uncovered frames default to
/// precision, then gripper forcing is re-applied on this episode's own events.
Segmentation finalize_transferred(const Episode& ep, const Segmentation& transferred,
                                  const GripperForceConfig& gripper);

struct PipelineResult {
    nlohmann::ordered_json manifest;
    std::vector<std::filesystem::path> written;
};

/// relate -> episode-0 segmentation -> refinement -> features -> banded DTW
/// transfer -> per-episode forcing -> replicate-before-downsample compilation.
/// Any stage failure removes partial outputs and rethrows with stage context.
PipelineResult run_pipeline(const PipelineConfig& cfg);

/// Per-segment table (span, label, length, mean r_t, events inside), gripper
/// clusters with padded windows, and a coverage line.
std::string inspect_report(const Episode& ep, const Segmentation& seg,
                           const GripperForceConfig& gripper, const std::string& head_camera);

/// Label timeline with the primary r_t series drawn over it.
void write_inspect_svg(const Episode& ep, const Segmentation& seg,
                       const std::optional<RelationSeries>& relation,
                       const std::filesystem::path& path);

} // namespace espada
