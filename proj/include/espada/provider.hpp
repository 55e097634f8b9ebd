// Copyright 2026 Espada contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "espada/dataset.hpp"
#include "espada/segmentation.hpp"

namespace espada {

struct PromptBudget {
    int max_chars = 0;
    int per_frame_chars = 0;
    int k_samples = 0;
};

struct PolicyHints {
    int min_segment_len = 8;
    int merge_gap = 5;
    int hysteresis = 3;
    int micro_len = 6;
    std::string parsimony = "prefer 3-4 segments unless strong evidence suggests otherwise";
};

struct ProviderRequest {
    std::string episode_id;
    int episode_len = 0;
    std::string task_summary;          // free-text task descriptor from an external summarizer
    nlohmann::json frames;             // sampled frame payloads (slimmed schema)
    PolicyHints policy_hints;
    PromptBudget budget;
};

struct ProviderConfig {
    std::string kind;                  // "file" | "http" | "mock" | "" (none)
    std::string path;                  // file: fixture path
    std::string url;                   // http: endpoint
    std::map<std::string, std::string> headers;
    int max_chars = 60000;
    int decimals = 3;
    int retry_attempts = 3;
    int retry_base_ms = 250;
    std::string log_dir;               // request/response audit log; empty = off

    bool configured() const { return !kind.empty(); }
};

ProviderConfig provider_config_from_json(const nlohmann::json& j);
nlohmann::json provider_config_to_json(const ProviderConfig& cfg);

/// Largest K with K * per_frame_chars <= max_chars (binary search), capped at
/// T; indices are K evenly spaced frames including 0 and T-1 when K >= 2.
std::vector<int> budget_sample(int T, int per_frame_chars, int max_chars);

/// Whitespace-free serialization with floats rounded to `decimals` places and
/// keys sorted. Idempotent.
std::string slim_json(const nlohmann::json& payload, int decimals = 3);

/// Samples frames under the character budget and packages center_3d /
/// relations_3d payloads plus policy hints.
ProviderRequest build_request(const Episode& ep, const std::string& task_summary,
                              const ProviderConfig& cfg, const std::string& head_camera = "head");

/// Strict-JSON response body -> validated segmentation. Out-of-range indices
/// are clipped with a warning; overlaps are protocol errors.
Segmentation parse_provider_response(const std::string& body, const std::string& episode_id,
                                     int T);

/// Dispatches on cfg.kind. http retries with exponential backoff before
/// failing; file reads a fixture; mock derives labels from relation trends.
Segmentation fetch_segmentation(const ProviderRequest& req, const ProviderConfig& cfg);

/// Deterministic test provider: casual where the primary relation rises
/// between consecutive sampled frames, precision otherwise.
Segmentation mock_segmentation(const ProviderRequest& req);

} // namespace espada
