// Copyright (c) 2026 vadstream contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <string>

#include "json.hpp"
#include "vadstream/engine.hpp"

namespace vad {

/// Small 3-stage conv net (stride-2 stage heads, channel doubling) for
/// desk-scale runs: 16/32/64 channels, split after stage 1, taps at 2 and 3.
BackboneSpec desk_backbone_spec(std::uint64_t seed, int input_size = 64);

ExperimentConfig config_from_json(const nlohmann::json& j);
ExperimentConfig load_config(const std::string& path);

/// FNV-1a content hash used in run manifests.
std::uint64_t content_hash(const std::string& bytes);

}  // namespace vad
