// Copyright (c) 2026 vadstream contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <string>
#include <vector>

namespace vad {

/// Aggregates result.json files from run directories into plot data:
/// per-metric curves over tasks seen (mean and range over seeds), a
/// memory-vs-final-F1 scatter, and a per-strategy summary table. Plot images
/// are SVG; every plot's data also lands in a CSV.
void emit_report(const std::vector<std::string>& run_dirs, const std::string& out_dir);

}  // namespace vad
