// Copyright 2026 The AAD-DCE Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <vector>

#include <nlohmann/json.hpp>

#include "aad/aggregation.hpp"
#include "aad/generator.hpp"
#include "aad/training.hpp"

namespace aad::run {

/// Run-config and metrics-report schemas (the same documents as docs/*.schema.json).
const nlohmann::json& run_config_schema();
const nlohmann::json& metrics_report_schema();

/// Checks `doc` against a JSON-schema subset: type, enum, required,
/// properties, additionalProperties: false, items, minItems, minimum,
/// maximum, exclusiveMinimum, exclusiveMaximum. Throws SchemaError naming
/// the offending field as a JSON pointer.
void validate_schema(const nlohmann::json& doc, const nlohmann::json& schema);

struct AblationAxes {
  std::vector<agg::EnsembleMode> ensembles;
  std::vector<train::AdcMode> adc;
  std::vector<gen::Arch> generators;
  std::vector<std::uint64_t> seeds;
};

struct RunConfig {
  train::TrainConfig train;
  std::filesystem::path manifest;
  std::filesystem::path val_manifest;  // empty when absent
  std::filesystem::path out;           // empty when absent
  int checkpoint_every = 0;
  std::optional<AblationAxes> ablation;
};

/// Validates against the schema, then builds the config. Relative paths
/// resolve against `base_dir`.
RunConfig parse_run_config(const nlohmann::json& doc, const std::filesystem::path& base_dir);
RunConfig load_run_config(const std::filesystem::path& path);

}  // namespace aad::run
