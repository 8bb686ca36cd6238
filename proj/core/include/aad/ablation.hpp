// Copyright 2026 The AAD-DCE Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "aad/metrics.hpp"
#include "aad/run_config.hpp"

namespace aad::run {

struct Cell {
  agg::EnsembleMode ensemble = agg::EnsembleMode::embed;
  train::AdcMode adc = train::AdcMode::real;
  gen::Arch arch = gen::Arch::resnet_encdec;
  std::uint64_t seed = 0;

  /// "<ensemble>__<adc>__<arch>__s<seed>"
  std::string key() const;
  /// Key without the seed; cells sharing it form one report row.
  std::string row_key() const;
  train::TrainConfig apply(const train::TrainConfig& base) const;
};

/// Cross product in axis order: ensembles, adc, generators, seeds.
std::vector<Cell> ablation_cells(const AblationAxes& axes);

struct CellResult {
  Cell cell;
  bool ok = false;
  std::string error;
  nlohmann::json config;  // exact train config of the cell
  metrics::MetricsReport trained;
  metrics::MetricsReport untrained;
  std::vector<double> epoch_g_l1;  // per-epoch mean generator L1
};

struct Stat {
  double mean = 0;
  double std = 0;
};

struct AblationRow {
  std::string key;
  nlohmann::json config;  // cell config without the seed, plus the seed list
  int n_seeds = 0;
  Stat psnr;
  Stat ssim;
  Stat mae;
  Stat untrained_psnr;
};

struct AblationReport {
  std::vector<CellResult> cells;
  std::vector<AblationRow> rows;
  std::vector<std::string> failed;

  bool ok() const { return failed.empty(); }
};

struct AblationOptions {
  std::filesystem::path out_dir;  // empty: nothing written
  int parallel = 1;               // concurrent cells
  std::function<void(const CellResult&)> on_cell;
};

/// Trains and evaluates one cell. Failures are captured in the result.
CellResult run_cell(const train::TrainConfig& base, const Cell& cell, const std::vector<data::MultimodalSample>& train_set,
                    const std::vector<data::MultimodalSample>& val_set, const std::filesystem::path& out_dir = {});

/// Rows from finished cells, in first-appearance order; failed cells are skipped.
std::vector<AblationRow> summarize_cells(const std::vector<CellResult>& cells);

AblationReport run_ablation(const train::TrainConfig& base, const AblationAxes& axes,
                            const std::vector<data::MultimodalSample>& train_set,
                            const std::vector<data::MultimodalSample>& val_set, const AblationOptions& options = {});

nlohmann::json to_json(const CellResult& c);
nlohmann::json to_json(const AblationReport& r);
std::string to_markdown(const AblationReport& r);

}  // namespace aad::run
