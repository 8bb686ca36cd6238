// Copyright 2026 The AAD-DCE Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <fstream>

#include "aad/ablation.hpp"
#include "fixtures.hpp"
#include "test_util.hpp"

namespace aad::run {
namespace {

TEST(Cells, CrossProductOrderAndKeys) {
  AblationAxes axes;
  axes.ensembles = {agg::EnsembleMode::embed, agg::EnsembleMode::global_only};
  axes.adc = {train::AdcMode::real};
  axes.generators = {gen::Arch::resnet_encdec};
  axes.seeds = {1, 2, 3};
  const auto cells = ablation_cells(axes);
  ASSERT_EQ(cells.size(), 6u);
  EXPECT_EQ(cells[0].key(), "embed__real__resnet_encdec__s1");
  EXPECT_EQ(cells[5].key(), "global_only__real__resnet_encdec__s3");
  EXPECT_EQ(cells[0].row_key(), cells[2].row_key());
  EXPECT_NE(cells[0].row_key(), cells[3].row_key());
  const auto cfg = cells[4].apply(test::tiny_config());
  EXPECT_EQ(cfg.ensemble, agg::EnsembleMode::global_only);
  EXPECT_EQ(cfg.seed, 2u);
  EXPECT_EQ(cfg.lr, test::tiny_config().lr);
}

TEST(Ablation, RowsAggregateSeedsAndEchoConfig) {
  AblationAxes axes;
  axes.ensembles = {agg::EnsembleMode::embed, agg::EnsembleMode::global_only};
  axes.adc = {train::AdcMode::real};
  axes.generators = {gen::Arch::resnet_encdec};
  axes.seeds = {1, 2, 3};
  const auto train_set = test::phantoms(4);
  const auto val_set = test::phantoms(2, 1, data::Split::val);
  const auto dir = test::scratch_dir("ablation");
  AblationOptions opt;
  opt.out_dir = dir;
  opt.parallel = 2;
  const AblationReport r = run_ablation(test::tiny_config(), axes, train_set, val_set, opt);
  ASSERT_TRUE(r.ok()) << r.failed.front();
  ASSERT_EQ(r.cells.size(), 6u);
  ASSERT_EQ(r.rows.size(), 2u);
  for (const auto& row : r.rows) {
    EXPECT_EQ(row.n_seeds, 3);
    EXPECT_EQ(row.config.at("seeds"), nlohmann::json({1, 2, 3}));
    EXPECT_FALSE(row.config.contains("seed"));
    EXPECT_EQ(row.config.at("lr"), test::tiny_config().lr);
  }
  double mean = 0;
  for (int i = 0; i < 3; ++i) mean += r.cells[i].trained.ssim.mean / 3;
  EXPECT_NEAR(r.rows[0].ssim.mean, mean, 1e-12);
  EXPECT_TRUE(std::filesystem::exists(dir / "ablation.json"));
  EXPECT_TRUE(std::filesystem::exists(dir / "ablation.md"));
  EXPECT_TRUE(std::filesystem::exists(dir / "cells" / r.cells[0].cell.key() / "report.json"));
  EXPECT_NE(to_markdown(r).find("global_only"), std::string::npos);

  // Any cell replays bit-exactly on its own.
  const CellResult again = run_cell(test::tiny_config(), r.cells[4].cell, train_set, val_set);
  EXPECT_EQ(metrics::to_json(again.trained), metrics::to_json(r.cells[4].trained));
}

TEST(Ablation, FailedCellsAreReported) {
  AblationAxes axes;
  axes.ensembles = {agg::EnsembleMode::embed};
  axes.adc = {train::AdcMode::real};
  axes.generators = {gen::Arch::resnet_encdec};
  axes.seeds = {1};
  const auto odd = test::phantoms(2, 1, data::Split::train, 30, 16);
  const AblationReport r = run_ablation(test::tiny_config(), axes, odd, odd);
  EXPECT_FALSE(r.ok());
  EXPECT_TRUE(r.rows.empty());
  EXPECT_NE(r.cells[0].error.find("ConfigGeometryMismatch"), std::string::npos);
}

}  // namespace
}  // namespace aad::run
