// Copyright 2026 The AAD-DCE Authors
// SPDX-License-Identifier: Apache-2.0

#include "aad/ablation.hpp"

#include <atomic>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <mutex>
#include <thread>

#include "aad/error.hpp"

namespace aad::run {

std::string Cell::row_key() const {
  return std::string(agg::to_string(ensemble)) + "__" + std::string(train::to_string(adc)) + "__" +
         std::string(gen::to_string(arch));
}

std::string Cell::key() const { return row_key() + "__s" + std::to_string(seed); }

train::TrainConfig Cell::apply(const train::TrainConfig& base) const {
  train::TrainConfig c = base;
  c.ensemble = ensemble;
  c.adc = adc;
  c.generator.arch = arch;
  c.seed = seed;
  return c;
}

std::vector<Cell> ablation_cells(const AblationAxes& axes) {
  std::vector<Cell> out;
  for (auto e : axes.ensembles) {
    for (auto a : axes.adc) {
      for (auto g : axes.generators) {
        for (auto s : axes.seeds) out.push_back({e, a, g, s});
      }
    }
  }
  return out;
}

namespace {

void write_json(const std::filesystem::path& path, const nlohmann::json& j) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error(ErrorCode::IoFailure, "cannot create '" + path.string() + "'");
  out << j.dump(2) << '\n';
  if (!out) throw Error(ErrorCode::IoFailure, "write failed for '" + path.string() + "'");
}

Stat stat_of(const std::vector<double>& v) {
  Stat s;
  if (v.empty()) return s;
  for (double x : v) s.mean += x;
  s.mean /= static_cast<double>(v.size());
  double var = 0.0;
  for (double x : v) var += (x - s.mean) * (x - s.mean);
  s.std = std::sqrt(var / static_cast<double>(v.size()));
  return s;
}

nlohmann::json stat_json(const Stat& s) { return {{"mean", s.mean}, {"std", s.std}}; }

}  // namespace

CellResult run_cell(const train::TrainConfig& base, const Cell& cell,
                    const std::vector<data::MultimodalSample>& train_set,
                    const std::vector<data::MultimodalSample>& val_set, const std::filesystem::path& out_dir) {
  CellResult r;
  r.cell = cell;
  const train::TrainConfig cfg = cell.apply(base);
  r.config = train::to_json(cfg);
  try {
    train::TrainOptions opts;
    opts.out_dir = out_dir;
    const train::TrainResult tr = train::train(cfg, train_set, opts);
    for (const auto& e : tr.checkpoint.metrics.at("epochs")) r.epoch_g_l1.push_back(e.at("g_l1").get<double>());
    const int k = cfg.infer_refinements;
    r.trained = metrics::evaluate(tr.checkpoint, val_set, k);
    const train::Checkpoint untrained{cfg, train::TrainState::initialize(cfg), nlohmann::json::object()};
    r.untrained = metrics::evaluate(untrained, val_set, k);
    r.ok = true;
    if (!out_dir.empty()) {
      write_json(out_dir / "report.json", metrics::to_json(r.trained));
      write_json(out_dir / "untrained_report.json", metrics::to_json(r.untrained));
    }
  } catch (const std::exception& e) {
    r.ok = false;
    r.error = e.what();
  }
  return r;
}

std::vector<AblationRow> summarize_cells(const std::vector<CellResult>& cells) {
  std::vector<AblationRow> rows;
  std::map<std::string, std::size_t> index;
  std::map<std::string, std::vector<const CellResult*>> members;
  for (const auto& c : cells) {
    if (!c.ok) continue;
    const std::string key = c.cell.row_key();
    if (!index.count(key)) {
      index[key] = rows.size();
      AblationRow row;
      row.key = key;
      row.config = c.config;
      row.config.erase("seed");
      row.config["seeds"] = nlohmann::json::array();
      rows.push_back(std::move(row));
    }
    members[key].push_back(&c);
  }
  for (auto& row : rows) {
    std::vector<double> p, s, m, u;
    for (const CellResult* c : members[row.key]) {
      row.config["seeds"].push_back(c->cell.seed);
      p.push_back(c->trained.psnr.mean);
      s.push_back(c->trained.ssim.mean);
      m.push_back(c->trained.mae.mean);
      u.push_back(c->untrained.psnr.mean);
    }
    row.n_seeds = static_cast<int>(p.size());
    row.psnr = stat_of(p);
    row.ssim = stat_of(s);
    row.mae = stat_of(m);
    row.untrained_psnr = stat_of(u);
  }
  return rows;
}

nlohmann::json to_json(const CellResult& c) {
  nlohmann::json j = {{"key", c.cell.key()}, {"ok", c.ok}, {"config", c.config}};
  if (!c.ok) {
    j["error"] = c.error;
    return j;
  }
  j["trained"] = {{"psnr", c.trained.psnr.mean}, {"ssim", c.trained.ssim.mean}, {"mae", c.trained.mae.mean},
                  {"psnr_inf_count", c.trained.psnr.inf_count}};
  j["untrained"] = {{"psnr", c.untrained.psnr.mean}, {"ssim", c.untrained.ssim.mean}, {"mae", c.untrained.mae.mean}};
  j["epoch_g_l1"] = c.epoch_g_l1;
  return j;
}

nlohmann::json to_json(const AblationReport& r) {
  nlohmann::json cells = nlohmann::json::array();
  for (const auto& c : r.cells) cells.push_back(to_json(c));
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& row : r.rows) {
    rows.push_back({{"key", row.key},
                    {"config", row.config},
                    {"n_seeds", row.n_seeds},
                    {"psnr", stat_json(row.psnr)},
                    {"ssim", stat_json(row.ssim)},
                    {"mae", stat_json(row.mae)},
                    {"untrained_psnr", stat_json(row.untrained_psnr)}});
  }
  return {{"rows", rows}, {"cells", cells}, {"failed", r.failed}};
}

std::string to_markdown(const AblationReport& r) {
  std::string out = "| ensemble | adc | generator | seeds | PSNR (dB) | SSIM | MAE |\n|---|---|---|---|---|---|---|\n";
  char buf[256];
  for (const auto& row : r.rows) {
    std::snprintf(buf, sizeof buf, "| %s | %s | %s | %d | %.3f ± %.3f | %.4f ± %.4f | %.4f ± %.4f |\n",
                  row.config.at("ensemble").get<std::string>().c_str(), row.config.at("adc").get<std::string>().c_str(),
                  row.config.at("generator").at("arch").get<std::string>().c_str(), row.n_seeds, row.psnr.mean,
                  row.psnr.std, row.ssim.mean, row.ssim.std, row.mae.mean, row.mae.std);
    out += buf;
  }
  for (const auto& f : r.failed) out += "\nfailed: " + f;
  return out;
}

AblationReport run_ablation(const train::TrainConfig& base, const AblationAxes& axes,
                            const std::vector<data::MultimodalSample>& train_set,
                            const std::vector<data::MultimodalSample>& val_set, const AblationOptions& options) {
  const std::vector<Cell> cells = ablation_cells(axes);
  if (cells.empty()) throw Error(ErrorCode::InvalidConfig, "ablation: empty cross product");
  AblationReport report;
  report.cells.resize(cells.size());
  std::vector<bool> done(cells.size(), false);
  std::mutex mu;

  auto flush = [&] {
    if (options.out_dir.empty()) return;
    AblationReport partial;
    for (std::size_t i = 0; i < cells.size(); ++i) {
      if (done[i]) partial.cells.push_back(report.cells[i]);
    }
    partial.rows = summarize_cells(partial.cells);
    for (const auto& c : partial.cells) {
      if (!c.ok) partial.failed.push_back(c.cell.key());
    }
    write_json(options.out_dir / "ablation_partial.json", to_json(partial));
  };

  if (!options.out_dir.empty()) std::filesystem::create_directories(options.out_dir);
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < cells.size(); i = next++) {
      const std::filesystem::path dir = options.out_dir.empty() ? std::filesystem::path{}
                                                                 : options.out_dir / "cells" / cells[i].key();
      CellResult r = run_cell(base, cells[i], train_set, val_set, dir);
      std::lock_guard lock(mu);
      report.cells[i] = std::move(r);
      done[i] = true;
      flush();
      if (options.on_cell) options.on_cell(report.cells[i]);
    }
  };
  const int n = std::max(1, std::min<int>(options.parallel, static_cast<int>(cells.size())));
  if (n == 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (int t = 0; t < n; ++t) pool.emplace_back(worker);
  }
  report.rows = summarize_cells(report.cells);
  for (const auto& c : report.cells) {
    if (!c.ok) report.failed.push_back(c.cell.key());
  }
  if (!options.out_dir.empty()) {
    write_json(options.out_dir / "ablation.json", to_json(report));
    std::ofstream md(options.out_dir / "ablation.md", std::ios::trunc);
    md << to_markdown(report) << '\n';
  }
  return report;
}

}  // namespace aad::run
