// Copyright 2026 The AAD-DCE Authors
// SPDX-License-Identifier: Apache-2.0

// Acceptance gate. Prints one PASS/FAIL line per criterion and exits nonzero
// when a criterion fails that is not listed in --expect-fail.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "aad/ablation.hpp"
#include "aad/aggregation.hpp"
#include "aad/attention_discriminator.hpp"
#include "aad/metrics.hpp"
#include "aad/ops.hpp"
#include "aad/phantom.hpp"
#include "aad/training.hpp"
#include "fixtures.hpp"
#include "test_util.hpp"

namespace fs = std::filesystem;
using namespace aad;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

struct Verdict {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

// ---------------------------------------------------------------------------
// Gradient suite

Verdict gradient_suite() {
  const auto t0 = Clock::now();
  std::size_t checked = 0;
  std::size_t failed = 0;
  std::string worst;
  std::size_t max_params = 0;
  for (gen::Arch arch : {gen::Arch::resnet_encdec, gen::Arch::unet}) {
    gen::GeneratorConfig gc;
    gc.arch = arch;
    gc.base_width = 2;
    gc.depth = 1;
    gc.n_res_blocks = 1;
    ad::AdConfig ac;
    ac.n_c = 2;
    ac.trunk_widths = {2};
    ac.att_depth = 1;
    nn::ParamSet<double> gp = gen::build_generator(gc, 11).cast<double>();
    nn::ParamSet<double> ap = agg::build_aad(ac, 12).params.cast<double>();
    max_params = std::max(max_params, nn::param_count(gp) + nn::param_count(ap));
    Rng rng(13);
    test::jitter_biases(gp, rng);
    test::jitter_biases(ap, rng);
    const auto x = test::random_tensor({2, 3, 8, 8}, rng, 0, 1);
    const auto y = test::random_tensor({2, 1, 8, 8}, rng, 0, 1);
    const std::vector<data::RoiRect> rois{{2, 2, 4, 4}, {0, 4, 4, 4}};

    auto d_build = [&](nn::Graph<double>& g) {
      const nn::Var y_hat = gen::generator_graph(g, gc, gp, g.constant(x), false);
      const nn::Var fake = g.constant(g.value(y_hat));
      return train::d_loss_graph(g, ac, ap, g.constant(y), fake, rois, true).loss;
    };
    auto g_build = [&](nn::Graph<double>& g) {
      const nn::Var y_hat = gen::generator_graph(g, gc, gp, g.constant(x), true);
      return train::g_loss_graph(g, ac, ap, y_hat, g.constant(y), rois, 10.0, false).total;
    };
    for (const auto& r : {test::check_param_grads(ap, d_build), test::check_param_grads(gp, g_build)}) {
      checked += r.checked;
      failed += r.failed;
      if (r.failed && worst.empty()) worst = std::string(gen::to_string(arch)) + " " + r.worst;
    }
  }
  const double secs = seconds_since(t0);
  const bool pass = failed == 0 && max_params < 5000 && secs < 60.0;
  return {pass, fmt("%zu/%zu entries outside rtol 1e-3 / atol 1e-6, largest stack %zu params, %.1f s (limit 60 s)%s%s",
                    failed, checked, max_params, secs, worst.empty() ? "" : "; worst ", worst.c_str())};
}

// ---------------------------------------------------------------------------
// Residual identities

Verdict identity_suite() {
  Rng rng(21);
  int violations = 0;
  for (int trial = 0; trial < 20; ++trial) {
    const auto x = test::random_image(3, 16, 16, rng, -2, 2);
    if (train::rhp_infuse(x, ad::AttentionMap(16, 16)) != x) ++violations;
  }
  for (int trial = 0; trial < 5; ++trial) {
    const ad::AdBlock b = ad::build_ad_block(ad::AdConfig{}, "aad/global", rng.next());
    nn::Tensor<float> y({2, 1, 32, 32});
    for (std::size_t i = 0; i < y.size(); ++i) y[i] = static_cast<float>(rng.uniform());
    nn::Graph<float> g;
    const nn::Tensor<float> pooled = g.value(nn::global_avg_pool(g, g.constant(ad::trunk_forward(b, y))));
    if (ad::ad_forward(b, y, true).embedding != pooled) ++violations;
  }
  const auto cfg = test::tiny_config();
  const train::Checkpoint ck{cfg, train::TrainState::initialize(cfg), {}};
  train::InferOptions zero;
  zero.zero_attention = true;
  for (const auto& s : test::phantoms(5, 22)) {
    if (train::infer(ck, s.x, s.roi, 1, zero).prediction != train::infer(ck, s.x, s.roi, 0).prediction) ++violations;
  }
  return {violations == 0, fmt("%d exact-equality violations over 20 rhp, 5 embedding and 5 inference cases", violations)};
}

// ---------------------------------------------------------------------------
// Aggregation

Verdict aggregation_suite() {
  int violations = 0;
  const ad::AttentionMap g(2, 2, 0.2f);
  const ad::AttentionMap l(1, 1, 0.8f);
  const data::RoiRect roi{1, 1, 2, 2};
  const std::pair<agg::EnsembleMode, float> table[] = {{agg::EnsembleMode::global_only, 0.2f},
                                                       {agg::EnsembleMode::multiply, 0.2f * 0.8f},
                                                       {agg::EnsembleMode::add, 1.0f},
                                                       {agg::EnsembleMode::embed, 0.8f}};
  for (const auto& [mode, inside] : table) {
    const ad::AttentionMap m = agg::aggregate_attention(g, l, roi, 4, 4, mode);
    for (int i = 0; i < 4; ++i) {
      for (int j = 0; j < 4; ++j) {
        const bool in = i >= 1 && i < 3 && j >= 1 && j < 3;
        if (m.at(i, j) != (in ? inside : 0.2f)) ++violations;
      }
    }
  }
  const int table_violations = violations;

  Rng rng(31);
  const agg::EnsembleMode modes[] = {agg::EnsembleMode::global_only, agg::EnsembleMode::multiply,
                                     agg::EnsembleMode::add, agg::EnsembleMode::embed};
  for (int draw = 0; draw < 1000; ++draw) {
    const int H = 4 + static_cast<int>(rng.below(61));
    const int W = 4 + static_cast<int>(rng.below(61));
    const int rh = 1 + static_cast<int>(rng.below(H));
    const int rw = 1 + static_cast<int>(rng.below(W));
    const data::RoiRect r{static_cast<int>(rng.below(H - rh + 1)), static_cast<int>(rng.below(W - rw + 1)), rh, rw};
    ad::AttentionMap mg(1 + static_cast<int>(rng.below(32)), 1 + static_cast<int>(rng.below(32)));
    ad::AttentionMap ml(1 + static_cast<int>(rng.below(16)), 1 + static_cast<int>(rng.below(16)));
    for (float& v : mg.values) v = static_cast<float>(rng.uniform());
    for (float& v : ml.values) v = static_cast<float>(rng.uniform());
    const agg::EnsembleMode mode = modes[draw % 4];
    const ad::AttentionMap m = agg::aggregate_attention(mg, ml, r, H, W, mode);
    const ad::AttentionMap base = agg::resize_map(mg, H, W);
    for (int i = 0; i < H; ++i) {
      for (int j = 0; j < W; ++j) {
        const float v = m.at(i, j);
        const bool in = i >= r.top && i < r.top + r.height && j >= r.left && j < r.left + r.width;
        if (!(v >= 0.0f && v <= 1.0f)) ++violations;
        if (!in && v != base.at(i, j)) ++violations;
      }
    }
  }
  return {violations == 0, fmt("%d table mismatches over 4 modes, %d range/outside-ROI violations over 1000 draws",
                               table_violations, violations - table_violations)};
}

// ---------------------------------------------------------------------------
// Metric oracle

double oracle_psnr(const data::ImageTensor& a, const data::ImageTensor& b) {
  long double se = 0;
  for (std::size_t i = 0; i < a.values.size(); ++i) {
    const long double d = static_cast<long double>(a.values[i]) - b.values[i];
    se += d * d;
  }
  const long double mse = se / a.values.size();
  return static_cast<double>(10.0L * std::log10(1.0L / mse));
}

double oracle_mae(const data::ImageTensor& a, const data::ImageTensor& b) {
  long double s = 0;
  for (std::size_t i = 0; i < a.values.size(); ++i) s += std::fabs(static_cast<long double>(a.values[i]) - b.values[i]);
  return static_cast<double>(s / a.values.size());
}

// Per-window SSIM from the definition: 2-D Gaussian weights, centered moments.
double oracle_ssim(const data::ImageTensor& a, const data::ImageTensor& b) {
  constexpr int K = 11;
  constexpr long double sigma = 1.5L;
  long double w[K][K];
  long double total = 0;
  for (int i = 0; i < K; ++i) {
    for (int j = 0; j < K; ++j) {
      w[i][j] = std::exp(-((i - 5) * (i - 5) + (j - 5) * (j - 5)) / (2 * sigma * sigma));
      total += w[i][j];
    }
  }
  const long double c1 = 0.0001L;
  const long double c2 = 0.0009L;
  long double sum = 0;
  int count = 0;
  for (int t = 0; t + K <= a.height; ++t) {
    for (int l = 0; l + K <= a.width; ++l) {
      long double mx = 0, my = 0;
      for (int i = 0; i < K; ++i) {
        for (int j = 0; j < K; ++j) {
          mx += w[i][j] / total * a.at(0, t + i, l + j);
          my += w[i][j] / total * b.at(0, t + i, l + j);
        }
      }
      long double vx = 0, vy = 0, cxy = 0;
      for (int i = 0; i < K; ++i) {
        for (int j = 0; j < K; ++j) {
          const long double dx = a.at(0, t + i, l + j) - mx;
          const long double dy = b.at(0, t + i, l + j) - my;
          vx += w[i][j] / total * dx * dx;
          vy += w[i][j] / total * dy * dy;
          cxy += w[i][j] / total * dx * dy;
        }
      }
      sum += ((2 * mx * my + c1) * (2 * cxy + c2)) / ((mx * mx + my * my + c1) * (vx + vy + c2));
      ++count;
    }
  }
  return static_cast<double>(sum / count);
}

Verdict metric_oracle() {
  const auto t0 = Clock::now();
  Rng rng(41);
  double worst = 0;
  for (int pair = 0; pair < 50; ++pair) {
    const int h = 11 + static_cast<int>(rng.below(54));
    const int w = 11 + static_cast<int>(rng.below(54));
    const auto a = test::random_image(1, h, w, rng);
    auto b = a;
    const double noise = rng.uniform(0.01, 0.5);
    for (float& v : b.values) v = std::clamp(v + static_cast<float>(noise * rng.normal()), 0.0f, 1.0f);
    worst = std::max({worst, std::abs(metrics::psnr(a, b) - oracle_psnr(a, b)),
                      std::abs(metrics::ssim(a, b) - oracle_ssim(a, b)), std::abs(metrics::mae(a, b) - oracle_mae(a, b))});
  }
  const data::ImageTensor zeros(1, 16, 16, 0.0f);
  const data::ImageTensor ones(1, 16, 16, 1.0f);
  const double ssim_const_err = std::abs(metrics::ssim(zeros, ones) - 0.0001 / 1.0001);
  // 16 of 25 pixels off by 0.125 gives MSE 0.01 exactly representable in the inputs.
  data::ImageTensor p(1, 5, 5, 0.0f);
  for (int i = 0; i < 16; ++i) p.values[i] = 0.125f;
  const double psnr_err = std::abs(metrics::psnr(p, data::ImageTensor(1, 5, 5, 0.0f)) - 20.0);
  const double secs = seconds_since(t0);
  const bool pass = worst <= 1e-6 && ssim_const_err <= 1e-9 && psnr_err <= 1e-9 && secs < 30.0;
  return {pass, fmt("max |impl - oracle| %.3g over 50 pairs (tol 1e-6), constant-image SSIM err %.3g (tol 1e-9), "
                    "20 dB PSNR err %.3g (tol 1e-9), %.1f s (limit 30 s)",
                    worst, ssim_const_err, psnr_err, secs)};
}

// ---------------------------------------------------------------------------
// Phantom benchmark

struct Benchmark {
  std::vector<data::MultimodalSample> train_set;
  std::vector<data::MultimodalSample> val_set;
};

Benchmark load_benchmark(const fs::path& work) {
  const fs::path dir = work / "phantoms";
  data::PhantomOptions opts;
  opts.seed = 7;
  opts.geometry = {64, 64, 24, 24};
  opts.n = 200;
  data::generate_phantom_dataset(opts, dir, "manifest.json");
  opts.n = 50;
  opts.split = data::Split::val;
  data::generate_phantom_dataset(opts, dir, "val_manifest.json");
  Benchmark b;
  b.train_set = data::load_dataset(data::read_manifest(dir / "manifest.json"));
  b.val_set = data::load_dataset(data::read_manifest(dir / "val_manifest.json"));
  return b;
}

Verdict overfit_check(const Benchmark& bench) {
  train::TrainConfig cfg;
  cfg.lr = 1e-3;
  cfg.lambda_l1 = 10.0;
  cfg.batch_size = 1;
  cfg.epochs = 500;
  cfg.seed = 1;
  const std::vector<data::MultimodalSample> one{bench.train_set.front()};
  const auto t0 = Clock::now();
  const train::TrainResult r = train::train(cfg, one);
  const double secs = seconds_since(t0);
  const double l1 = r.stats.back().g_l1;
  double best = l1;
  for (const auto& s : r.stats) best = std::min(best, s.g_l1);
  const bool pass = r.stats.size() == 500 && l1 < 0.02 && secs < 300.0;
  return {pass, fmt("%zu steps, final L1 %.5f (need < 0.02, best %.5f, first %.5f), %.1f s (limit 300 s)",
                    r.stats.size(), l1, best, r.stats.front().g_l1, secs)};
}

struct CellRun {
  run::CellResult result;
  double seconds = 0;
  fs::path dir;
};

CellRun run_one(const Benchmark& bench, const run::Cell& cell, const fs::path& dir) {
  std::error_code ec;
  fs::remove_all(dir, ec);
  const auto t0 = Clock::now();
  CellRun c;
  c.result = run::run_cell(train::TrainConfig{}, cell, bench.train_set, bench.val_set, dir);
  c.seconds = seconds_since(t0);
  c.dir = dir;
  std::fprintf(stderr, "  cell %s: %s ssim %.4f psnr %.3f (untrained %.3f) %.0f s\n", cell.key().c_str(),
               c.result.ok ? "ok" : c.result.error.c_str(), c.result.trained.ssim.mean, c.result.trained.psnr.mean,
               c.result.untrained.psnr.mean, c.seconds);
  return c;
}

double mean_ssim(const std::vector<CellRun>& cells) {
  double s = 0;
  for (const auto& c : cells) s += c.result.trained.ssim.mean;
  return s / static_cast<double>(cells.size());
}

std::string per_seed(const std::vector<CellRun>& cells) {
  std::string out;
  for (const auto& c : cells) out += fmt("%s%.4f", out.empty() ? "" : "/", c.result.trained.ssim.mean);
  return out;
}

bool all_ok(const std::vector<CellRun>& cells) {
  return std::all_of(cells.begin(), cells.end(), [](const CellRun& c) { return c.result.ok; });
}

double total_seconds(const std::vector<CellRun>& cells) {
  double s = 0;
  for (const auto& c : cells) s += c.seconds;
  return s;
}

run::Cell make_cell(agg::EnsembleMode e, train::AdcMode adc, gen::Arch arch, std::uint64_t seed) {
  return run::Cell{e, adc, arch, seed};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Acceptance criteria"};
  std::string work = "acceptance_work";
  std::vector<std::string> only;
  app.add_option("--work", work, "Scratch directory for benchmark runs");
  app.add_option("--only", only, "Run only these criteria")->delimiter(',');
  std::vector<std::string> expect_fail;
  app.add_option("--expect-fail", expect_fail, "Known failing criteria; still reported as FAIL")->delimiter(',');
  CLI11_PARSE(app, argc, argv);
  const std::set<std::string> selected(only.begin(), only.end());
  auto wanted = [&](const std::string& name) { return selected.empty() || selected.count(name) > 0; };

  const fs::path work_dir = fs::absolute(work);
  fs::create_directories(work_dir);
  nlohmann::json summary = nlohmann::json::object();
  int failures = 0;
  std::vector<std::string> unexpected;
  std::vector<std::string> expected;
  const std::set<std::string> known(expect_fail.begin(), expect_fail.end());
  auto report = [&](const std::string& name, const Verdict& v) {
    std::printf("%s %s: %s\n", v.pass ? "PASS" : "FAIL", name.c_str(), v.detail.c_str());
    std::fflush(stdout);
    summary[name] = {{"pass", v.pass}, {"detail", v.detail}};
    if (!v.pass) {
      ++failures;
      (known.count(name) ? expected : unexpected).push_back(name);
    } else if (known.count(name)) {
      std::printf("INFO %s passed although listed in --expect-fail\n", name.c_str());
    }
  };

  if (wanted("gradient_suite")) report("gradient_suite", gradient_suite());
  if (wanted("residual_identity")) report("residual_identity", identity_suite());
  if (wanted("aggregation_suite")) report("aggregation_suite", aggregation_suite());
  if (wanted("metric_oracle")) report("metric_oracle", metric_oracle());

  const bool need_bench = wanted("overfit") || wanted("ensembling_ablation") || wanted("adc_ablation") ||
                          wanted("generator_agnosticism") || wanted("determinism");
  if (need_bench) {
    const Benchmark bench = load_benchmark(work_dir);
    if (wanted("overfit")) report("overfit", overfit_check(bench));

    using agg::EnsembleMode;
    using train::AdcMode;
    const auto resnet = gen::Arch::resnet_encdec;
    const fs::path cells_dir = work_dir / "cells";
    std::vector<CellRun> embed;
    auto embed_cells = [&] {
      if (embed.empty()) {
        for (std::uint64_t seed : {1, 2, 3}) {
          const run::Cell c = make_cell(EnsembleMode::embed, AdcMode::real, resnet, seed);
          embed.push_back(run_one(bench, c, cells_dir / c.key()));
        }
      }
      return embed;
    };

    if (wanted("ensembling_ablation")) {
      std::vector<CellRun> global;
      for (std::uint64_t seed : {1, 2, 3}) {
        const run::Cell c = make_cell(EnsembleMode::global_only, AdcMode::real, resnet, seed);
        global.push_back(run_one(bench, c, cells_dir / c.key()));
      }
      const auto& e = embed_cells();
      const double secs = total_seconds(e) + total_seconds(global);
      const double se = mean_ssim(e);
      const double sg = mean_ssim(global);
      report("ensembling_ablation",
             {all_ok(e) && all_ok(global) && se >= sg && secs < 3600.0,
              fmt("mean val SSIM embed %.4f (%s) vs global_only %.4f (%s), need embed >= global_only; "
                  "6 runs %.0f s (limit 3600 s)",
                  se, per_seed(e).c_str(), sg, per_seed(global).c_str(), secs)});
    }

    if (wanted("adc_ablation")) {
      std::vector<CellRun> filled;
      for (std::uint64_t seed : {1, 2, 3}) {
        const run::Cell c = make_cell(EnsembleMode::embed, AdcMode::mean_fill, resnet, seed);
        filled.push_back(run_one(bench, c, cells_dir / c.key()));
      }
      const auto& e = embed_cells();
      const double sr = mean_ssim(e);
      const double sf = mean_ssim(filled);
      report("adc_ablation", {all_ok(e) && all_ok(filled) && sr >= sf,
                              fmt("mean val SSIM real ADC %.4f (%s) vs mean-filled %.4f (%s), need real >= filled", sr,
                                  per_seed(e).c_str(), sf, per_seed(filled).c_str())});
    }

    if (wanted("generator_agnosticism")) {
      const CellRun res = embed_cells().front();
      const run::Cell uc = make_cell(EnsembleMode::embed, AdcMode::real, gen::Arch::unet, 1);
      const CellRun unet = run_one(bench, uc, cells_dir / uc.key());
      const auto& rt = res.result;
      const auto& ut = unet.result;
      const bool pass = rt.ok && ut.ok && rt.config.at("ad") == ut.config.at("ad") &&
                        rt.trained.psnr.mean > rt.untrained.psnr.mean && ut.trained.psnr.mean > ut.untrained.psnr.mean;
      report("generator_agnosticism",
             {pass, fmt("mean val PSNR resnet_encdec %.3f vs untrained %.3f; unet %.3f vs untrained %.3f (seed 1, "
                        "identical AAD config)",
                        rt.trained.psnr.mean, rt.untrained.psnr.mean, ut.trained.psnr.mean, ut.untrained.psnr.mean)});
    }

    if (wanted("determinism")) {
      const run::Cell c = make_cell(EnsembleMode::embed, AdcMode::real, resnet, 1);
      const CellRun a = embed.empty() ? run_one(bench, c, cells_dir / c.key()) : embed.front();
      const CellRun b = run_one(bench, c, work_dir / "determinism_rerun");
      const bool ckpt_same = slurp(a.dir / "checkpoint.aadc") == slurp(b.dir / "checkpoint.aadc");
      const bool report_same = slurp(a.dir / "report.json") == slurp(b.dir / "report.json");
      const bool log_same = slurp(a.dir / "stats.log") == slurp(b.dir / "stats.log");
      const auto size = fs::file_size(a.dir / "checkpoint.aadc");
      report("determinism", {a.result.ok && b.result.ok && ckpt_same && report_same,
                             fmt("checkpoint (%ju bytes) %s, metric report %s, step log %s across two runs of %s",
                                 static_cast<std::uintmax_t>(size), ckpt_same ? "identical" : "DIFFERS",
                                 report_same ? "identical" : "DIFFERS", log_same ? "identical" : "DIFFERS",
                                 c.key().c_str())});
    }

    if (!embed.empty()) {
      // Training-progress figure for the first benchmark run.
      const auto& l1 = embed.front().result.epoch_g_l1;
      if (!l1.empty()) {
        std::printf("INFO training_progress: epoch-mean g_l1 first %.5f last %.5f\n", l1.front(), l1.back());
        summary["training_progress"] = {{"first_epoch_g_l1", l1.front()}, {"last_epoch_g_l1", l1.back()}};
      }
    }
  }

  auto join = [](const std::vector<std::string>& v) {
    std::string out;
    for (const auto& s : v) out += (out.empty() ? "" : ",") + s;
    return out;
  };
  summary["expected_failures"] = expected;
  summary["unexpected_failures"] = unexpected;
  std::ofstream(work_dir / "acceptance.json") << summary.dump(2) << '\n';
  std::printf("%s: %d criteria failed", failures ? "FAIL" : "PASS", failures);
  if (!expected.empty()) std::printf(" (%zu expected: %s)", expected.size(), join(expected).c_str());
  std::printf("\n");
  return unexpected.empty() ? 0 : 1;
}
