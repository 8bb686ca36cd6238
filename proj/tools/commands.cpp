// Copyright 2026 The AAD-DCE Authors
// SPDX-License-Identifier: Apache-2.0

#include "commands.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>

#include "aad/ablation.hpp"
#include "aad/error.hpp"
#include "aad/metrics.hpp"
#include "aad/phantom.hpp"
#include "aad/run_config.hpp"
#include "aad/training.hpp"

namespace aad::cli {

namespace fs = std::filesystem;

namespace {

std::vector<data::MultimodalSample> load_samples(const fs::path& manifest) {
  const data::DatasetManifest m = data::read_manifest(manifest);
  data::validate_manifest(m, true);
  return data::load_dataset(m);
}

void write_json(const fs::path& path, const nlohmann::json& j) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error(ErrorCode::IoFailure, "cannot create '" + path.string() + "'");
  out << j.dump(2) << '\n';
  if (!out) throw Error(ErrorCode::IoFailure, "write failed for '" + path.string() + "'");
}

nlohmann::json read_json(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::IoFailure, "cannot open '" + path.string() + "'");
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw Error(ErrorCode::SchemaError, "'" + path.string() + "': " + e.what());
  }
}

data::ImageTensor abs_error(const data::ImageTensor& a, const data::ImageTensor& b) {
  data::ImageTensor out = a;
  for (std::size_t i = 0; i < out.size(); ++i) out.values[i] = std::abs(a.values[i] - b.values[i]);
  return out;
}

data::ImageTensor as_image(const ad::AttentionMap& m) {
  data::ImageTensor t(1, m.height, m.width);
  t.values = m.values;
  return t;
}

}  // namespace

int cmd_phantom_gen(const PhantomGenArgs& a) {
  data::PhantomOptions opts;
  opts.seed = a.seed;
  opts.n = a.n;
  opts.geometry = {a.hw, a.hw, a.roi, a.roi};
  data::generate_phantom_dataset(opts, a.out);
  std::printf("%s\n", (a.out / "manifest.json").string().c_str());
  if (a.n_val > 0) {
    opts.n = a.n_val;
    opts.split = data::Split::val;
    data::generate_phantom_dataset(opts, a.out, "val_manifest.json");
    std::printf("%s\n", (a.out / "val_manifest.json").string().c_str());
  }
  return 0;
}

int cmd_train(const TrainArgs& a) {
  run::RunConfig rc = run::load_run_config(a.config);
  if (a.ensemble) rc.train.ensemble = agg::ensemble_from_string(*a.ensemble);
  if (a.seed) rc.train.seed = *a.seed;
  const fs::path out = !a.out.empty() ? a.out : !rc.out.empty() ? rc.out : fs::path("run");
  const auto dataset = load_samples(rc.manifest);

  std::optional<train::Checkpoint> resume;
  train::TrainOptions opts;
  opts.out_dir = out;
  opts.checkpoint_every = rc.checkpoint_every;
  if (!a.resume.empty()) {
    resume = train::load_checkpoint(a.resume);
    opts.resume = &*resume;
  }
  const train::TrainResult r = train::train(rc.train, dataset, opts);
  std::printf("%s\n", (out / "checkpoint.aadc").string().c_str());
  std::fprintf(stderr, "trained %lld steps\n", static_cast<long long>(r.checkpoint.state.step));
  return 0;
}

int cmd_infer(const InferArgs& a) {
  const train::Checkpoint ckpt = train::load_checkpoint(a.ckpt);
  const int k = a.k.value_or(ckpt.config.infer_refinements);
  const auto samples = load_samples(a.manifest);
  fs::create_directories(a.out);
  nlohmann::json entries = nlohmann::json::array();
  for (const auto& s : samples) {
    const train::InferResult r = train::infer(ckpt, s.x, s.roi, k);
    const std::string pred = s.id + "_pred.aadt";
    const std::string mx = s.id + "_mx.aadt";
    const std::string err = s.id + "_err.aadt";
    data::write_tensor_file(r.prediction, a.out / pred);
    data::write_tensor_file(as_image(r.m_x), a.out / mx);
    data::write_tensor_file(abs_error(r.prediction, s.target(ckpt.config.target_phase)), a.out / err);
    entries.push_back({{"id", s.id}, {"prediction", pred}, {"m_x", mx}, {"error", err}});
  }
  const fs::path manifest_out = a.out / "infer_manifest.json";
  write_json(manifest_out, {{"config", train::to_json(ckpt.config)},
                            {"k", k},
                            {"step", ckpt.state.step},
                            {"checkpoint", a.ckpt.string()},
                            {"manifest", a.manifest.string()},
                            {"samples", entries}});
  std::printf("%s\n", manifest_out.string().c_str());
  return 0;
}

int cmd_eval(const EvalArgs& a) {
  const train::Checkpoint ckpt = train::load_checkpoint(a.ckpt);
  int k = a.k.value_or(ckpt.config.infer_refinements);
  const auto samples = load_samples(a.manifest);
  metrics::EvalOptions opts;
  if (!a.predictions.empty()) {
    const nlohmann::json im = read_json(a.predictions);
    if (im.at("config") != train::to_json(ckpt.config) || im.at("step") != ckpt.state.step) {
      throw Error(ErrorCode::InvalidConfig, "predictions in '" + a.predictions.string() +
                                                "' come from a different checkpoint");
    }
    k = im.at("k").get<int>();
    std::map<std::string, fs::path> files;
    for (const auto& e : im.at("samples")) {
      files[e.at("id").get<std::string>()] = a.predictions.parent_path() / e.at("prediction").get<std::string>();
    }
    opts.predict = [files](const data::MultimodalSample& s) {
      const auto it = files.find(s.id);
      if (it == files.end()) throw Error(ErrorCode::UnknownSample, "no stored prediction for sample " + s.id);
      return data::read_tensor_file(it->second);
    };
  }
  metrics::MetricsReport report = metrics::evaluate(ckpt, samples, k, opts);
  report.config["checkpoint"] = a.ckpt.string();
  report.config["manifest"] = a.manifest.string();
  const nlohmann::json j = metrics::to_json(report);
  run::validate_schema(j, run::metrics_report_schema());
  write_json(a.out, j);
  std::printf("psnr %.4f ± %.4f (inf %d)  ssim %.4f ± %.4f  mae %.4f ± %.4f  n %d\n", report.psnr.mean,
              report.psnr.std, report.psnr.inf_count, report.ssim.mean, report.ssim.std, report.mae.mean,
              report.mae.std, report.n());
  return 0;
}

int cmd_ablate(const AblateArgs& a) {
  run::RunConfig rc = run::load_run_config(a.config);
  if (!rc.ablation) throw Error(ErrorCode::InvalidConfig, "config has no ablation block");
  if (rc.val_manifest.empty()) throw Error(ErrorCode::InvalidConfig, "ablation needs val_manifest");
  if (a.seed) rc.ablation->seeds = {*a.seed};
  const fs::path out = !a.out.empty() ? a.out : !rc.out.empty() ? rc.out : fs::path("ablation");
  const auto train_set = load_samples(rc.manifest);
  const auto val_set = load_samples(rc.val_manifest);

  run::AblationOptions opts;
  opts.out_dir = out;
  opts.parallel = a.parallel;
  opts.on_cell = [](const run::CellResult& c) {
    if (c.ok) {
      std::fprintf(stderr, "%s: psnr %.4f ssim %.4f mae %.4f\n", c.cell.key().c_str(), c.trained.psnr.mean,
                   c.trained.ssim.mean, c.trained.mae.mean);
    } else {
      std::fprintf(stderr, "%s: FAILED %s\n", c.cell.key().c_str(), c.error.c_str());
    }
  };
  const run::AblationReport report = run::run_ablation(rc.train, *rc.ablation, train_set, val_set, opts);
  std::printf("%s", run::to_markdown(report).c_str());
  return report.ok() ? 0 : 4;
}

}  // namespace aad::cli
