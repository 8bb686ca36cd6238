// Copyright 2026 The AAD-DCE Authors
// SPDX-License-Identifier: Apache-2.0

#include <cstdio>
#include <exception>

#include <CLI11.hpp>

#include "aad/error.hpp"
#include "commands.hpp"

int main(int argc, char** argv) {
  using namespace aad::cli;
  CLI::App app{"Attention-guided DCE response synthesis"};
  app.require_subcommand(1);

  PhantomGenArgs pg;
  auto* phantom = app.add_subcommand("phantom-gen", "Write a synthetic phantom dataset");
  phantom->add_option("--n", pg.n, "Training samples")->required()->check(CLI::PositiveNumber);
  phantom->add_option("--val", pg.n_val, "Validation samples (val_manifest.json)")->check(CLI::NonNegativeNumber);
  phantom->add_option("--hw", pg.hw, "Image side");
  phantom->add_option("--roi", pg.roi, "ROI side");
  phantom->add_option("--seed", pg.seed, "Generator seed");
  phantom->add_option("--out", pg.out, "Output directory")->required();

  TrainArgs tr;
  auto* train = app.add_subcommand("train", "Train a generator and discriminator");
  train->add_option("--config", tr.config, "Run config JSON")->required();
  train->add_option("--ensemble", tr.ensemble, "Override ensemble mode");
  train->add_option("--seed", tr.seed, "Override seed");
  train->add_option("--out", tr.out, "Output directory");
  train->add_option("--resume", tr.resume, "Checkpoint to resume from");

  InferArgs in;
  auto* infer = app.add_subcommand("infer", "Predict responses for a manifest");
  infer->add_option("--ckpt", in.ckpt, "Checkpoint")->required();
  infer->add_option("--manifest", in.manifest, "Dataset manifest")->required();
  infer->add_option("--k", in.k, "Attention refinements")->check(CLI::NonNegativeNumber);
  infer->add_option("--out", in.out, "Output directory")->required();

  EvalArgs ev;
  auto* eval = app.add_subcommand("eval", "Score a checkpoint or stored predictions");
  eval->add_option("--ckpt", ev.ckpt, "Checkpoint")->required();
  eval->add_option("--manifest", ev.manifest, "Dataset manifest")->required();
  eval->add_option("--k", ev.k, "Attention refinements")->check(CLI::NonNegativeNumber);
  eval->add_option("--predictions", ev.predictions, "infer_manifest.json from a previous infer run");
  eval->add_option("--out", ev.out, "Report JSON path")->required();

  AblateArgs ab;
  auto* ablate = app.add_subcommand("ablate", "Run the ablation grid of a config");
  ablate->add_option("--config", ab.config, "Run config JSON with an ablation block")->required();
  ablate->add_option("--seed", ab.seed, "Replace the seed axis with this single seed");
  ablate->add_option("--out", ab.out, "Output directory");
  ablate->add_option("--parallel", ab.parallel, "Concurrent cells")->check(CLI::PositiveNumber);

  CLI11_PARSE(app, argc, argv);

  try {
    if (*phantom) return cmd_phantom_gen(pg);
    if (*train) return cmd_train(tr);
    if (*infer) return cmd_infer(in);
    if (*eval) return cmd_eval(ev);
    if (*ablate) return cmd_ablate(ab);
  } catch (const aad::Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 3;
  }
  return 1;
}
