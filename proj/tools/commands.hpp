// Copyright 2026 The AAD-DCE Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>

namespace aad::cli {

struct PhantomGenArgs {
  int n = 0;
  int n_val = 0;
  int hw = 64;
  int roi = 24;
  std::uint64_t seed = 0;
  std::filesystem::path out;
};

struct TrainArgs {
  std::filesystem::path config;
  std::optional<std::string> ensemble;
  std::optional<std::uint64_t> seed;
  std::filesystem::path out;
  std::filesystem::path resume;
};

struct InferArgs {
  std::filesystem::path ckpt;
  std::filesystem::path manifest;
  std::optional<int> k;
  std::filesystem::path out;
};

struct EvalArgs {
  std::filesystem::path ckpt;
  std::filesystem::path manifest;
  std::optional<int> k;
  std::filesystem::path predictions;
  std::filesystem::path out;
};

struct AblateArgs {
  std::filesystem::path config;
  std::optional<std::uint64_t> seed;
  std::filesystem::path out;
  int parallel = 1;
};

// Each returns the process exit status.
int cmd_phantom_gen(const PhantomGenArgs& a);
int cmd_train(const TrainArgs& a);
int cmd_infer(const InferArgs& a);
int cmd_eval(const EvalArgs& a);
int cmd_ablate(const AblateArgs& a);

}  // namespace aad::cli
