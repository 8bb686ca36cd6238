// Copyright 2026 The AAD-DCE Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "aad/autograd.hpp"
#include "aad/params.hpp"

// Attention discriminator block: a trunk branch T(y) and a bottom-up/top-down
// attention branch A(y) whose single-channel map modulates the trunk as
// (A(y) + 1) ⊙ T(y) before global average pooling to an n_c embedding.
namespace aad::ad {

struct AdConfig {
  int in_channels = 1;
  int n_c = 64;
  std::vector<int> trunk_widths{16, 32, 64};
  int att_depth = 2;

  /// Throws InvalidConfig.
  void validate() const;
  /// Throws ShapeMismatch unless h×w is a valid block input.
  void check_input(int h, int w) const;

  bool operator==(const AdConfig&) const = default;
};

nlohmann::json to_json(const AdConfig& cfg);
AdConfig ad_config_from_json(const nlohmann::json& j);

/// Single-channel spatial map with values in [0,1].
struct AttentionMap {
  int height = 0;
  int width = 0;
  std::vector<float> values;

  AttentionMap() = default;
  AttentionMap(int h, int w, float fill = 0.0f)
      : height(h), width(w), values(static_cast<std::size_t>(h) * w, fill) {}

  float& at(int i, int j) { return values[static_cast<std::size_t>(i) * width + j]; }
  float at(int i, int j) const { return values[static_cast<std::size_t>(i) * width + j]; }
  double mean() const;

  bool operator==(const AttentionMap&) const = default;
};

/// Parameters of one block. Entry names are "<prefix>/<trunk|attention>/<layer>/<weight|bias>".
struct AdBlock {
  AdConfig config;
  std::string prefix;
  nn::ParamSet<float> params;
};

/// Adds the block's parameters to `params` under `prefix`.
void append_ad_params(nn::ParamSet<float>& params, const AdConfig& cfg, const std::string& prefix, std::uint64_t seed);

AdBlock build_ad_block(const AdConfig& cfg, const std::string& prefix, std::uint64_t seed);

/// Graph handles produced by one block evaluation.
struct AdVars {
  nn::Var trunk;      // N×n_c×h/2×w/2
  nn::Var attention;  // N×1×h/2×w/2
  nn::Var embedding;  // N×n_c
};

template <typename T>
nn::Var trunk_graph(nn::Graph<T>& g, const AdConfig& cfg, const nn::ParamSet<T>& params, const std::string& prefix,
                    nn::Var y, bool trainable);

template <typename T>
nn::Var attention_graph(nn::Graph<T>& g, const AdConfig& cfg, const nn::ParamSet<T>& params,
                        const std::string& prefix, nn::Var y, bool trainable);

/// global_avg_pool((att + 1) ⊙ trunk) with att broadcast across channels.
template <typename T>
nn::Var modulate_and_pool(nn::Graph<T>& g, nn::Var trunk, nn::Var att);

/// With `zero_attention` the attention branch is bypassed and A ≡ 0.
template <typename T>
AdVars ad_graph(nn::Graph<T>& g, const AdConfig& cfg, const nn::ParamSet<T>& params, const std::string& prefix,
                nn::Var y, bool trainable, bool zero_attention = false);

// Value-level entry points over batched N×C×h×w inputs.
nn::Tensor<float> trunk_forward(const AdBlock& block, const nn::Tensor<float>& y);
nn::Tensor<float> attention_branch_forward(const AdBlock& block, const nn::Tensor<float>& y);

struct AdOutput {
  nn::Tensor<float> embedding;  // N×n_c
  nn::Tensor<float> attention;  // N×1×h/2×w/2
};

AdOutput ad_forward(const AdBlock& block, const nn::Tensor<float>& y, bool zero_attention = false);

}  // namespace aad::ad
