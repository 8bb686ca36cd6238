// Copyright 2026 The AAD-DCE Authors
// SPDX-License-Identifier: Apache-2.0

#include "aad/attention_discriminator.hpp"

#include <numeric>

#include "aad/error.hpp"
#include "aad/ops.hpp"
#include "aad/rng.hpp"
#include "init.hpp"

namespace aad::ad {

void AdConfig::validate() const {
  auto fail = [](const std::string& what) { throw Error(ErrorCode::InvalidConfig, "ad: " + what); };
  if (in_channels < 1) fail("in_channels must be >= 1");
  if (n_c < 1) fail("n_c must be >= 1");
  if (trunk_widths.empty()) fail("trunk_widths must not be empty");
  for (int w : trunk_widths) {
    if (w < 1) fail("trunk widths must be >= 1");
  }
  if (trunk_widths.back() != n_c) fail("final trunk width must equal n_c");
  if (att_depth < 0 || att_depth > 10) fail("att_depth must be in [0, 10]");
}

void AdConfig::check_input(int h, int w) const {
  const int f = std::max(2, 1 << att_depth);
  if (h < f || w < f || h % f != 0 || w % f != 0) {
    throw Error(ErrorCode::ShapeMismatch, "attention block input " + std::to_string(h) + "x" + std::to_string(w) +
                                              " must be divisible by " + std::to_string(f));
  }
}

nlohmann::json to_json(const AdConfig& cfg) {
  return {{"in_channels", cfg.in_channels},
          {"n_c", cfg.n_c},
          {"trunk_widths", cfg.trunk_widths},
          {"att_depth", cfg.att_depth}};
}

AdConfig ad_config_from_json(const nlohmann::json& j) {
  AdConfig c;
  c.in_channels = j.value("in_channels", c.in_channels);
  c.n_c = j.value("n_c", c.n_c);
  if (j.contains("trunk_widths")) {
    c.trunk_widths = j.at("trunk_widths").get<std::vector<int>>();
  } else if (j.contains("n_c")) {
    c.trunk_widths.back() = c.n_c;
  }
  c.att_depth = j.value("att_depth", c.att_depth);
  c.validate();
  return c;
}

double AttentionMap::mean() const {
  if (values.empty()) return 0.0;
  double s = 0.0;
  for (float v : values) s += v;
  return s / static_cast<double>(values.size());
}

void append_ad_params(nn::ParamSet<float>& params, const AdConfig& cfg, const std::string& prefix,
                      std::uint64_t seed) {
  cfg.validate();
  Rng rng(seed);
  int c_in = cfg.in_channels;
  for (std::size_t i = 0; i < cfg.trunk_widths.size(); ++i) {
    const int c_out = cfg.trunk_widths[i];
    detail::add_layer(params, rng, prefix + "/trunk/conv" + std::to_string(i), {c_out, c_in, 3, 3}, c_in * 9, c_out,
                      detail::kReluGain);
    c_in = c_out;
  }
  const int a = cfg.trunk_widths.front();
  c_in = cfg.in_channels;
  for (int i = 0; i < cfg.att_depth; ++i) {
    detail::add_layer(params, rng, prefix + "/attention/down" + std::to_string(i), {a, c_in, 3, 3}, c_in * 9, a,
                      detail::kReluGain);
    c_in = a;
  }
  for (int i = 0; i < cfg.att_depth; ++i) {
    detail::add_layer(params, rng, prefix + "/attention/up" + std::to_string(i), {a, a, 3, 3}, a * 9, a,
                      detail::kReluGain);
  }
  detail::add_layer(params, rng, prefix + "/attention/out", {1, c_in, 1, 1}, c_in, 1, 1.0);
}

AdBlock build_ad_block(const AdConfig& cfg, const std::string& prefix, std::uint64_t seed) {
  AdBlock block{cfg, prefix, {}};
  append_ad_params(block.params, cfg, prefix, seed);
  return block;
}

namespace {

template <typename T>
nn::Var conv_layer(nn::Graph<T>& g, const nn::ParamSet<T>& p, const std::string& name, nn::Var x, int stride, int pad,
                   bool trainable) {
  return nn::conv2d(g, x, g.param(p, name + "/weight", trainable), g.param(p, name + "/bias", trainable), stride, pad);
}

template <typename T>
void check_block_input(const nn::Graph<T>& g, const AdConfig& cfg, nn::Var y) {
  const nn::Tensor<T>& v = g.value(y);
  if (v.ndim() != 4 || v.dim(1) != cfg.in_channels) {
    throw Error(ErrorCode::ShapeMismatch, "attention block expects N×" + std::to_string(cfg.in_channels) +
                                              "×h×w input, got " + nn::shape_string(v.shape()));
  }
  cfg.check_input(v.dim(2), v.dim(3));
}

}  // namespace

template <typename T>
nn::Var trunk_graph(nn::Graph<T>& g, const AdConfig& cfg, const nn::ParamSet<T>& params, const std::string& prefix,
                    nn::Var y, bool trainable) {
  check_block_input(g, cfg, y);
  nn::Var h = y;
  for (std::size_t i = 0; i < cfg.trunk_widths.size(); ++i) {
    h = nn::relu(g, conv_layer(g, params, prefix + "/trunk/conv" + std::to_string(i), h, i == 0 ? 2 : 1, 1, trainable));
  }
  return h;
}

template <typename T>
nn::Var attention_graph(nn::Graph<T>& g, const AdConfig& cfg, const nn::ParamSet<T>& params,
                        const std::string& prefix, nn::Var y, bool trainable) {
  check_block_input(g, cfg, y);
  nn::Var h = y;
  for (int i = 0; i < cfg.att_depth; ++i) {
    h = nn::relu(g, conv_layer(g, params, prefix + "/attention/down" + std::to_string(i), h, 2, 1, trainable));
  }
  for (int i = 0; i < cfg.att_depth; ++i) {
    h = nn::upsample_nearest2x(g, h);
    h = nn::relu(g, conv_layer(g, params, prefix + "/attention/up" + std::to_string(i), h, 1, 1, trainable));
  }
  // Back at input resolution; pool to the trunk's working resolution.
  h = nn::avg_pool2x2(g, h);
  return nn::sigmoid(g, conv_layer(g, params, prefix + "/attention/out", h, 1, 0, trainable));
}

template <typename T>
nn::Var modulate_and_pool(nn::Graph<T>& g, nn::Var trunk, nn::Var att) {
  return nn::global_avg_pool(g, nn::mul_channel_broadcast(g, nn::add_scalar(g, att, T(1)), trunk));
}

template <typename T>
AdVars ad_graph(nn::Graph<T>& g, const AdConfig& cfg, const nn::ParamSet<T>& params, const std::string& prefix,
                nn::Var y, bool trainable, bool zero_attention) {
  AdVars out;
  out.trunk = trunk_graph(g, cfg, params, prefix, y, trainable);
  if (zero_attention) {
    const nn::Tensor<T>& t = g.value(out.trunk);
    out.attention = g.constant(nn::Tensor<T>({t.dim(0), 1, t.dim(2), t.dim(3)}));
  } else {
    out.attention = attention_graph(g, cfg, params, prefix, y, trainable);
  }
  out.embedding = modulate_and_pool(g, out.trunk, out.attention);
  return out;
}

#define AAD_INSTANTIATE_AD(T)                                                                                        \
  template nn::Var trunk_graph<T>(nn::Graph<T>&, const AdConfig&, const nn::ParamSet<T>&, const std::string&, nn::Var, \
                                  bool);                                                                             \
  template nn::Var attention_graph<T>(nn::Graph<T>&, const AdConfig&, const nn::ParamSet<T>&, const std::string&,    \
                                      nn::Var, bool);                                                                \
  template nn::Var modulate_and_pool<T>(nn::Graph<T>&, nn::Var, nn::Var);                                            \
  template AdVars ad_graph<T>(nn::Graph<T>&, const AdConfig&, const nn::ParamSet<T>&, const std::string&, nn::Var,   \
                              bool, bool);

AAD_INSTANTIATE_AD(float)
AAD_INSTANTIATE_AD(double)

nn::Tensor<float> trunk_forward(const AdBlock& block, const nn::Tensor<float>& y) {
  nn::Graph<float> g;
  return g.value(trunk_graph(g, block.config, block.params, block.prefix, g.constant(y), false));
}

nn::Tensor<float> attention_branch_forward(const AdBlock& block, const nn::Tensor<float>& y) {
  nn::Graph<float> g;
  return g.value(attention_graph(g, block.config, block.params, block.prefix, g.constant(y), false));
}

AdOutput ad_forward(const AdBlock& block, const nn::Tensor<float>& y, bool zero_attention) {
  nn::Graph<float> g;
  const AdVars v = ad_graph(g, block.config, block.params, block.prefix, g.constant(y), false, zero_attention);
  return AdOutput{g.value(v.embedding), g.value(v.attention)};
}

}  // namespace aad::ad
