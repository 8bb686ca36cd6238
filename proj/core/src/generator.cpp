// Copyright 2026 The AAD-DCE Authors
// SPDX-License-Identifier: Apache-2.0

#include "aad/generator.hpp"

#include "aad/batch.hpp"
#include "aad/error.hpp"
#include "aad/ops.hpp"
#include "aad/rng.hpp"
#include "init.hpp"

namespace aad::gen {

std::string_view to_string(Arch a) { return a == Arch::resnet_encdec ? "resnet_encdec" : "unet"; }

Arch arch_from_string(std::string_view s) {
  if (s == "resnet_encdec") return Arch::resnet_encdec;
  if (s == "unet") return Arch::unet;
  throw Error(ErrorCode::InvalidConfig, "unknown generator arch '" + std::string(s) + "'");
}

void GeneratorConfig::validate() const {
  auto fail = [](const std::string& what) { throw Error(ErrorCode::InvalidConfig, "generator: " + what); };
  if (in_channels < 1) fail("in_channels must be >= 1");
  if (out_channels < 1) fail("out_channels must be >= 1");
  if (base_width < 1) fail("base_width must be >= 1");
  if (depth < 1) fail("depth must be >= 1");
  if (depth > 12) fail("depth must be <= 12");
  if (n_res_blocks < 0) fail("n_res_blocks must be >= 0");
}

void GeneratorConfig::check_geometry(int h, int w) const {
  const int f = 1 << depth;
  if (h < f || w < f || h % f != 0 || w % f != 0) {
    throw Error(ErrorCode::InvalidConfig, "generator depth " + std::to_string(depth) + " needs H and W divisible by " +
                                              std::to_string(f) + ", got " + std::to_string(h) + "x" + std::to_string(w));
  }
}

nlohmann::json to_json(const GeneratorConfig& cfg) {
  return {{"arch", std::string(to_string(cfg.arch))}, {"in_channels", cfg.in_channels},
          {"out_channels", cfg.out_channels},         {"base_width", cfg.base_width},
          {"depth", cfg.depth},                       {"n_res_blocks", cfg.n_res_blocks}};
}

GeneratorConfig generator_config_from_json(const nlohmann::json& j) {
  GeneratorConfig c;
  if (j.contains("arch")) c.arch = arch_from_string(j.at("arch").get<std::string>());
  c.in_channels = j.value("in_channels", c.in_channels);
  c.out_channels = j.value("out_channels", c.out_channels);
  c.base_width = j.value("base_width", c.base_width);
  c.depth = j.value("depth", c.depth);
  c.n_res_blocks = j.value("n_res_blocks", c.n_res_blocks);
  c.validate();
  return c;
}

std::vector<LayerSpec> layer_specs(const GeneratorConfig& cfg) {
  cfg.validate();
  std::vector<LayerSpec> out;
  const int w0 = cfg.base_width;
  auto width = [&](int level) { return w0 << level; };
  if (cfg.arch == Arch::resnet_encdec) {
    out.push_back({"gen/stem", false, cfg.in_channels, w0, 7});
    for (int i = 0; i < cfg.depth; ++i) out.push_back({"gen/down" + std::to_string(i), false, width(i), width(i + 1), 3});
    const int wb = width(cfg.depth);
    for (int r = 0; r < cfg.n_res_blocks; ++r) {
      out.push_back({"gen/res" + std::to_string(r) + "/conv0", false, wb, wb, 3});
      out.push_back({"gen/res" + std::to_string(r) + "/conv1", false, wb, wb, 3});
    }
    for (int i = cfg.depth; i > 0; --i) {
      out.push_back({"gen/up" + std::to_string(cfg.depth - i), true, width(i), width(i - 1), 3});
    }
    out.push_back({"gen/out", false, w0, cfg.out_channels, 7});
  } else {
    out.push_back({"gen/enc0/conv0", false, cfg.in_channels, w0, 3});
    out.push_back({"gen/enc0/conv1", false, w0, w0, 3});
    for (int l = 1; l <= cfg.depth; ++l) {
      out.push_back({"gen/enc" + std::to_string(l) + "/conv0", false, width(l - 1), width(l), 3});
      out.push_back({"gen/enc" + std::to_string(l) + "/conv1", false, width(l), width(l), 3});
    }
    for (int l = cfg.depth; l >= 1; --l) {
      const std::string dec = "gen/dec" + std::to_string(l - 1);
      out.push_back({dec + "/up", true, width(l), width(l - 1), 3});
      out.push_back({dec + "/conv0", false, 2 * width(l - 1), width(l - 1), 3});
    }
    out.push_back({"gen/out", false, w0, cfg.out_channels, 1});
  }
  return out;
}

GeneratorParams build_generator(const GeneratorConfig& cfg, std::uint64_t seed) {
  Rng rng(mix_seed(seed, 0x67656eULL));
  GeneratorParams params;
  for (const LayerSpec& l : layer_specs(cfg)) {
    const bool last = l.name == "gen/out";
    const double gain = last ? 1.0 : detail::kReluGain;
    const int fan_in = l.in_channels * l.kernel * l.kernel;
    std::vector<int> shape = l.transposed ? std::vector<int>{l.in_channels, l.out_channels, l.kernel, l.kernel}
                                          : std::vector<int>{l.out_channels, l.in_channels, l.kernel, l.kernel};
    detail::add_layer(params, rng, l.name, std::move(shape), fan_in, l.out_channels, gain);
  }
  return params;
}

namespace {

template <typename T>
struct Builder {
  nn::Graph<T>& g;
  const nn::ParamSet<T>& p;
  bool trainable;

  nn::Var w(const std::string& layer) { return g.param(p, layer + "/weight", trainable); }
  nn::Var b(const std::string& layer) { return g.param(p, layer + "/bias", trainable); }

  nn::Var conv(nn::Var x, const std::string& layer, int stride, int pad) {
    return nn::conv2d(g, x, w(layer), b(layer), stride, pad);
  }
  nn::Var up(nn::Var x, const std::string& layer) { return nn::conv_transpose2d(g, x, w(layer), b(layer), 2, 1, 1); }
  nn::Var norm_relu(nn::Var x) { return nn::relu(g, nn::instance_norm(g, x)); }
};

template <typename T>
nn::Var resnet_encdec(Builder<T>& b, const GeneratorConfig& cfg, nn::Var x) {
  nn::Var h = b.norm_relu(b.conv(x, "gen/stem", 1, 3));
  for (int i = 0; i < cfg.depth; ++i) h = b.norm_relu(b.conv(h, "gen/down" + std::to_string(i), 2, 1));
  for (int r = 0; r < cfg.n_res_blocks; ++r) {
    const std::string base = "gen/res" + std::to_string(r);
    nn::Var t = b.norm_relu(b.conv(h, base + "/conv0", 1, 1));
    t = nn::instance_norm(b.g, b.conv(t, base + "/conv1", 1, 1));
    h = nn::add(b.g, h, t);
  }
  for (int i = 0; i < cfg.depth; ++i) h = b.norm_relu(b.up(h, "gen/up" + std::to_string(i)));
  return nn::sigmoid(b.g, b.conv(h, "gen/out", 1, 3));
}

template <typename T>
nn::Var unet(Builder<T>& b, const GeneratorConfig& cfg, nn::Var x) {
  std::vector<nn::Var> skips;
  nn::Var h = b.norm_relu(b.conv(x, "gen/enc0/conv0", 1, 1));
  h = b.norm_relu(b.conv(h, "gen/enc0/conv1", 1, 1));
  skips.push_back(h);
  for (int l = 1; l <= cfg.depth; ++l) {
    const std::string enc = "gen/enc" + std::to_string(l);
    h = b.norm_relu(b.conv(h, enc + "/conv0", 2, 1));
    h = b.norm_relu(b.conv(h, enc + "/conv1", 1, 1));
    skips.push_back(h);
  }
  for (int l = cfg.depth; l >= 1; --l) {
    const std::string dec = "gen/dec" + std::to_string(l - 1);
    nn::Var u = b.norm_relu(b.up(h, dec + "/up"));
    h = b.norm_relu(b.conv(nn::concat_channels(b.g, u, skips[l - 1]), dec + "/conv0", 1, 1));
  }
  return nn::sigmoid(b.g, b.conv(h, "gen/out", 1, 0));
}

}  // namespace

template <typename T>
nn::Var generator_graph(nn::Graph<T>& g, const GeneratorConfig& cfg, const nn::ParamSet<T>& params, nn::Var x,
                        bool trainable) {
  const nn::Tensor<T>& xv = g.value(x);
  if (xv.ndim() != 4 || xv.dim(1) != cfg.in_channels) {
    throw Error(ErrorCode::ShapeMismatch, "generator expects N×" + std::to_string(cfg.in_channels) +
                                              "×H×W input, got " + nn::shape_string(xv.shape()));
  }
  try {
    cfg.check_geometry(xv.dim(2), xv.dim(3));
  } catch (const Error& e) {
    throw Error(ErrorCode::ShapeMismatch, e.what());
  }
  Builder<T> b{g, params, trainable};
  return cfg.arch == Arch::resnet_encdec ? resnet_encdec(b, cfg, x) : unet(b, cfg, x);
}

template nn::Var generator_graph<float>(nn::Graph<float>&, const GeneratorConfig&, const nn::ParamSet<float>&, nn::Var,
                                        bool);
template nn::Var generator_graph<double>(nn::Graph<double>&, const GeneratorConfig&, const nn::ParamSet<double>&,
                                         nn::Var, bool);

nn::Tensor<float> generator_forward(const GeneratorConfig& cfg, const GeneratorParams& params,
                                    const nn::Tensor<float>& x) {
  nn::Graph<float> g;
  const nn::Var out = generator_graph(g, cfg, params, g.constant(x), false);
  return g.value(out);
}

data::ImageTensor generator_forward(const GeneratorConfig& cfg, const GeneratorParams& params,
                                    const data::ImageTensor& x) {
  return from_batch(generator_forward(cfg, params, to_batch(x)), 0);
}

}  // namespace aad::gen
