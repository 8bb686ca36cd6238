// Copyright 2026 The AAD-DCE Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "aad/autograd.hpp"
#include "aad/data.hpp"
#include "aad/params.hpp"

// Image-to-image generators. Both architectures share one contract: an
// in_channels×H×W input maps to an out_channels×H×W output in (0,1), with
// H and W divisible by 2^depth.
namespace aad::gen {

enum class Arch { resnet_encdec, unet };

std::string_view to_string(Arch a);
Arch arch_from_string(std::string_view s);

struct GeneratorConfig {
  Arch arch = Arch::resnet_encdec;
  int in_channels = 3;
  int out_channels = 1;
  int base_width = 16;
  int depth = 3;
  int n_res_blocks = 4;  // resnet_encdec only

  /// Throws InvalidConfig.
  void validate() const;
  /// Throws InvalidConfig unless h and w are divisible by 2^depth.
  void check_geometry(int h, int w) const;

  bool operator==(const GeneratorConfig&) const = default;
};

nlohmann::json to_json(const GeneratorConfig& cfg);
GeneratorConfig generator_config_from_json(const nlohmann::json& j);

using GeneratorParams = nn::ParamSet<float>;

/// One convolution of the architecture, in build order.
struct LayerSpec {
  std::string name;  // "gen/<layer-path>"
  bool transposed = false;
  int in_channels = 0;
  int out_channels = 0;
  int kernel = 0;
};

std::vector<LayerSpec> layer_specs(const GeneratorConfig& cfg);

/// Deterministic given (cfg, seed). Names are "gen/<layer-path>/<weight|bias>".
GeneratorParams build_generator(const GeneratorConfig& cfg, std::uint64_t seed);

template <typename T>
nn::Var generator_graph(nn::Graph<T>& g, const GeneratorConfig& cfg, const nn::ParamSet<T>& params, nn::Var x,
                        bool trainable);

/// Batched forward pass, x: N×in_channels×H×W.
nn::Tensor<float> generator_forward(const GeneratorConfig& cfg, const GeneratorParams& params,
                                    const nn::Tensor<float>& x);
data::ImageTensor generator_forward(const GeneratorConfig& cfg, const GeneratorParams& params,
                                    const data::ImageTensor& x);

}  // namespace aad::gen
