// Copyright 2026 The AAD-DCE Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "aad/params.hpp"
#include "aad/rng.hpp"

namespace aad::detail {

// Uniform(-b, b) weights with b = gain·sqrt(3 / fan_in), zero bias.
inline void add_layer(nn::ParamSet<float>& params, Rng& rng, const std::string& name, std::vector<int> weight_shape,
                      int fan_in, int bias_size, double gain) {
  nn::Tensor<float> w(std::move(weight_shape));
  const double bound = gain * std::sqrt(3.0 / fan_in);
  for (std::size_t i = 0; i < w.size(); ++i) w[i] = static_cast<float>(rng.uniform(-bound, bound));
  params.add(name + "/weight", std::move(w));
  params.add(name + "/bias", nn::Tensor<float>({bias_size}));
}

inline constexpr double kReluGain = 1.4142135623730951;

}  // namespace aad::detail
