// Copyright 2026 The AAD-DCE Authors
// SPDX-License-Identifier: Apache-2.0

#include "aad/adam.hpp"

#include <cmath>

namespace aad::nn {

AdamState AdamState::for_params(const ParamSet<float>& params) {
  return AdamState{params.zeros_like(), params.zeros_like(), 0};
}

void adam_step(ParamSet<float>& params, const ParamSet<float>& grads, AdamState& state, const AdamHyper& hyper) {
  if (grads.size() != params.size() || state.m.size() != params.size() || state.v.size() != params.size()) {
    throw Error(ErrorCode::ShapeMismatch, "adam_step: parameter, gradient and moment sets differ in size");
  }
  state.t += 1;
  const double c1 = 1.0 - std::pow(hyper.beta1, static_cast<double>(state.t));
  const double c2 = 1.0 - std::pow(hyper.beta2, static_cast<double>(state.t));
  const float b1 = static_cast<float>(hyper.beta1);
  const float b2 = static_cast<float>(hyper.beta2);
  const float step = static_cast<float>(hyper.lr / c1);
  const float inv_c2 = static_cast<float>(1.0 / c2);
  const float eps = static_cast<float>(hyper.eps);
  auto& pe = params.entries();
  for (std::size_t k = 0; k < pe.size(); ++k) {
    Tensor<float>& p = pe[k].value;
    const Tensor<float>& g = grads.entries()[k].value;
    Tensor<float>& m = state.m.entries()[k].value;
    Tensor<float>& v = state.v.entries()[k].value;
    if (!g.same_shape(p) || !m.same_shape(p) || !v.same_shape(p)) {
      throw Error(ErrorCode::ShapeMismatch, "adam_step: shape mismatch for '" + pe[k].name + "'");
    }
    for (std::size_t i = 0; i < p.size(); ++i) {
      m[i] = b1 * m[i] + (1.0f - b1) * g[i];
      v[i] = b2 * v[i] + (1.0f - b2) * g[i] * g[i];
      p[i] -= step * m[i] / (std::sqrt(v[i] * inv_c2) + eps);
    }
  }
}

}  // namespace aad::nn
