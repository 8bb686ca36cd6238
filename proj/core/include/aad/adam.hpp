// Copyright 2026 The AAD-DCE Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>

#include "aad/params.hpp"

namespace aad::nn {

struct AdamHyper {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// First/second moment estimates, shape-matched to the parameters.
struct AdamState {
  ParamSet<float> m;
  ParamSet<float> v;
  std::int64_t t = 0;

  static AdamState for_params(const ParamSet<float>& params);
};

/// One bias-corrected Adam update of `params` in place.
void adam_step(ParamSet<float>& params, const ParamSet<float>& grads, AdamState& state, const AdamHyper& hyper);

}  // namespace aad::nn
