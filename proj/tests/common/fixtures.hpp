// Copyright 2026 The AAD-DCE Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <vector>

#include "aad/phantom.hpp"
#include "aad/training.hpp"

namespace aad::test {

/// Small networks that train in milliseconds on 32×32 phantoms.
inline train::TrainConfig tiny_config() {
  train::TrainConfig c;
  c.epochs = 1;
  c.batch_size = 4;
  c.seed = 7;
  c.generator.base_width = 4;
  c.generator.depth = 2;
  c.generator.n_res_blocks = 1;
  c.ad.n_c = 4;
  c.ad.trunk_widths = {2, 4};
  c.ad.att_depth = 1;
  return c;
}

inline std::vector<data::MultimodalSample> phantoms(int n, std::uint64_t seed = 1,
                                                   data::Split split = data::Split::train, int hw = 32,
                                                   int roi = 16) {
  std::vector<data::MultimodalSample> out;
  for (int i = 0; i < n; ++i) out.push_back(data::generate_phantom_sample(seed, split, i, {hw, hw, roi, roi}));
  return out;
}

}  // namespace aad::test
