// Copyright 2026 The AAD-DCE Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <vector>

#include "aad/data.hpp"
#include "aad/error.hpp"
#include "aad/tensor.hpp"

namespace aad {

/// Stacks same-shaped images into an N×C×H×W tensor.
inline nn::Tensor<float> to_batch(const std::vector<const data::ImageTensor*>& images) {
  if (images.empty()) throw Error(ErrorCode::ShapeMismatch, "empty batch");
  const data::ImageTensor& first = *images.front();
  nn::Tensor<float> out({static_cast<int>(images.size()), first.channels, first.height, first.width});
  for (std::size_t n = 0; n < images.size(); ++n) {
    const data::ImageTensor& im = *images[n];
    if (im.channels != first.channels || im.height != first.height || im.width != first.width) {
      throw Error(ErrorCode::ShapeMismatch, "batch images differ in shape");
    }
    std::copy(im.values.begin(), im.values.end(), out.data() + n * first.size());
  }
  return out;
}

inline nn::Tensor<float> to_batch(const data::ImageTensor& image) { return to_batch(std::vector{&image}); }

/// Element n of an N×C×H×W tensor.
inline data::ImageTensor from_batch(const nn::Tensor<float>& t, int n) {
  if (t.ndim() != 4 || n < 0 || n >= t.dim(0)) throw Error(ErrorCode::ShapeMismatch, "from_batch: bad index or rank");
  data::ImageTensor out(t.dim(1), t.dim(2), t.dim(3));
  std::copy_n(t.data() + static_cast<std::size_t>(n) * out.size(), out.size(), out.values.begin());
  return out;
}

}  // namespace aad
