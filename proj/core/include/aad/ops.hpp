// Copyright 2026 The AAD-DCE Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <span>

#include "aad/autograd.hpp"

// Differentiable operations over NCHW tensors. Explicitly instantiated for
// float (training) and double (gradient checks).
namespace aad::nn {

/// Top-left corner of a crop window, per batch element.
struct CropOrigin {
  int top = 0;
  int left = 0;
};

/// x: N×Cin×H×W, w: Cout×Cin×k×k, b: Cout or none.
template <typename T>
Var conv2d(Graph<T>& g, Var x, Var w, Var b, int stride, int pad);

/// x: N×Cin×H×W, w: Cin×Cout×k×k, b: Cout or none.
/// Output side: (H-1)·stride − 2·pad + k + output_pad.
template <typename T>
Var conv_transpose2d(Graph<T>& g, Var x, Var w, Var b, int stride, int pad, int output_pad);

/// Per-sample, per-channel normalization without affine parameters.
template <typename T>
Var instance_norm(Graph<T>& g, Var x, T eps = T(1e-5));

template <typename T>
Var relu(Graph<T>& g, Var x);

/// Logistic function, saturated to stay strictly inside (0, 1).
template <typename T>
Var sigmoid(Graph<T>& g, Var x);

template <typename T>
Var add(Graph<T>& g, Var a, Var b);

template <typename T>
Var add_scalar(Graph<T>& g, Var a, T s);

template <typename T>
Var scale(Graph<T>& g, Var a, T s);

/// m: N×1×H×W broadcast over the channels of x: N×C×H×W.
template <typename T>
Var mul_channel_broadcast(Graph<T>& g, Var m, Var x);

/// N×C×H×W -> N×C.
template <typename T>
Var global_avg_pool(Graph<T>& g, Var x);

/// Concatenates along axis 1 (channels for NCHW, features for N×K).
template <typename T>
Var concat_channels(Graph<T>& g, Var a, Var b);

/// x: N×K, w: O×K, b: O -> N×O.
template <typename T>
Var linear(Graph<T>& g, Var x, Var w, Var b);

/// Per-sample h×w windows; origins.size() must equal the batch size.
template <typename T>
Var crop(Graph<T>& g, Var x, std::span<const CropOrigin> origins, int h, int w);

template <typename T>
Var upsample_nearest2x(Graph<T>& g, Var x);

template <typename T>
Var avg_pool2x2(Graph<T>& g, Var x);

/// Mean over all elements, shape {1}.
template <typename T>
Var mean_all(Graph<T>& g, Var x);

template <typename T>
Var mean_square(Graph<T>& g, Var x);

/// mean(log(clamp(x, lo, hi))); zero gradient where the clamp is active.
template <typename T>
Var mean_log_clamped(Graph<T>& g, Var x, T lo, T hi);

/// mean(log(1 - clamp(x, lo, hi))).
template <typename T>
Var mean_log1m_clamped(Graph<T>& g, Var x, T lo, T hi);

/// mean(|a - b|).
template <typename T>
Var mean_abs_diff(Graph<T>& g, Var a, Var b);

}  // namespace aad::nn
