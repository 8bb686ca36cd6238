// Copyright 2026 The AAD-DCE Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

#include "aad/attention_discriminator.hpp"
#include "aad/data.hpp"

// Aggregated attention discriminator: a global block over the full response
// image, a local block over its ROI crop, and a logistic classifier over the
// concatenated 2·n_c embedding. The two attention maps are fused into one
// input-resolution map M_x.
namespace aad::agg {

enum class EnsembleMode { global_only, multiply, add, embed };

std::string_view to_string(EnsembleMode m);
EnsembleMode ensemble_from_string(std::string_view s);

/// Parameter names: "aad/global/...", "aad/local/...", "aad/classifier/{weight,bias}".
struct AadModel {
  ad::AdConfig config;
  nn::ParamSet<float> params;
};

inline constexpr const char* kGlobalPrefix = "aad/global";
inline constexpr const char* kLocalPrefix = "aad/local";

AadModel build_aad(const ad::AdConfig& cfg, std::uint64_t seed);

struct AadVars {
  nn::Var score;       // N×1, logistic output
  nn::Var emb_global;  // N×n_c
  nn::Var emb_local;   // N×n_c
  nn::Var att_global;  // N×1×H/2×W/2
  nn::Var att_local;   // N×1×H'/2×W'/2
};

/// y: N×1×H×W; rois: one per batch element, all of the same size.
template <typename T>
AadVars aad_graph(nn::Graph<T>& g, const ad::AdConfig& cfg, const nn::ParamSet<T>& params, nn::Var y,
                  std::span<const data::RoiRect> rois, bool trainable, bool zero_attention = false);

struct AadOutput {
  double score = 0.5;
  ad::AttentionMap m_global;
  ad::AttentionMap m_local;
  std::vector<float> e_global;
  std::vector<float> e_local;
};

AadOutput aad_forward(const AadModel& model, const data::ImageTensor& y, const data::RoiRect& roi);

/// Batched variant; y: N×1×H×W.
std::vector<AadOutput> aad_forward(const AadModel& model, const nn::Tensor<float>& y,
                                   std::span<const data::RoiRect> rois, bool zero_attention = false);

/// Channel-wise arithmetic mean of a C×h×w attention output.
ad::AttentionMap mean_attention(const data::ImageTensor& att);

/// Bilinear resize with half-pixel centers (corners not aligned); source
/// coordinates are clamped at the borders.
ad::AttentionMap resize_map(const ad::AttentionMap& m, int h, int w);

/// Fuses the global and local maps into an H×W map. Outside the ROI the
/// result is the resized global map; inside it depends on `mode`.
ad::AttentionMap aggregate_attention(const ad::AttentionMap& m_global, const ad::AttentionMap& m_local,
                                     const data::RoiRect& roi, int H, int W, EnsembleMode mode);

}  // namespace aad::agg
