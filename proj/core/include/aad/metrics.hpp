// Copyright 2026 The AAD-DCE Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <functional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "aad/data.hpp"
#include "aad/training.hpp"

namespace aad::metrics {

/// 10·log10(range² / MSE); +∞ when the images are identical.
double psnr(const data::ImageTensor& a, const data::ImageTensor& b, double data_range = 1.0);

inline constexpr int kSsimWindow = 11;
inline constexpr double kSsimSigma = 1.5;
inline constexpr double kSsimK1 = 0.01;
inline constexpr double kSsimK2 = 0.03;

/// Single-scale SSIM with an 11×11 Gaussian window (σ 1.5), L = 1, averaged
/// over the valid map. Single-channel inputs only.
double ssim(const data::ImageTensor& a, const data::ImageTensor& b);

double mae(const data::ImageTensor& a, const data::ImageTensor& b);

struct SampleMetrics {
  std::string id;
  double psnr = 0;
  double ssim = 0;
  double mae = 0;
};

/// Mean and population standard deviation. For PSNR, infinite values are
/// left out of both and counted in inf_count.
struct Summary {
  double mean = 0;
  double std = 0;
  int inf_count = 0;
};

struct MetricsReport {
  data::Phase phase = data::Phase::early;
  std::vector<SampleMetrics> per_sample;
  Summary psnr;
  Summary ssim;
  Summary mae;
  nlohmann::json config = nlohmann::json::object();

  int n() const { return static_cast<int>(per_sample.size()); }
};

Summary summarize(const std::vector<double>& values);
MetricsReport make_report(data::Phase phase, std::vector<SampleMetrics> per_sample, nlohmann::json config);

/// Canonical JSON; infinite PSNR values are written as null.
nlohmann::json to_json(const MetricsReport& r);
MetricsReport report_from_json(const nlohmann::json& j);

using PredictionFn = std::function<data::ImageTensor(const data::MultimodalSample&)>;

struct EvalOptions {
  /// Replaces inference when set (precomputed outputs, identity hook).
  PredictionFn predict;
  bool zero_attention = false;
};

/// Prediction hook that returns each sample's own target.
PredictionFn identity_predictions(data::Phase phase);

/// Scores every sample against the checkpoint's target phase.
MetricsReport evaluate(const train::Checkpoint& ckpt, const std::vector<data::MultimodalSample>& dataset, int k,
                       const EvalOptions& options = {});

}  // namespace aad::metrics
