// Copyright 2026 The AAD-DCE Authors
// SPDX-License-Identifier: Apache-2.0

#include "aad/metrics.hpp"

#include <array>
#include <cmath>
#include <limits>

#include "aad/error.hpp"

namespace aad::metrics {

namespace {

void check_same(const data::ImageTensor& a, const data::ImageTensor& b, const char* what) {
  if (a.channels != b.channels || a.height != b.height || a.width != b.width || a.size() != b.size()) {
    throw Error(ErrorCode::ShapeMismatch, std::string(what) + ": images differ in shape");
  }
  if (a.size() == 0) throw Error(ErrorCode::ShapeMismatch, std::string(what) + ": empty image");
}

std::array<double, kSsimWindow> gaussian_window() {
  std::array<double, kSsimWindow> w{};
  double s = 0.0;
  for (int i = 0; i < kSsimWindow; ++i) {
    const double d = i - kSsimWindow / 2;
    w[i] = std::exp(-d * d / (2 * kSsimSigma * kSsimSigma));
    s += w[i];
  }
  for (double& v : w) v /= s;
  return w;
}

// Valid-mode separable filtering of an h×w plane.
std::vector<double> filter_valid(const std::vector<double>& img, int h, int w,
                                 const std::array<double, kSsimWindow>& k) {
  const int ow = w - kSsimWindow + 1;
  const int oh = h - kSsimWindow + 1;
  std::vector<double> rows(static_cast<std::size_t>(h) * ow);
  for (int i = 0; i < h; ++i) {
    for (int j = 0; j < ow; ++j) {
      double s = 0.0;
      for (int t = 0; t < kSsimWindow; ++t) s += k[t] * img[static_cast<std::size_t>(i) * w + j + t];
      rows[static_cast<std::size_t>(i) * ow + j] = s;
    }
  }
  std::vector<double> out(static_cast<std::size_t>(oh) * ow);
  for (int i = 0; i < oh; ++i) {
    for (int j = 0; j < ow; ++j) {
      double s = 0.0;
      for (int t = 0; t < kSsimWindow; ++t) s += k[t] * rows[static_cast<std::size_t>(i + t) * ow + j];
      out[static_cast<std::size_t>(i) * ow + j] = s;
    }
  }
  return out;
}

}  // namespace

double psnr(const data::ImageTensor& a, const data::ImageTensor& b, double data_range) {
  check_same(a, b, "psnr");
  if (!(data_range > 0)) throw Error(ErrorCode::InvalidConfig, "psnr: data_range must be > 0");
  double se = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = static_cast<double>(a.values[i]) - b.values[i];
    se += d * d;
  }
  const double mse = se / static_cast<double>(a.size());
  if (mse == 0.0) return std::numeric_limits<double>::infinity();
  return 10.0 * std::log10(data_range * data_range / mse);
}

double ssim(const data::ImageTensor& a, const data::ImageTensor& b) {
  check_same(a, b, "ssim");
  if (a.channels != 1) throw Error(ErrorCode::ShapeMismatch, "ssim: single-channel images only");
  if (a.height < kSsimWindow || a.width < kSsimWindow) {
    throw Error(ErrorCode::ImageTooSmall, "ssim needs at least " + std::to_string(kSsimWindow) + "x" +
                                              std::to_string(kSsimWindow) + ", got " + std::to_string(a.height) + "x" +
                                              std::to_string(a.width));
  }
  const int h = a.height;
  const int w = a.width;
  const std::size_t n = a.size();
  std::vector<double> x(n), y(n), xx(n), yy(n), xy(n);
  for (std::size_t i = 0; i < n; ++i) {
    x[i] = a.values[i];
    y[i] = b.values[i];
    xx[i] = x[i] * x[i];
    yy[i] = y[i] * y[i];
    xy[i] = x[i] * y[i];
  }
  const auto k = gaussian_window();
  const auto mu_x = filter_valid(x, h, w, k);
  const auto mu_y = filter_valid(y, h, w, k);
  const auto e_xx = filter_valid(xx, h, w, k);
  const auto e_yy = filter_valid(yy, h, w, k);
  const auto e_xy = filter_valid(xy, h, w, k);
  const double c1 = (kSsimK1 * 1.0) * (kSsimK1 * 1.0);
  const double c2 = (kSsimK2 * 1.0) * (kSsimK2 * 1.0);
  double sum = 0.0;
  for (std::size_t i = 0; i < mu_x.size(); ++i) {
    const double sxx = e_xx[i] - mu_x[i] * mu_x[i];
    const double syy = e_yy[i] - mu_y[i] * mu_y[i];
    const double sxy = e_xy[i] - mu_x[i] * mu_y[i];
    const double num = (2 * mu_x[i] * mu_y[i] + c1) * (2 * sxy + c2);
    const double den = (mu_x[i] * mu_x[i] + mu_y[i] * mu_y[i] + c1) * (sxx + syy + c2);
    sum += num / den;
  }
  return sum / static_cast<double>(mu_x.size());
}

double mae(const data::ImageTensor& a, const data::ImageTensor& b) {
  check_same(a, b, "mae");
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += std::abs(static_cast<double>(a.values[i]) - b.values[i]);
  return s / static_cast<double>(a.size());
}

Summary summarize(const std::vector<double>& values) {
  Summary s;
  double sum = 0.0;
  int n = 0;
  for (double v : values) {
    if (std::isinf(v)) {
      ++s.inf_count;
      continue;
    }
    sum += v;
    ++n;
  }
  if (n == 0) return s;
  s.mean = sum / n;
  double var = 0.0;
  for (double v : values) {
    if (!std::isinf(v)) var += (v - s.mean) * (v - s.mean);
  }
  s.std = std::sqrt(var / n);
  return s;
}

MetricsReport make_report(data::Phase phase, std::vector<SampleMetrics> per_sample, nlohmann::json config) {
  MetricsReport r;
  r.phase = phase;
  r.per_sample = std::move(per_sample);
  r.config = std::move(config);
  std::vector<double> p, s, m;
  for (const auto& e : r.per_sample) {
    p.push_back(e.psnr);
    s.push_back(e.ssim);
    m.push_back(e.mae);
  }
  r.psnr = summarize(p);
  r.ssim = summarize(s);
  r.mae = summarize(m);
  return r;
}

namespace {

nlohmann::json number_or_null(double v) { return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr); }

nlohmann::json summary_json(const Summary& s, bool with_inf) {
  nlohmann::json j = {{"mean", s.mean}, {"std", s.std}};
  if (with_inf) j["inf_count"] = s.inf_count;
  return j;
}

}  // namespace

nlohmann::json to_json(const MetricsReport& r) {
  nlohmann::json samples = nlohmann::json::array();
  for (const auto& e : r.per_sample) {
    samples.push_back({{"id", e.id}, {"psnr", number_or_null(e.psnr)}, {"ssim", e.ssim}, {"mae", e.mae}});
  }
  return {{"phase", std::string(data::to_string(r.phase))},
          {"n", r.n()},
          {"psnr", summary_json(r.psnr, true)},
          {"ssim", summary_json(r.ssim, false)},
          {"mae", summary_json(r.mae, false)},
          {"per_sample", samples},
          {"config", r.config}};
}

MetricsReport report_from_json(const nlohmann::json& j) {
  std::vector<SampleMetrics> samples;
  try {
    for (const auto& e : j.at("per_sample")) {
      SampleMetrics m;
      m.id = e.at("id").get<std::string>();
      m.psnr = e.at("psnr").is_null() ? std::numeric_limits<double>::infinity() : e.at("psnr").get<double>();
      m.ssim = e.at("ssim").get<double>();
      m.mae = e.at("mae").get<double>();
      samples.push_back(std::move(m));
    }
    return make_report(data::phase_from_string(j.at("phase").get<std::string>()), std::move(samples),
                       j.value("config", nlohmann::json::object()));
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::SchemaError, std::string("metrics report: ") + e.what());
  }
}

PredictionFn identity_predictions(data::Phase phase) {
  return [phase](const data::MultimodalSample& s) { return s.target(phase); };
}

MetricsReport evaluate(const train::Checkpoint& ckpt, const std::vector<data::MultimodalSample>& dataset, int k,
                       const EvalOptions& options) {
  if (dataset.empty()) throw Error(ErrorCode::EmptyDataset, "evaluate: no samples");
  const data::Phase phase = ckpt.config.target_phase;
  std::vector<SampleMetrics> out;
  out.reserve(dataset.size());
  for (const auto& s : dataset) {
    const data::ImageTensor pred =
        options.predict ? options.predict(s)
                        : train::infer(ckpt, s.x, s.roi, k, {.zero_attention = options.zero_attention}).prediction;
    const data::ImageTensor& y = s.target(phase);
    out.push_back({s.id, psnr(pred, y), ssim(pred, y), mae(pred, y)});
  }
  nlohmann::json cfg = train::to_json(ckpt.config);
  cfg["k"] = k;
  cfg["step"] = ckpt.state.step;
  return make_report(phase, std::move(out), std::move(cfg));
}

}  // namespace aad::metrics
