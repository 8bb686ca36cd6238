// Copyright 2026 The AAD-DCE Authors
// SPDX-License-Identifier: Apache-2.0

#include "aad/aggregation.hpp"

#include <algorithm>
#include <cmath>

#include "aad/batch.hpp"
#include "aad/error.hpp"
#include "aad/ops.hpp"
#include "aad/rng.hpp"
#include "init.hpp"

namespace aad::agg {

std::string_view to_string(EnsembleMode m) {
  switch (m) {
    case EnsembleMode::global_only: return "global_only";
    case EnsembleMode::multiply: return "multiply";
    case EnsembleMode::add: return "add";
    case EnsembleMode::embed: return "embed";
  }
  return "embed";
}

EnsembleMode ensemble_from_string(std::string_view s) {
  if (s == "global_only") return EnsembleMode::global_only;
  if (s == "multiply") return EnsembleMode::multiply;
  if (s == "add") return EnsembleMode::add;
  if (s == "embed") return EnsembleMode::embed;
  throw Error(ErrorCode::InvalidConfig, "unknown ensemble mode '" + std::string(s) + "'");
}

AadModel build_aad(const ad::AdConfig& cfg, std::uint64_t seed) {
  AadModel m{cfg, {}};
  ad::append_ad_params(m.params, cfg, kGlobalPrefix, mix_seed(seed, 1));
  ad::append_ad_params(m.params, cfg, kLocalPrefix, mix_seed(seed, 2));
  Rng rng(mix_seed(seed, 3));
  detail::add_layer(m.params, rng, "aad/classifier", {1, 2 * cfg.n_c}, 2 * cfg.n_c, 1, 1.0);
  return m;
}

template <typename T>
AadVars aad_graph(nn::Graph<T>& g, const ad::AdConfig& cfg, const nn::ParamSet<T>& params, nn::Var y,
                  std::span<const data::RoiRect> rois, bool trainable, bool zero_attention) {
  const nn::Tensor<T>& yv = g.value(y);
  if (yv.ndim() != 4 || yv.dim(1) != cfg.in_channels) {
    throw Error(ErrorCode::ShapeMismatch, "discriminator expects N×" + std::to_string(cfg.in_channels) +
                                              "×H×W, got " + nn::shape_string(yv.shape()));
  }
  if (rois.size() != static_cast<std::size_t>(yv.dim(0)) || rois.empty()) {
    throw Error(ErrorCode::ShapeMismatch, "need one roi per batch element");
  }
  std::vector<nn::CropOrigin> origins;
  for (const auto& r : rois) {
    if (!r.inside(yv.dim(2), yv.dim(3))) {
      throw Error(ErrorCode::RoiOutOfBounds, "roi " + r.str() + " outside " + std::to_string(yv.dim(2)) + "x" +
                                                 std::to_string(yv.dim(3)));
    }
    if (r.height != rois[0].height || r.width != rois[0].width) {
      throw Error(ErrorCode::ShapeMismatch, "rois within one batch must share their size");
    }
    origins.push_back({r.top, r.left});
  }
  const nn::Var crop = nn::crop(g, y, std::span<const nn::CropOrigin>(origins), rois[0].height, rois[0].width);
  const ad::AdVars global = ad::ad_graph(g, cfg, params, kGlobalPrefix, y, trainable, zero_attention);
  const ad::AdVars local = ad::ad_graph(g, cfg, params, kLocalPrefix, crop, trainable, zero_attention);
  const nn::Var feats = nn::concat_channels(g, global.embedding, local.embedding);
  const nn::Var logit = nn::linear(g, feats, g.param(params, "aad/classifier/weight", trainable),
                                   g.param(params, "aad/classifier/bias", trainable));
  return AadVars{nn::sigmoid(g, logit), global.embedding, local.embedding, global.attention, local.attention};
}

template AadVars aad_graph<float>(nn::Graph<float>&, const ad::AdConfig&, const nn::ParamSet<float>&, nn::Var,
                                  std::span<const data::RoiRect>, bool, bool);
template AadVars aad_graph<double>(nn::Graph<double>&, const ad::AdConfig&, const nn::ParamSet<double>&, nn::Var,
                                   std::span<const data::RoiRect>, bool, bool);

namespace {

ad::AttentionMap map_from_batch(const nn::Tensor<float>& t, int n) { return mean_attention(from_batch(t, n)); }

std::vector<float> row_of(const nn::Tensor<float>& t, int n) {
  const int k = t.dim(1);
  return std::vector<float>(t.data() + static_cast<std::size_t>(n) * k, t.data() + static_cast<std::size_t>(n + 1) * k);
}

}  // namespace

std::vector<AadOutput> aad_forward(const AadModel& model, const nn::Tensor<float>& y,
                                   std::span<const data::RoiRect> rois, bool zero_attention) {
  nn::Graph<float> g;
  const AadVars v = aad_graph(g, model.config, model.params, g.constant(y), rois, false, zero_attention);
  std::vector<AadOutput> out(static_cast<std::size_t>(y.dim(0)));
  for (int n = 0; n < y.dim(0); ++n) {
    AadOutput& o = out[n];
    o.score = g.value(v.score)[n];
    o.m_global = map_from_batch(g.value(v.att_global), n);
    o.m_local = map_from_batch(g.value(v.att_local), n);
    o.e_global = row_of(g.value(v.emb_global), n);
    o.e_local = row_of(g.value(v.emb_local), n);
  }
  return out;
}

AadOutput aad_forward(const AadModel& model, const data::ImageTensor& y, const data::RoiRect& roi) {
  return aad_forward(model, to_batch(y), std::span<const data::RoiRect>(&roi, 1)).front();
}

ad::AttentionMap mean_attention(const data::ImageTensor& att) {
  if (att.channels < 1) throw Error(ErrorCode::ShapeMismatch, "attention output has no channels");
  ad::AttentionMap m(att.height, att.width);
  if (att.channels == 1) {
    m.values = att.values;
    return m;
  }
  const std::size_t plane = att.plane();
  for (std::size_t i = 0; i < plane; ++i) {
    double s = 0.0;
    for (int c = 0; c < att.channels; ++c) s += att.values[c * plane + i];
    m.values[i] = static_cast<float>(s / att.channels);
  }
  return m;
}

ad::AttentionMap resize_map(const ad::AttentionMap& m, int h, int w) {
  if (h < 1 || w < 1 || m.height < 1 || m.width < 1) throw Error(ErrorCode::ShapeMismatch, "resize_map: empty map");
  ad::AttentionMap out(h, w);
  const double sy = static_cast<double>(m.height) / h;
  const double sx = static_cast<double>(m.width) / w;
  auto source = [](int dst, double scale, int src_size, int& i0, int& i1, float& frac) {
    double s = (dst + 0.5) * scale - 0.5;
    s = std::clamp(s, 0.0, static_cast<double>(src_size - 1));
    i0 = static_cast<int>(std::floor(s));
    i1 = std::min(i0 + 1, src_size - 1);
    frac = static_cast<float>(s - i0);
  };
  // a + f·(b − a) keeps equal neighbours exact.
  auto lerp = [](float a, float b, float f) { return a + f * (b - a); };
  for (int i = 0; i < h; ++i) {
    int y0, y1;
    float fy;
    source(i, sy, m.height, y0, y1, fy);
    for (int j = 0; j < w; ++j) {
      int x0, x1;
      float fx;
      source(j, sx, m.width, x0, x1, fx);
      const float top = lerp(m.at(y0, x0), m.at(y0, x1), fx);
      const float bot = lerp(m.at(y1, x0), m.at(y1, x1), fx);
      out.at(i, j) = std::clamp(lerp(top, bot, fy), 0.0f, 1.0f);
    }
  }
  return out;
}

ad::AttentionMap aggregate_attention(const ad::AttentionMap& m_global, const ad::AttentionMap& m_local,
                                     const data::RoiRect& roi, int H, int W, EnsembleMode mode) {
  if (!roi.inside(H, W)) {
    throw Error(ErrorCode::RoiOutOfBounds, "roi " + roi.str() + " outside " + std::to_string(H) + "x" + std::to_string(W));
  }
  ad::AttentionMap out = resize_map(m_global, H, W);
  if (mode == EnsembleMode::global_only) return out;
  const ad::AttentionMap local = resize_map(m_local, roi.height, roi.width);
  for (int i = 0; i < roi.height; ++i) {
    for (int j = 0; j < roi.width; ++j) {
      float& g = out.at(roi.top + i, roi.left + j);
      const float l = local.at(i, j);
      switch (mode) {
        case EnsembleMode::embed: g = l; break;
        case EnsembleMode::add: g = std::min(1.0f, g + l); break;
        case EnsembleMode::multiply: g = g * l; break;
        case EnsembleMode::global_only: break;
      }
    }
  }
  return out;
}

}  // namespace aad::agg
