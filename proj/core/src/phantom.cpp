// Copyright 2026 The AAD-DCE Authors
// SPDX-License-Identifier: Apache-2.0

#include "aad/phantom.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <vector>

#include "aad/error.hpp"
#include "aad/rng.hpp"

namespace aad::data {
namespace {

struct Ellipse {
  double cy, cx, a, b, theta;  // a along rotated x, b along rotated y

  // <= 1 inside
  double level(double y, double x) const {
    const double dx = x - cx;
    const double dy = y - cy;
    const double c = std::cos(theta);
    const double s = std::sin(theta);
    const double u = (dx * c + dy * s) / a;
    const double v = (-dx * s + dy * c) / b;
    return u * u + v * v;
  }
  bool contains(int i, int j) const { return level(i + 0.5, j + 0.5) <= 1.0; }
};

// Smooth field in [-1, 1] built from three random plane waves.
class Texture {
 public:
  Texture(Rng& rng, int h, int w) {
    double total = 0.0;
    for (auto& wv : waves_) {
      const double f = 2.0 * std::numbers::pi * rng.uniform(1.0, 4.0) / std::max(h, w);
      const double dir = rng.uniform(0.0, 2.0 * std::numbers::pi);
      wv = {f * std::cos(dir), f * std::sin(dir), rng.uniform(0.0, 2.0 * std::numbers::pi), rng.uniform(0.5, 1.0)};
      total += wv[3];
    }
    norm_ = 1.0 / total;
  }
  double at(int i, int j) const {
    double s = 0.0;
    for (const auto& wv : waves_) s += wv[3] * std::sin(wv[0] * j + wv[1] * i + wv[2]);
    return s * norm_;
  }

 private:
  std::array<std::array<double, 4>, 3> waves_{};
  double norm_ = 1.0;
};

std::uint64_t sample_salt(Split split, int index) {
  return static_cast<std::uint64_t>(index) * 2 + (split == Split::val ? 1 : 0);
}

bool try_generate(Rng& rng, const Geometry& g, const RoiRect& roi, MultimodalSample& s) {
  const int H = g.h;
  const int W = g.w;
  const double side = std::min(H, W);
  const Ellipse gland{H / 2.0 + rng.uniform(-0.03, 0.03) * H, W / 2.0 + rng.uniform(-0.03, 0.03) * W,
                      rng.uniform(0.30, 0.38) * W, rng.uniform(0.25, 0.32) * H, rng.uniform(-0.3, 0.3)};
  const Ellipse inner{gland.cy, gland.cx, gland.a * 0.55, gland.b * 0.55, gland.theta};

  std::vector<std::uint8_t> tissue(static_cast<std::size_t>(H) * W, 0);
  for (int i = 0; i < H; ++i) {
    for (int j = 0; j < W; ++j) tissue[i * W + j] = gland.contains(i, j) ? 1 : 0;
  }

  // Lesions inside gland and ROI.
  std::vector<std::uint8_t> lesion(tissue.size(), 0);
  const int n_lesions = 1 + static_cast<int>(rng.below(3));
  for (int l = 0; l < n_lesions; ++l) {
    bool placed = false;
    for (int attempt = 0; attempt < 64 && !placed; ++attempt) {
      const double r = std::max(1.2, rng.uniform(0.04, 0.075) * side);
      const double ra = r * rng.uniform(0.8, 1.2);
      const double rb = r * rng.uniform(0.8, 1.2);
      const double margin = std::max(ra, rb) + 0.5;
      if (2 * margin >= roi.height || 2 * margin >= roi.width) continue;
      const Ellipse e{rng.uniform(roi.top + margin, roi.top + roi.height - margin),
                      rng.uniform(roi.left + margin, roi.left + roi.width - margin), ra, rb,
                      rng.uniform(0.0, std::numbers::pi)};
      std::vector<int> pix;
      bool ok = true;
      for (int i = roi.top; i < roi.top + roi.height && ok; ++i) {
        for (int j = roi.left; j < roi.left + roi.width; ++j) {
          if (!e.contains(i, j)) continue;
          if (!tissue[i * W + j]) {
            ok = false;
            break;
          }
          pix.push_back(i * W + j);
        }
      }
      if (!ok || pix.empty()) continue;
      for (int p : pix) lesion[p] = 1;
      placed = true;
    }
  }
  if (std::count(lesion.begin(), lesion.end(), 1) == 0) return false;

  const Texture t2_tex(rng, H, W);
  const Texture adc_tex(rng, H, W);
  const Texture t1_tex(rng, H, W);

  s.x = ImageTensor(3, H, W);
  s.y_early = ImageTensor(1, H, W);
  s.y_late = ImageTensor(1, H, W);
  ImageTensor mask(1, H, W);
  auto noisy = [&](double v, double sigma) { return static_cast<float>(std::clamp(v + sigma * rng.normal(), 0.0, 1.0)); };
  for (int i = 0; i < H; ++i) {
    for (int j = 0; j < W; ++j) {
      if (!tissue[i * W + j]) continue;  // background stays exactly zero
      const bool tz = inner.contains(i, j);
      const bool les = lesion[i * W + j] != 0;
      double t2 = tz ? 0.38 + 0.05 * t2_tex.at(i, j) : 0.58 + 0.06 * t2_tex.at(i, j);
      double adc = tz ? 0.55 + 0.04 * adc_tex.at(i, j) : 0.68 + 0.05 * adc_tex.at(i, j);
      const double t1 = (tz ? 0.40 : 0.44) + 0.04 * t1_tex.at(i, j);
      double enh_early = tz ? 0.20 : 0.12;
      double enh_late = tz ? 0.22 : 0.15;
      if (les) {
        t2 -= 0.06;
        adc = 0.22 + 0.03 * adc_tex.at(i, j);
        enh_early = 0.50;
        enh_late = 0.30;
      }
      s.x.at(kT2W, i, j) = noisy(t2, 0.015);
      s.x.at(kADC, i, j) = noisy(adc, 0.015);
      s.x.at(kT1Pre, i, j) = noisy(t1, 0.015);
      s.y_early.at(0, i, j) = noisy(t1 + enh_early, 0.01);
      s.y_late.at(0, i, j) = noisy(t1 + enh_late, 0.01);
      mask.at(0, i, j) = les ? 1.0f : 0.0f;
    }
  }
  s.x = normalize_volume(s.x);
  s.y_early = normalize_volume(s.y_early);
  s.y_late = normalize_volume(s.y_late);
  s.lesion_mask = std::move(mask);
  s.roi = roi;
  return measure_phantom_contrast(s).satisfies_construction_rules();
}

}  // namespace

bool PhantomContrast::satisfies_construction_rules() const {
  return early_contrast() >= 0.2 && late_contrast() > 0.0 && late_contrast() < early_contrast() &&
         adc_lesion < adc_tissue;
}

PhantomContrast measure_phantom_contrast(const MultimodalSample& s) {
  if (!s.lesion_mask) throw Error(ErrorCode::InvalidConfig, "sample '" + s.id + "' has no lesion mask");
  const ImageTensor& m = *s.lesion_mask;
  double sums[6] = {0, 0, 0, 0, 0, 0};
  double n_les = 0;
  double n_tis = 0;
  for (int i = 0; i < s.x.height; ++i) {
    for (int j = 0; j < s.x.width; ++j) {
      const bool les = m.at(0, i, j) > 0.5f;
      const bool tis = s.x.at(kT2W, i, j) > 0.0f;
      if (les) {
        sums[0] += s.y_early.at(0, i, j);
        sums[2] += s.y_late.at(0, i, j);
        sums[4] += s.x.at(kADC, i, j);
        n_les += 1;
      } else if (tis) {
        sums[1] += s.y_early.at(0, i, j);
        sums[3] += s.y_late.at(0, i, j);
        sums[5] += s.x.at(kADC, i, j);
        n_tis += 1;
      }
    }
  }
  if (n_les == 0 || n_tis == 0) throw Error(ErrorCode::InvalidGeometry, "sample '" + s.id + "' lacks lesion or tissue");
  return PhantomContrast{sums[0] / n_les, sums[1] / n_tis, sums[2] / n_les,
                         sums[3] / n_tis, sums[4] / n_les, sums[5] / n_tis};
}

MultimodalSample generate_phantom_sample(std::uint64_t seed, Split split, int index, const Geometry& g) {
  if (g.h < 8 || g.w < 8 || g.roi_h < 4 || g.roi_w < 4 || g.roi_h > g.h || g.roi_w > g.w) {
    throw Error(ErrorCode::InvalidGeometry, "phantom geometry " + std::to_string(g.h) + "x" + std::to_string(g.w) +
                                                " with roi " + std::to_string(g.roi_h) + "x" + std::to_string(g.roi_w));
  }
  char id[32];
  std::snprintf(id, sizeof(id), "%s_%05d", split == Split::train ? "train" : "val", index);
  Rng rng(mix_seed(seed, sample_salt(split, index)));
  const RoiRect roi = centered_roi(g.h, g.w, g.roi_h, g.roi_w);
  MultimodalSample s;
  s.id = id;
  for (int attempt = 0; attempt < 100; ++attempt) {
    if (try_generate(rng, g, roi, s)) return s;
  }
  throw Error(ErrorCode::InvalidGeometry, "could not place a valid phantom for sample '" + s.id + "'");
}

DatasetManifest generate_phantom_dataset(const PhantomOptions& opts, const std::filesystem::path& out_dir,
                                         const std::string& manifest_name) {
  if (opts.n < 1) throw Error(ErrorCode::InvalidGeometry, "phantom count must be >= 1");
  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  if (ec) throw Error(ErrorCode::IoFailure, "cannot create '" + out_dir.string() + "': " + ec.message());

  DatasetManifest m;
  m.geometry = opts.geometry;
  m.split = opts.split;
  m.base_dir = out_dir;
  for (int i = 0; i < opts.n; ++i) {
    const MultimodalSample s = generate_phantom_sample(opts.seed, opts.split, i, opts.geometry);
    SampleEntry e;
    e.id = s.id;
    e.t2w = s.id + "_t2w.aadt";
    e.adc = s.id + "_adc.aadt";
    e.t1pre = s.id + "_t1pre.aadt";
    e.early = s.id + "_early.aadt";
    e.late = s.id + "_late.aadt";
    e.lesion_mask = s.id + "_lesion.aadt";
    e.roi = s.roi;
    write_tensor_file(s.x.channel(kT2W), out_dir / e.t2w);
    write_tensor_file(s.x.channel(kADC), out_dir / e.adc);
    write_tensor_file(s.x.channel(kT1Pre), out_dir / e.t1pre);
    write_tensor_file(s.y_early, out_dir / e.early);
    write_tensor_file(s.y_late, out_dir / e.late);
    write_tensor_file(*s.lesion_mask, out_dir / *e.lesion_mask);
    m.samples.push_back(std::move(e));
  }
  write_manifest(m, out_dir / manifest_name);
  return m;
}

}  // namespace aad::data
