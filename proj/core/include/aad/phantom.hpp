// Copyright 2026 The AAD-DCE Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include "aad/data.hpp"

// Synthetic multimodal prostate-like phantoms with wash-in/wash-out lesions.
//
// Each sample has an elliptical gland with an inner zone, smooth texture and
// 1-3 elliptical lesions placed inside both the gland and the ROI. Lesions
// restrict diffusion (dark on ADC), are nearly invisible on T2W and T1-pre,
// enhance strongly on the early response and partially wash out on the late
// response. Background pixels are exactly zero in every channel.
namespace aad::data {

struct PhantomOptions {
  std::uint64_t seed = 0;
  int n = 0;
  Geometry geometry{64, 64, 24, 24};
  Split split = Split::train;
};

/// Contrast figures of one phantom sample, measured on its stored values.
/// Gland support is the non-zero T2W region.
struct PhantomContrast {
  double early_lesion = 0, early_tissue = 0;
  double late_lesion = 0, late_tissue = 0;
  double adc_lesion = 0, adc_tissue = 0;

  double early_contrast() const { return early_lesion - early_tissue; }
  double late_contrast() const { return late_lesion - late_tissue; }
  /// Wash-in >= 0.2, 0 < late contrast < early contrast, ADC restriction.
  bool satisfies_construction_rules() const;
};

PhantomContrast measure_phantom_contrast(const MultimodalSample& s);

/// One phantom, fully determined by (seed, split, index).
MultimodalSample generate_phantom_sample(std::uint64_t seed, Split split, int index, const Geometry& g);

/// Writes n phantoms as AADT files plus `manifest_name` under out_dir.
DatasetManifest generate_phantom_dataset(const PhantomOptions& opts, const std::filesystem::path& out_dir,
                                         const std::string& manifest_name = "manifest.json");

}  // namespace aad::data
