// Copyright 2026 The AAD-DCE Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

namespace aad::data {

/// channels×height×width image, row-major, 32-bit values.
struct ImageTensor {
  int channels = 0;
  int height = 0;
  int width = 0;
  std::vector<float> values;

  ImageTensor() = default;
  ImageTensor(int c, int h, int w, float fill = 0.0f)
      : channels(c), height(h), width(w), values(static_cast<std::size_t>(c) * h * w, fill) {}

  std::size_t size() const noexcept { return values.size(); }
  std::size_t plane() const noexcept { return static_cast<std::size_t>(height) * width; }

  float& at(int c, int i, int j) { return values[c * plane() + static_cast<std::size_t>(i) * width + j]; }
  float at(int c, int i, int j) const { return values[c * plane() + static_cast<std::size_t>(i) * width + j]; }

  /// Single-channel copy of channel `c`.
  ImageTensor channel(int c) const;

  bool operator==(const ImageTensor&) const = default;
};

struct RoiRect {
  int top = 0;
  int left = 0;
  int height = 1;
  int width = 1;

  /// True when the rectangle is non-empty and lies inside an h×w image.
  bool inside(int h, int w) const noexcept {
    return height >= 1 && width >= 1 && top >= 0 && left >= 0 && top + height <= h && left + width <= w;
  }
  std::string str() const;

  bool operator==(const RoiRect&) const = default;
};

/// The roi_h×roi_w rectangle centered in an h×w image (rounded toward the top-left).
RoiRect centered_roi(int h, int w, int roi_h, int roi_w);

enum class Phase { early, late };

std::string_view to_string(Phase p);
Phase phase_from_string(std::string_view s);

/// Channel order of the input stack x.
enum Modality : int { kT2W = 0, kADC = 1, kT1Pre = 2 };

struct MultimodalSample {
  std::string id;
  ImageTensor x;        // 3×H×W: T2W, ADC, T1-pre
  ImageTensor y_early;  // 1×H×W
  ImageTensor y_late;   // 1×H×W
  RoiRect roi;
  std::optional<ImageTensor> lesion_mask;

  const ImageTensor& target(Phase p) const { return p == Phase::early ? y_early : y_late; }
};

struct Geometry {
  int h = 0;
  int w = 0;
  int roi_h = 0;
  int roi_w = 0;

  bool operator==(const Geometry&) const = default;
};

struct SampleEntry {
  std::string id;
  std::string t2w;
  std::string adc;
  std::string t1pre;
  std::string early;
  std::string late;
  RoiRect roi;
  std::optional<std::string> lesion_mask;
};

enum class Split { train, val };

std::string_view to_string(Split s);

struct DatasetManifest {
  Geometry geometry;
  std::vector<SampleEntry> samples;
  Split split = Split::train;
  // Relative sample paths resolve against this directory.
  std::filesystem::path base_dir;

  std::filesystem::path resolve(const std::string& file) const;
};

// AADT tensor files: "AADT", u32 version = 1, u32 ndim, u32 dims..., f32
// payload; little-endian, row-major. Images are written with ndim = 3.
void write_tensor_file(const ImageTensor& t, const std::filesystem::path& path);
ImageTensor read_tensor_file(const std::filesystem::path& path);

/// Per-channel min-max scaling to [0,1]; constant channels become 0.5.
ImageTensor normalize_volume(const ImageTensor& t);

/// channels×roi.height×roi.width crop.
ImageTensor extract_roi(const ImageTensor& t, const RoiRect& roi);

/// Copy of `x` with channel `c` replaced by its mean value.
ImageTensor mean_fill_channel(const ImageTensor& x, int c);

/// Sample-id batches for one epoch. The order depends only on (seed, epoch).
std::vector<std::vector<std::string>> make_batches(const DatasetManifest& manifest, int batch_size,
                                                   std::uint64_t seed, int epoch, bool shuffle);
std::vector<std::vector<std::string>> make_batches(const std::vector<std::string>& ids, int batch_size,
                                                   std::uint64_t seed, int epoch, bool shuffle);

nlohmann::json manifest_to_json(const DatasetManifest& m);
DatasetManifest manifest_from_json(const nlohmann::json& j, const std::filesystem::path& base_dir);
DatasetManifest read_manifest(const std::filesystem::path& path);
void write_manifest(const DatasetManifest& m, const std::filesystem::path& path);

/// Checks unique ids and ROI placement; with `check_files`, also that every
/// referenced file exists and has the declared geometry.
void validate_manifest(const DatasetManifest& m, bool check_files);

/// Reads every sample of the manifest into memory.
std::vector<MultimodalSample> load_dataset(const DatasetManifest& m);

}  // namespace aad::data
