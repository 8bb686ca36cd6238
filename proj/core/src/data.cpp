// Copyright 2026 The AAD-DCE Authors
// SPDX-License-Identifier: Apache-2.0

#include "aad/data.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <limits>
#include <set>

#include "aad/error.hpp"
#include "aad/rng.hpp"
#include "binary_io.hpp"

namespace aad::data {

using detail::get_u32;
using detail::put_u32;
using detail::read_all;
using detail::to_le;
using detail::write_all;

namespace {

constexpr std::array<char, 4> kTensorMagic{'A', 'A', 'D', 'T'};
constexpr std::uint32_t kTensorVersion = 1;

}  // namespace

ImageTensor ImageTensor::channel(int c) const {
  ImageTensor out(1, height, width);
  std::copy_n(values.begin() + static_cast<std::ptrdiff_t>(c * plane()), plane(), out.values.begin());
  return out;
}

std::string RoiRect::str() const {
  return "(" + std::to_string(top) + "," + std::to_string(left) + "," + std::to_string(height) + "," +
         std::to_string(width) + ")";
}

RoiRect centered_roi(int h, int w, int roi_h, int roi_w) {
  return RoiRect{(h - roi_h) / 2, (w - roi_w) / 2, roi_h, roi_w};
}

std::string_view to_string(Phase p) { return p == Phase::early ? "early" : "late"; }

Phase phase_from_string(std::string_view s) {
  if (s == "early") return Phase::early;
  if (s == "late") return Phase::late;
  throw Error(ErrorCode::InvalidConfig, "unknown target phase '" + std::string(s) + "'");
}

std::string_view to_string(Split s) { return s == Split::train ? "train" : "val"; }

std::filesystem::path DatasetManifest::resolve(const std::string& file) const {
  std::filesystem::path p(file);
  return p.is_absolute() ? p : base_dir / p;
}

void write_tensor_file(const ImageTensor& t, const std::filesystem::path& path) {
  if (t.size() != static_cast<std::size_t>(t.channels) * t.height * t.width) {
    throw Error(ErrorCode::DimMismatch, "tensor payload does not match its dims");
  }
  std::string buf(kTensorMagic.begin(), kTensorMagic.end());
  put_u32(buf, kTensorVersion);
  put_u32(buf, 3);
  put_u32(buf, static_cast<std::uint32_t>(t.channels));
  put_u32(buf, static_cast<std::uint32_t>(t.height));
  put_u32(buf, static_cast<std::uint32_t>(t.width));
  const std::size_t off = buf.size();
  buf.resize(off + 4 * t.size());
  for (std::size_t i = 0; i < t.size(); ++i) {
    std::uint32_t bits = to_le(std::bit_cast<std::uint32_t>(t.values[i]));
    std::memcpy(buf.data() + off + 4 * i, &bits, 4);
  }
  write_all(path, buf);
}

ImageTensor read_tensor_file(const std::filesystem::path& path) {
  const std::string buf = read_all(path);
  if (buf.size() < 4 || !std::equal(kTensorMagic.begin(), kTensorMagic.end(), buf.begin())) {
    throw Error(ErrorCode::BadMagic, "'" + path.string() + "' is not an AADT file");
  }
  std::size_t pos = 4;
  const std::uint32_t version = get_u32(buf, pos);
  if (version != kTensorVersion) {
    throw Error(ErrorCode::BadMagic, "unsupported AADT version " + std::to_string(version));
  }
  const std::uint32_t ndim = get_u32(buf, pos);
  if (ndim < 1 || ndim > 3) throw Error(ErrorCode::DimMismatch, "unsupported ndim " + std::to_string(ndim));
  std::array<std::uint32_t, 3> dims{1, 1, 1};
  for (std::uint32_t i = 0; i < ndim; ++i) dims[3 - ndim + i] = get_u32(buf, pos);
  const std::uint64_t count = static_cast<std::uint64_t>(dims[0]) * dims[1] * dims[2];
  if (buf.size() - pos != 4 * count) {
    throw Error(ErrorCode::DimMismatch, "'" + path.string() + "' declares " + std::to_string(count) +
                                            " values but carries " + std::to_string((buf.size() - pos) / 4.0));
  }
  ImageTensor t(static_cast<int>(dims[0]), static_cast<int>(dims[1]), static_cast<int>(dims[2]));
  for (std::size_t i = 0; i < t.size(); ++i) {
    std::uint32_t bits;
    std::memcpy(&bits, buf.data() + pos + 4 * i, 4);
    t.values[i] = std::bit_cast<float>(to_le(bits));
  }
  return t;
}

ImageTensor normalize_volume(const ImageTensor& t) {
  ImageTensor out = t;
  const std::size_t plane = t.plane();
  for (int c = 0; c < t.channels; ++c) {
    const float* src = t.values.data() + c * plane;
    float lo = std::numeric_limits<float>::infinity();
    float hi = -std::numeric_limits<float>::infinity();
    for (std::size_t i = 0; i < plane; ++i) {
      if (!std::isfinite(src[i])) {
        throw Error(ErrorCode::NonFiniteInput, "channel " + std::to_string(c) + " holds a non-finite value");
      }
      lo = std::min(lo, src[i]);
      hi = std::max(hi, src[i]);
    }
    float* dst = out.values.data() + c * plane;
    if (hi == lo) {
      std::fill_n(dst, plane, 0.5f);
      continue;
    }
    const double range = static_cast<double>(hi) - lo;
    for (std::size_t i = 0; i < plane; ++i) {
      dst[i] = std::clamp(static_cast<float>((static_cast<double>(src[i]) - lo) / range), 0.0f, 1.0f);
    }
  }
  return out;
}

ImageTensor extract_roi(const ImageTensor& t, const RoiRect& roi) {
  if (!roi.inside(t.height, t.width)) {
    throw Error(ErrorCode::RoiOutOfBounds,
                "roi " + roi.str() + " outside " + std::to_string(t.height) + "x" + std::to_string(t.width));
  }
  ImageTensor out(t.channels, roi.height, roi.width);
  for (int c = 0; c < t.channels; ++c) {
    for (int i = 0; i < roi.height; ++i) {
      for (int j = 0; j < roi.width; ++j) out.at(c, i, j) = t.at(c, roi.top + i, roi.left + j);
    }
  }
  return out;
}

ImageTensor mean_fill_channel(const ImageTensor& x, int c) {
  if (c < 0 || c >= x.channels) throw Error(ErrorCode::ShapeMismatch, "channel index out of range");
  ImageTensor out = x;
  const std::size_t plane = x.plane();
  double s = 0.0;
  for (std::size_t i = 0; i < plane; ++i) s += x.values[c * plane + i];
  const float mean = static_cast<float>(s / static_cast<double>(plane));
  std::fill_n(out.values.begin() + static_cast<std::ptrdiff_t>(c * plane), plane, mean);
  return out;
}

std::vector<std::vector<std::string>> make_batches(const std::vector<std::string>& ids, int batch_size,
                                                   std::uint64_t seed, int epoch, bool shuffle) {
  if (ids.empty()) throw Error(ErrorCode::EmptyDataset, "no samples to batch");
  if (batch_size < 1) throw Error(ErrorCode::InvalidConfig, "batch_size must be >= 1");
  std::vector<std::string> order = ids;
  if (shuffle) {
    Rng rng(mix_seed(seed, static_cast<std::uint64_t>(epoch)));
    for (std::size_t i = order.size() - 1; i > 0; --i) {
      std::swap(order[i], order[rng.below(i + 1)]);
    }
  }
  std::vector<std::vector<std::string>> batches;
  for (std::size_t i = 0; i < order.size(); i += batch_size) {
    const std::size_t end = std::min(order.size(), i + static_cast<std::size_t>(batch_size));
    batches.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(i), order.begin() + static_cast<std::ptrdiff_t>(end));
  }
  return batches;
}

std::vector<std::vector<std::string>> make_batches(const DatasetManifest& manifest, int batch_size,
                                                   std::uint64_t seed, int epoch, bool shuffle) {
  std::vector<std::string> ids;
  ids.reserve(manifest.samples.size());
  for (const auto& s : manifest.samples) ids.push_back(s.id);
  return make_batches(ids, batch_size, seed, epoch, shuffle);
}

nlohmann::json manifest_to_json(const DatasetManifest& m) {
  nlohmann::json samples = nlohmann::json::array();
  for (const auto& s : m.samples) {
    nlohmann::json e{{"id", s.id},       {"t2w", s.t2w},     {"adc", s.adc},
                     {"t1pre", s.t1pre}, {"early", s.early}, {"late", s.late},
                     {"roi", {s.roi.top, s.roi.left, s.roi.height, s.roi.width}}};
    if (s.lesion_mask) e["lesion_mask"] = *s.lesion_mask;
    samples.push_back(std::move(e));
  }
  return {{"geometry", {{"h", m.geometry.h}, {"w", m.geometry.w}, {"roi_h", m.geometry.roi_h}, {"roi_w", m.geometry.roi_w}}},
          {"samples", std::move(samples)},
          {"split", std::string(to_string(m.split))}};
}

DatasetManifest manifest_from_json(const nlohmann::json& j, const std::filesystem::path& base_dir) {
  DatasetManifest m;
  m.base_dir = base_dir;
  try {
    const auto& g = j.at("geometry");
    m.geometry = Geometry{g.at("h").get<int>(), g.at("w").get<int>(), g.at("roi_h").get<int>(), g.at("roi_w").get<int>()};
    const std::string split = j.value("split", "train");
    if (split == "train") {
      m.split = Split::train;
    } else if (split == "val") {
      m.split = Split::val;
    } else {
      throw Error(ErrorCode::SchemaError, "split must be \"train\" or \"val\", got \"" + split + "\"");
    }
    for (const auto& e : j.at("samples")) {
      SampleEntry s;
      s.id = e.at("id").get<std::string>();
      s.t2w = e.at("t2w").get<std::string>();
      s.adc = e.at("adc").get<std::string>();
      s.t1pre = e.at("t1pre").get<std::string>();
      s.early = e.at("early").get<std::string>();
      s.late = e.at("late").get<std::string>();
      if (e.contains("roi")) {
        const auto& r = e.at("roi");
        if (!r.is_array() || r.size() != 4) throw Error(ErrorCode::SchemaError, "sample '" + s.id + "': roi must be [top,left,h,w]");
        s.roi = RoiRect{r[0].get<int>(), r[1].get<int>(), r[2].get<int>(), r[3].get<int>()};
      } else {
        s.roi = centered_roi(m.geometry.h, m.geometry.w, m.geometry.roi_h, m.geometry.roi_w);
      }
      if (e.contains("lesion_mask")) s.lesion_mask = e.at("lesion_mask").get<std::string>();
      m.samples.push_back(std::move(s));
    }
  } catch (const nlohmann::json::exception& ex) {
    throw Error(ErrorCode::SchemaError, std::string("manifest: ") + ex.what());
  }
  return m;
}

DatasetManifest read_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::IoFailure, "cannot open manifest '" + path.string() + "'");
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::parse_error& ex) {
    throw Error(ErrorCode::SchemaError, "manifest '" + path.string() + "': " + ex.what());
  }
  DatasetManifest m = manifest_from_json(j, path.parent_path());
  validate_manifest(m, false);
  return m;
}

void write_manifest(const DatasetManifest& m, const std::filesystem::path& path) {
  write_all(path, manifest_to_json(m).dump(2) + "\n");
}

void validate_manifest(const DatasetManifest& m, bool check_files) {
  const Geometry& g = m.geometry;
  if (g.h < 1 || g.w < 1 || g.roi_h < 1 || g.roi_w < 1 || g.roi_h > g.h || g.roi_w > g.w) {
    throw Error(ErrorCode::InvalidGeometry, "bad manifest geometry");
  }
  std::set<std::string> seen;
  for (const auto& s : m.samples) {
    if (!seen.insert(s.id).second) throw Error(ErrorCode::SchemaError, "duplicate sample id '" + s.id + "'");
    if (!s.roi.inside(g.h, g.w) || s.roi.height != g.roi_h || s.roi.width != g.roi_w) {
      throw Error(ErrorCode::RoiOutOfBounds, "sample '" + s.id + "' roi " + s.roi.str() + " does not fit geometry");
    }
    if (!check_files) continue;
    auto check = [&](const std::string& file, int channels) {
      const ImageTensor t = read_tensor_file(m.resolve(file));
      if (t.channels != channels || t.height != g.h || t.width != g.w) {
        throw Error(ErrorCode::DimMismatch, "'" + file + "' does not match the declared geometry");
      }
    };
    for (const auto* f : {&s.t2w, &s.adc, &s.t1pre, &s.early, &s.late}) check(*f, 1);
    if (s.lesion_mask) check(*s.lesion_mask, 1);
  }
}

std::vector<MultimodalSample> load_dataset(const DatasetManifest& m) {
  validate_manifest(m, false);
  const Geometry& g = m.geometry;
  auto load = [&](const std::string& file) {
    ImageTensor t = read_tensor_file(m.resolve(file));
    if (t.channels != 1 || t.height != g.h || t.width != g.w) {
      throw Error(ErrorCode::DimMismatch, "'" + file + "' does not match the declared geometry");
    }
    return t;
  };
  std::vector<MultimodalSample> out;
  out.reserve(m.samples.size());
  for (const auto& e : m.samples) {
    MultimodalSample s;
    s.id = e.id;
    s.roi = e.roi;
    s.x = ImageTensor(3, g.h, g.w);
    const std::array<const std::string*, 3> inputs{&e.t2w, &e.adc, &e.t1pre};
    for (int c = 0; c < 3; ++c) {
      const ImageTensor t = load(*inputs[c]);
      std::copy(t.values.begin(), t.values.end(), s.x.values.begin() + static_cast<std::ptrdiff_t>(c * s.x.plane()));
    }
    s.y_early = load(e.early);
    s.y_late = load(e.late);
    if (e.lesion_mask) s.lesion_mask = load(*e.lesion_mask);
    out.push_back(std::move(s));
  }
  return out;
}

}  // namespace aad::data
