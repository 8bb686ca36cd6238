// Copyright 2026 The AAD-DCE Authors
// SPDX-License-Identifier: Apache-2.0

#include <algorithm>
#include <array>

#include "aad/error.hpp"
#include "aad/training.hpp"
#include "binary_io.hpp"

namespace aad::train {

namespace {

constexpr std::array<char, 4> kMagic{'A', 'A', 'D', 'C'};
constexpr std::uint32_t kVersion = 1;

constexpr const char* kGenMoments[] = {"adam/gen/m/", "adam/gen/v/"};
constexpr const char* kAadMoments[] = {"adam/aad/m/", "adam/aad/v/"};
constexpr const char* kCachePrefix = "cache/";

void put_entry(std::string& buf, const std::string& name, const std::vector<int>& dims, const float* data,
               std::size_t n) {
  detail::put_u32(buf, static_cast<std::uint32_t>(name.size()));
  buf += name;
  detail::put_u32(buf, static_cast<std::uint32_t>(dims.size()));
  for (int d : dims) detail::put_u32(buf, static_cast<std::uint32_t>(d));
  for (std::size_t i = 0; i < n; ++i) detail::put_f32(buf, data[i]);
}

void put_params(std::string& buf, const nn::ParamSet<float>& ps, const std::string& prefix) {
  for (const auto& e : ps.entries()) put_entry(buf, prefix + e.name, e.value.shape(), e.value.data(), e.value.size());
}

struct Entry {
  std::string name;
  nn::Tensor<float> value;
};

Entry get_entry(const std::string& buf, std::size_t& pos) {
  const std::uint32_t len = detail::get_u32(buf, pos);
  if (pos + len > buf.size()) throw Error(ErrorCode::DimMismatch, "truncated entry name");
  Entry e;
  e.name = buf.substr(pos, len);
  pos += len;
  const std::uint32_t ndim = detail::get_u32(buf, pos);
  if (ndim > 8) throw Error(ErrorCode::DimMismatch, "entry '" + e.name + "' has ndim " + std::to_string(ndim));
  std::vector<int> dims(ndim);
  std::uint64_t count = 1;
  for (auto& d : dims) {
    d = static_cast<int>(detail::get_u32(buf, pos));
    count *= static_cast<std::uint64_t>(d);
  }
  if (pos + 4 * count > buf.size()) throw Error(ErrorCode::DimMismatch, "entry '" + e.name + "' is truncated");
  e.value = nn::Tensor<float>(dims);
  for (std::size_t i = 0; i < count; ++i) e.value[i] = detail::get_f32(buf, pos);
  return e;
}

// Copies matching entries into a set that already has the expected layout.
void fill(nn::ParamSet<float>& ps, const std::map<std::string, nn::Tensor<float>>& entries, const std::string& prefix,
          const std::string& what) {
  for (auto& e : ps.entries()) {
    const auto it = entries.find(prefix + e.name);
    if (it == entries.end()) throw Error(ErrorCode::DimMismatch, what + ": missing entry '" + prefix + e.name + "'");
    if (it->second.shape() != e.value.shape()) {
      throw Error(ErrorCode::DimMismatch, what + ": '" + prefix + e.name + "' has shape " +
                                              nn::shape_string(it->second.shape()) + ", config implies " +
                                              nn::shape_string(e.value.shape()));
    }
    e.value = it->second;
  }
}

}  // namespace

nlohmann::json checkpoint_header(const Checkpoint& ckpt) {
  return {{"config", to_json(ckpt.config)},
          {"step", ckpt.state.step},
          {"adam_t", {{"gen", ckpt.state.gen_opt.t}, {"aad", ckpt.state.aad_opt.t}}},
          {"metrics", ckpt.metrics}};
}

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path) {
  const TrainState& s = ckpt.state;
  std::string buf(kMagic.begin(), kMagic.end());
  detail::put_u32(buf, kVersion);
  const std::string header = checkpoint_header(ckpt).dump();
  detail::put_u32(buf, static_cast<std::uint32_t>(header.size()));
  buf += header;

  const std::size_t count = s.gen.size() + s.aad.params.size() + 2 * s.gen_opt.m.size() + 2 * s.aad_opt.m.size() +
                            s.cache.size();
  detail::put_u32(buf, static_cast<std::uint32_t>(count));
  put_params(buf, s.gen, "");
  put_params(buf, s.aad.params, "");
  put_params(buf, s.gen_opt.m, kGenMoments[0]);
  put_params(buf, s.gen_opt.v, kGenMoments[1]);
  put_params(buf, s.aad_opt.m, kAadMoments[0]);
  put_params(buf, s.aad_opt.v, kAadMoments[1]);
  for (const auto& [id, m] : s.cache) {
    put_entry(buf, kCachePrefix + id, {1, m.height, m.width}, m.values.data(), m.values.size());
  }
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  detail::write_all(path, buf);
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  const std::string buf = detail::read_all(path);
  if (buf.size() < 4 || !std::equal(kMagic.begin(), kMagic.end(), buf.begin())) {
    throw Error(ErrorCode::BadMagic, "'" + path.string() + "' is not an AADC checkpoint");
  }
  std::size_t pos = 4;
  const std::uint32_t version = detail::get_u32(buf, pos);
  if (version != kVersion) throw Error(ErrorCode::BadMagic, "unsupported AADC version " + std::to_string(version));
  const std::uint32_t header_len = detail::get_u32(buf, pos);
  if (pos + header_len > buf.size()) throw Error(ErrorCode::DimMismatch, "truncated checkpoint header");
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(buf.substr(pos, header_len));
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::DimMismatch, std::string("checkpoint header: ") + e.what());
  }
  pos += header_len;

  Checkpoint ck;
  ck.config = train_config_from_json(header.at("config"));
  ck.metrics = header.value("metrics", nlohmann::json::object());
  TrainState& s = ck.state;
  s = TrainState::initialize(ck.config);
  s.step = header.at("step").get<std::int64_t>();
  s.gen_opt.t = header.at("adam_t").at("gen").get<std::int64_t>();
  s.aad_opt.t = header.at("adam_t").at("aad").get<std::int64_t>();

  const std::uint32_t count = detail::get_u32(buf, pos);
  std::map<std::string, nn::Tensor<float>> entries;
  for (std::uint32_t i = 0; i < count; ++i) {
    Entry e = get_entry(buf, pos);
    if (e.name.starts_with(kCachePrefix)) {
      const auto& v = e.value;
      if (v.ndim() != 3 || v.dim(0) != 1) throw Error(ErrorCode::DimMismatch, "cache entry '" + e.name + "' is not 1×H×W");
      ad::AttentionMap m(v.dim(1), v.dim(2));
      std::copy(v.data(), v.data() + v.size(), m.values.begin());
      s.cache.emplace(e.name.substr(std::string_view(kCachePrefix).size()), std::move(m));
      continue;
    }
    if (!entries.emplace(std::move(e.name), std::move(e.value)).second) {
      throw Error(ErrorCode::DimMismatch, "duplicate checkpoint entry");
    }
  }
  if (pos != buf.size()) throw Error(ErrorCode::DimMismatch, "trailing bytes after checkpoint entries");

  fill(s.gen, entries, "", "generator");
  fill(s.aad.params, entries, "", "discriminator");
  fill(s.gen_opt.m, entries, kGenMoments[0], "optimizer");
  fill(s.gen_opt.v, entries, kGenMoments[1], "optimizer");
  fill(s.aad_opt.m, entries, kAadMoments[0], "optimizer");
  fill(s.aad_opt.v, entries, kAadMoments[1], "optimizer");
  return ck;
}

}  // namespace aad::train
