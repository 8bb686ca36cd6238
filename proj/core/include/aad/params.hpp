// Copyright 2026 The AAD-DCE Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <map>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "aad/error.hpp"
#include "aad/tensor.hpp"

namespace aad::nn {

/// Ordered collection of uniquely named parameter arrays. Insertion order is
/// the serialization order.
template <typename T>
class ParamSet {
 public:
  struct Entry {
    std::string name;
    Tensor<T> value;
  };

  void add(std::string name, Tensor<T> value) {
    if (index_.contains(name)) {
      throw Error(ErrorCode::InvalidConfig, "duplicate parameter name '" + name + "'");
    }
    index_.emplace(name, entries_.size());
    entries_.push_back({std::move(name), std::move(value)});
  }

  bool contains(std::string_view name) const { return index_.find(name) != index_.end(); }

  const Tensor<T>& get(std::string_view name) const { return entries_[lookup(name)].value; }
  Tensor<T>& get(std::string_view name) { return entries_[lookup(name)].value; }

  std::vector<Entry>& entries() noexcept { return entries_; }
  const std::vector<Entry>& entries() const noexcept { return entries_; }
  std::size_t size() const noexcept { return entries_.size(); }
  bool empty() const noexcept { return entries_.empty(); }

  /// Appends every entry of `other`; names must stay unique.
  void merge(const ParamSet& other) {
    for (const auto& e : other.entries_) add(e.name, e.value);
  }

  /// Entries whose name starts with `prefix`, in order.
  ParamSet subset(std::string_view prefix) const {
    ParamSet out;
    for (const auto& e : entries_) {
      if (std::string_view(e.name).starts_with(prefix)) out.add(e.name, e.value);
    }
    return out;
  }

  ParamSet zeros_like() const {
    ParamSet out;
    for (const auto& e : entries_) out.add(e.name, Tensor<T>(e.value.shape()));
    return out;
  }

  template <typename U>
  ParamSet<U> cast() const {
    ParamSet<U> out;
    for (const auto& e : entries_) out.add(e.name, e.value.template cast<U>());
    return out;
  }

  bool operator==(const ParamSet& other) const {
    if (entries_.size() != other.entries_.size()) return false;
    for (std::size_t i = 0; i < entries_.size(); ++i) {
      if (entries_[i].name != other.entries_[i].name || !(entries_[i].value == other.entries_[i].value)) {
        return false;
      }
    }
    return true;
  }

 private:
  std::size_t lookup(std::string_view name) const {
    auto it = index_.find(name);
    if (it == index_.end()) {
      throw Error(ErrorCode::InvalidConfig, "unknown parameter '" + std::string(name) + "'");
    }
    return it->second;
  }

  std::vector<Entry> entries_;
  std::map<std::string, std::size_t, std::less<>> index_;
};

/// Total number of scalar parameters.
template <typename T>
std::size_t param_count(const ParamSet<T>& params) {
  std::size_t n = 0;
  for (const auto& e : params.entries()) n += e.value.size();
  return n;
}

}  // namespace aad::nn
