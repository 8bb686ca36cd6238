// Copyright 2026 The AAD-DCE Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace aad {

enum class ErrorCode {
  BadMagic,
  DimMismatch,
  IoFailure,
  NonFiniteInput,
  RoiOutOfBounds,
  EmptyDataset,
  InvalidGeometry,
  InvalidConfig,
  ShapeMismatch,
  NonFiniteLoss,
  ConfigGeometryMismatch,
  ImageTooSmall,
  SchemaError,
  UnknownSample,
};

std::string_view to_string(ErrorCode code);

/// Exception carrying one of the library's error kinds. The message is
/// prefixed with the kind name, e.g. "RoiOutOfBounds: roi (150,150,60,60) ...".
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message);

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace aad
