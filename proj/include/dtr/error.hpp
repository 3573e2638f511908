// Copyright 2026 The dtr Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <stdexcept>
#include <string>

namespace dtr {

// Base of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Invalid configuration or arguments.
class ConfigError : public Error {
 public:
  using Error::Error;
};

// Malformed or invariant-violating input data (datasets, checkpoints, stores).
class DataError : public Error {
 public:
  using Error::Error;
};

// Tensor shapes that do not agree.
class ShapeError : public Error {
 public:
  using Error::Error;
};

}  // namespace dtr
