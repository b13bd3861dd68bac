// SPDX-FileCopyrightText: 2026 resfit contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <stdexcept>
#include <string>

namespace resfit {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

/// Shape or dimension mismatch between values that must agree.
class DimensionError : public Error {
 public:
  using Error::Error;
};

/// Invalid, non-finite or otherwise rejected input value.
class ValidationError : public Error {
 public:
  using Error::Error;
};

/// Training produced a non-finite loss or gradient.
class DivergedError : public Error {
 public:
  DivergedError(const std::string& msg, int layer_index = -1)
      : Error(msg), layer_index(layer_index) {}
  int layer_index;
};

/// Checkpoint stream carries an unknown magic/version.
class VersionMismatchError : public Error {
 public:
  using Error::Error;
};

/// Checkpoint stream ended before all declared arrays were read.
class TruncatedStreamError : public Error {
 public:
  TruncatedStreamError(const std::string& msg, int layer_index = -1)
      : Error(msg), layer_index(layer_index) {}
  int layer_index;
};

/// Scripted expert cannot produce demonstrations at the requested noise level.
class CalibrationError : public Error {
 public:
  using Error::Error;
};

/// A sealed artifact failed its content-hash check.
class IntegrityError : public Error {
 public:
  using Error::Error;
};

/// Bad configuration file, unknown key or malformed value.
class ConfigError : public Error {
 public:
  using Error::Error;
};

}  // namespace resfit
