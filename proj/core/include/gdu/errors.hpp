// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <stdexcept>
#include <string>

namespace gdu {

// Invalid shapes, inconsistent specs, bad CLI/config input.
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// NaN/Inf encountered in a place where all values must stay finite.
class NumericFault : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// File ingestion / emission failures (bad magic, truncation, unwritable path).
class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace gdu
