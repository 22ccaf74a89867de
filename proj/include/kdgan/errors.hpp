// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <stdexcept>
#include <string>

namespace kdgan {

/// Bad shapes, out-of-range hyperparameters, malformed configuration.
class InvalidArgument : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Input that is well-formed but numerically unusable (zero rows, zero vectors).
class DegenerateInput : public std::domain_error {
 public:
  DegenerateInput(const std::string& what, long index = -1)
      : std::domain_error(what), index_(index) {}
  long index() const noexcept { return index_; }

 private:
  long index_;
};

/// A computation produced a non-finite value or failed to converge.
class NumericFailure : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class IoError : public std::runtime_error {
 public:
  IoError(const std::string& what, std::string path)
      : std::runtime_error(what + ": " + path), path_(std::move(path)) {}
  const std::string& path() const noexcept { return path_; }

 private:
  std::string path_;
};

}  // namespace kdgan
