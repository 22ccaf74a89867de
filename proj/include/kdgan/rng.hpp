// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <random>
#include <string>

#include "kdgan/tensor.hpp"

namespace kdgan {

/// Derives an independent seed for a labeled stream from a master seed.
std::uint64_t derive_seed(std::uint64_t master_seed, const std::string& label);

/// A named, seeded random stream with a serializable state.
///
/// Uniform and normal draws are computed from raw engine output so that the
/// sequence is identical across standard library implementations.
class RngStream {
 public:
  RngStream() : RngStream(0, "default") {}
  RngStream(std::uint64_t master_seed, std::string name);

  const std::string& name() const { return name_; }

  /// Uniform in [0, 1) with 53 bits of resolution.
  double uniform();
  /// Standard normal via Box-Muller; no cached second value.
  double normal();
  /// Uniform integer in [lo, hi].
  int uniform_int(int lo, int hi);

  Matrix normal_matrix(Index rows, Index cols);

  std::uint64_t next_u64() { return engine_(); }

  std::string save_state() const;
  void load_state(const std::string& state);

  bool operator==(const RngStream& other) const { return engine_ == other.engine_; }

 private:
  std::string name_;
  std::mt19937_64 engine_;
};

}  // namespace kdgan
