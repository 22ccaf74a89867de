// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "kdgan/tensor.hpp"

namespace kdgan {

inline constexpr std::uint32_t kCheckpointVersion = 1;

/// Named f64 arrays plus a JSON metadata document. Layout: docs/checkpoint_format.md.
struct CheckpointRecord {
  std::uint32_t format_version = kCheckpointVersion;
  std::int64_t step = 0;
  std::string config_json;  // canonical TrainConfig dump
  std::uint64_t config_hash = 0;
  std::map<std::string, std::string> rng_states;
  std::map<std::string, std::int64_t> counters;  // e.g. Adam step counts
  std::vector<std::pair<std::string, Matrix>> arrays;

  const Matrix& array(const std::string& name) const;
};

void write_checkpoint(const std::string& path, const CheckpointRecord& record);
CheckpointRecord read_checkpoint(const std::string& path);

}  // namespace kdgan
