// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace kdgan {

/// 8-bit interleaved pixels, row-major, `channels` in {1, 3}.
struct RawImage {
  int width = 0;
  int height = 0;
  int channels = 0;
  std::vector<std::uint8_t> pixels;
};

/// Reads any 8/16-bit PNG, converting to gray (channels == 1) or RGB (channels == 3).
RawImage read_png(const std::string& path, int channels);
void write_png(const std::string& path, const RawImage& image);

}  // namespace kdgan
