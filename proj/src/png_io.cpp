// SPDX-License-Identifier: Apache-2.0
#include "kdgan/png_io.hpp"

#include <png.h>

#include <cstdio>
#include <memory>

#include "kdgan/errors.hpp"

namespace kdgan {
namespace {

struct FileCloser {
  void operator()(std::FILE* f) const {
    if (f) std::fclose(f);
  }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

}  // namespace

RawImage read_png(const std::string& path, int channels) {
  if (channels != 1 && channels != 3) throw InvalidArgument("read_png: channels must be 1 or 3");
  png_image img{};
  img.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_file(&img, path.c_str()))
    throw IoError(std::string("cannot read PNG (") + img.message + ")", path);
  img.format = channels == 1 ? PNG_FORMAT_GRAY : PNG_FORMAT_RGB;
  RawImage out;
  out.width = static_cast<int>(img.width);
  out.height = static_cast<int>(img.height);
  out.channels = channels;
  out.pixels.resize(PNG_IMAGE_SIZE(img));
  if (!png_image_finish_read(&img, nullptr, out.pixels.data(), 0, nullptr)) {
    std::string msg = img.message;
    png_image_free(&img);
    throw IoError("cannot decode PNG (" + msg + ")", path);
  }
  return out;
}

void write_png(const std::string& path, const RawImage& image) {
  if (image.channels != 1 && image.channels != 3)
    throw InvalidArgument("write_png: channels must be 1 or 3");
  if (image.pixels.size() !=
      static_cast<std::size_t>(image.width) * image.height * image.channels)
    throw InvalidArgument("write_png: pixel buffer does not match dimensions");
  png_image img{};
  img.version = PNG_IMAGE_VERSION;
  img.width = static_cast<png_uint_32>(image.width);
  img.height = static_cast<png_uint_32>(image.height);
  img.format = image.channels == 1 ? PNG_FORMAT_GRAY : PNG_FORMAT_RGB;
  FilePtr f(std::fopen(path.c_str(), "wb"));
  if (!f) throw IoError("cannot open for writing", path);
  if (!png_image_write_to_stdio(&img, f.get(), 0, image.pixels.data(), 0, nullptr))
    throw IoError(std::string("cannot write PNG (") + img.message + ")", path);
}

}  // namespace kdgan
