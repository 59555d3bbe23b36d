#pragma once

// 8-bit PNG reading and writing through libpng's simplified API.

#include <png.h>

#include <cstring>
#include <filesystem>
#include <string>
#include <vector>

#include "calfweight/error.hpp"
#include "calfweight/imgcore.hpp"

namespace calfweight {

/// Reads any PNG as 8-bit RGB (channels = 3) or 8-bit gray (channels = 1).
inline Raster8 read_png(const std::filesystem::path& path, int channels = 3) {
  if (channels != 1 && channels != 3) fail(ErrorKind::ChannelMismatch, "PNG read needs 1 or 3 channels");
  png_image image;
  std::memset(&image, 0, sizeof(image));
  image.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_file(&image, path.string().c_str())) {
    fail(ErrorKind::IoError, std::string("cannot read PNG: ") + image.message, path.string());
  }
  image.format = channels == 3 ? PNG_FORMAT_RGB : PNG_FORMAT_GRAY;
  std::vector<std::uint8_t> data(PNG_IMAGE_SIZE(image));
  if (!png_image_finish_read(&image, nullptr, data.data(), 0, nullptr)) {
    const std::string msg = image.message;
    png_image_free(&image);
    fail(ErrorKind::IoError, "cannot decode PNG: " + msg, path.string());
  }
  return Raster8(static_cast<int>(image.width), static_cast<int>(image.height), channels, std::move(data));
}

inline void write_png(const std::filesystem::path& path, const Raster8& img) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  png_image image;
  std::memset(&image, 0, sizeof(image));
  image.version = PNG_IMAGE_VERSION;
  image.width = static_cast<png_uint_32>(img.width());
  image.height = static_cast<png_uint_32>(img.height());
  image.format = img.channels() == 3 ? PNG_FORMAT_RGB : PNG_FORMAT_GRAY;
  if (!png_image_write_to_file(&image, path.string().c_str(), 0, img.data().data(), 0, nullptr)) {
    fail(ErrorKind::IoError, std::string("cannot write PNG: ") + image.message, path.string());
  }
}

/// Masks are stored as gray PNGs, 255 for set pixels.
inline void write_mask_png(const std::filesystem::path& path, const BinaryMask& m) {
  Raster8 img(m.width(), m.height(), 1);
  auto dst = img.data();
  auto src = m.bits();
  for (std::size_t i = 0; i < src.size(); ++i) dst[i] = src[i] ? 255 : 0;
  write_png(path, img);
}

/// Any nonzero gray sample reads as set.
inline BinaryMask read_mask_png(const std::filesystem::path& path) {
  const Raster8 img = read_png(path, 1);
  BinaryMask m(img.width(), img.height());
  auto src = img.data();
  auto dst = m.bits();
  for (std::size_t i = 0; i < src.size(); ++i) dst[i] = src[i] ? 1 : 0;
  return m;
}

}  // namespace calfweight
