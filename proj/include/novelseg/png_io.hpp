#pragma once

// PNG codec for images, masks and label rasters, backed by libpng's
// simplified API. Masks are stored as 0/255 single-channel files and
// thresholded at >127 on load; label rasters are stored as raw 8-bit
// class indices.

#include <png.h>

#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <string>
#include <vector>

#include "novelseg/error.hpp"
#include "novelseg/raster.hpp"

namespace novelseg {

namespace fs = std::filesystem;

inline std::vector<std::uint8_t> read_file_bytes(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::io, "cannot open " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                  std::istreambuf_iterator<char>());
  if (in.bad()) throw Error(ErrorCode::io, "read failed for " + path.string());
  return bytes;
}

inline void write_file_bytes(const fs::path& path, const void* data, std::size_t size) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::io, "cannot write " + path.string());
  out.write(static_cast<const char*>(data), static_cast<std::streamsize>(size));
  if (!out) throw Error(ErrorCode::io, "write failed for " + path.string());
}

namespace detail {

// RAII holder for png_image; png_image_free is safe to call on any state.
struct PngImage {
  png_image image{};
  PngImage() {
    std::memset(&image, 0, sizeof(image));
    image.version = PNG_IMAGE_VERSION;
  }
  ~PngImage() { png_image_free(&image); }
  PngImage(const PngImage&) = delete;
  PngImage& operator=(const PngImage&) = delete;
};

struct DecodedPng {
  int width = 0;
  int height = 0;
  png_uint_32 source_format = 0;
  std::vector<std::uint8_t> pixels;
};

inline DecodedPng decode_png(const fs::path& path, png_uint_32 wanted_format,
                             bool reject_color_input) {
  const auto bytes = read_file_bytes(path);
  PngImage png;
  if (png_image_begin_read_from_memory(&png.image, bytes.data(), bytes.size()) == 0) {
    throw Error(ErrorCode::decode, "PNG decode error in " + path.string() + ": " +
                                       png.image.message);
  }
  DecodedPng out;
  out.source_format = png.image.format;
  if ((png.image.format & PNG_FORMAT_FLAG_LINEAR) != 0) {
    throw Error(ErrorCode::decode,
                "unsupported bit depth (16-bit) in " + path.string() + "; expected 8-bit");
  }
  if (reject_color_input &&
      (png.image.format & (PNG_FORMAT_FLAG_COLOR | PNG_FORMAT_FLAG_ALPHA)) != 0) {
    throw Error(ErrorCode::decode,
                "expected single-channel PNG, got multi-channel input in " + path.string());
  }
  if (png.image.width < 1 || png.image.height < 1) {
    throw Error(ErrorCode::decode, "empty PNG " + path.string());
  }
  out.width = static_cast<int>(png.image.width);
  out.height = static_cast<int>(png.image.height);
  png.image.format = wanted_format;
  out.pixels.resize(PNG_IMAGE_SIZE(png.image));
  if (png_image_finish_read(&png.image, nullptr, out.pixels.data(), 0, nullptr) == 0) {
    throw Error(ErrorCode::decode, "PNG decode error in " + path.string() + ": " +
                                       png.image.message);
  }
  return out;
}

inline void encode_png(const fs::path& path, int width, int height, png_uint_32 format,
                       const std::uint8_t* pixels) {
  PngImage png;
  png.image.width = static_cast<png_uint_32>(width);
  png.image.height = static_cast<png_uint_32>(height);
  png.image.format = format;
  png_alloc_size_t size = 0;
  if (png_image_write_to_memory(&png.image, nullptr, &size, 0, pixels, 0, nullptr) == 0) {
    throw Error(ErrorCode::io, "PNG encode error for " + path.string() + ": " +
                                   png.image.message);
  }
  std::vector<std::uint8_t> buffer(size);
  if (png_image_write_to_memory(&png.image, buffer.data(), &size, 0, pixels, 0, nullptr) == 0) {
    throw Error(ErrorCode::io, "PNG encode error for " + path.string() + ": " +
                                   png.image.message);
  }
  write_file_bytes(path, buffer.data(), size);
}

}  // namespace detail

/// Loads an 8-bit PNG as RGB. Grayscale is replicated across channels and
/// alpha is dropped.
inline RgbImage load_image(const fs::path& path) {
  auto decoded = detail::decode_png(path, PNG_FORMAT_RGB, false);
  RgbImage image(decoded.width, decoded.height);
  for (std::size_t i = 0; i < image.size(); ++i) {
    image[i] = Rgb{decoded.pixels[3 * i], decoded.pixels[3 * i + 1], decoded.pixels[3 * i + 2]};
  }
  return image;
}

inline void save_image(const fs::path& path, const RgbImage& image) {
  static_assert(sizeof(Rgb) == 3);
  std::vector<std::uint8_t> bytes(image.size() * 3);
  for (std::size_t i = 0; i < image.size(); ++i) {
    bytes[3 * i] = image[i].r;
    bytes[3 * i + 1] = image[i].g;
    bytes[3 * i + 2] = image[i].b;
  }
  detail::encode_png(path, image.width(), image.height(), PNG_FORMAT_RGB, bytes.data());
}

inline BinaryMask load_mask(const fs::path& path) {
  auto decoded = detail::decode_png(path, PNG_FORMAT_GRAY, true);
  BinaryMask mask(decoded.width, decoded.height);
  for (std::size_t i = 0; i < mask.size(); ++i) mask[i] = decoded.pixels[i] > 127 ? 1 : 0;
  return mask;
}

inline void save_mask(const fs::path& path, const BinaryMask& mask) {
  std::vector<std::uint8_t> bytes(mask.size());
  for (std::size_t i = 0; i < mask.size(); ++i) bytes[i] = mask[i] ? 255 : 0;
  detail::encode_png(path, mask.width(), mask.height(), PNG_FORMAT_GRAY, bytes.data());
}

inline LabelRaster load_labels(const fs::path& path,
                               std::uint8_t ignore_index = kDefaultIgnoreIndex) {
  auto decoded = detail::decode_png(path, PNG_FORMAT_GRAY, true);
  LabelRaster labels(decoded.width, decoded.height, 0, ignore_index);
  std::copy(decoded.pixels.begin(), decoded.pixels.end(), labels.begin());
  return labels;
}

inline void save_labels(const fs::path& path, const LabelRaster& labels) {
  detail::encode_png(path, labels.width(), labels.height(), PNG_FORMAT_GRAY,
                     labels.data().data());
}

}  // namespace novelseg
