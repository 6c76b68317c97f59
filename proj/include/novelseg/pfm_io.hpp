#pragma once

// Grayscale Portable FloatMap ("Pf") reader/writer.
//
// Header: "Pf\n<width> <height>\n<scale>\n" followed by width*height 32-bit
// floats, rows stored bottom-to-top. A negative scale means little-endian
// samples. Files are always written little-endian with scale -1.0.

#include <bit>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <string>
#include <vector>

#include "novelseg/error.hpp"
#include "novelseg/png_io.hpp"
#include "novelseg/raster.hpp"

namespace novelseg {

namespace detail {

class PfmHeaderReader {
 public:
  PfmHeaderReader(const std::vector<std::uint8_t>& bytes, const fs::path& path)
      : bytes_(bytes), path_(path) {}

  std::string token() {
    while (pos_ < bytes_.size() && std::isspace(bytes_[pos_])) ++pos_;
    std::string out;
    while (pos_ < bytes_.size() && !std::isspace(bytes_[pos_])) out.push_back(static_cast<char>(bytes_[pos_++]));
    if (out.empty()) fail("truncated header");
    return out;
  }

  // Exactly one whitespace byte separates the scale field from the raster.
  std::size_t data_offset() {
    if (pos_ >= bytes_.size() || !std::isspace(bytes_[pos_])) fail("missing separator after scale");
    return pos_ + 1;
  }

  [[noreturn]] void fail(const std::string& why) const {
    throw Error(ErrorCode::decode, "malformed PFM header in " + path_.string() + ": " + why);
  }

 private:
  const std::vector<std::uint8_t>& bytes_;
  const fs::path& path_;
  std::size_t pos_ = 0;
};

inline int parse_dimension(PfmHeaderReader& reader) {
  const auto text = reader.token();
  std::size_t used = 0;
  long value = 0;
  try {
    value = std::stol(text, &used);
  } catch (const std::exception&) {
    reader.fail("bad dimension '" + text + "'");
  }
  if (used != text.size() || value < 1 || value > (1 << 20)) reader.fail("bad dimension '" + text + "'");
  return static_cast<int>(value);
}

}  // namespace detail

inline FloatMap load_float_map(const fs::path& path) {
  const auto bytes = read_file_bytes(path);
  detail::PfmHeaderReader reader(bytes, path);
  const auto magic = reader.token();
  if (magic == "PF") reader.fail("expected grayscale (Pf), found color variant (PF)");
  if (magic != "Pf") reader.fail("bad magic '" + magic + "'");
  const int width = detail::parse_dimension(reader);
  const int height = detail::parse_dimension(reader);
  const auto scale_text = reader.token();
  double scale = 0.0;
  try {
    scale = std::stod(scale_text);
  } catch (const std::exception&) {
    reader.fail("bad scale '" + scale_text + "'");
  }
  if (scale == 0.0 || !std::isfinite(scale)) reader.fail("bad scale '" + scale_text + "'");
  const bool little = scale < 0.0;
  const std::size_t offset = reader.data_offset();
  const std::size_t count = static_cast<std::size_t>(width) * static_cast<std::size_t>(height);
  if (bytes.size() - offset < count * 4) {
    throw Error(ErrorCode::decode, "truncated PFM raster in " + path.string());
  }

  FloatMap map(width, height);
  const bool swap = little != (std::endian::native == std::endian::little);
  for (int row = 0; row < height; ++row) {
    // First stored row is the bottom image row.
    const int y = height - 1 - row;
    for (int x = 0; x < width; ++x) {
      const std::size_t at = offset + (static_cast<std::size_t>(row) * width + x) * 4;
      std::uint32_t raw = 0;
      std::memcpy(&raw, bytes.data() + at, 4);
      if (swap) raw = __builtin_bswap32(raw);
      const float v = std::bit_cast<float>(raw);
      if (!std::isfinite(v)) {
        throw Error(ErrorCode::decode, "non-finite value in " + path.string() + " at (" +
                                           std::to_string(x) + "," + std::to_string(y) + ")");
      }
      map.at(x, y) = v;
    }
  }
  return map;
}

inline void save_float_map(const fs::path& path, const FloatMap& map) {
  require_finite(map, "save_float_map " + path.string());
  const std::string header =
      "Pf\n" + std::to_string(map.width()) + " " + std::to_string(map.height()) + "\n-1.0\n";
  std::vector<std::uint8_t> bytes(header.begin(), header.end());
  bytes.reserve(bytes.size() + map.size() * 4);
  for (int y = map.height() - 1; y >= 0; --y) {
    for (int x = 0; x < map.width(); ++x) {
      auto raw = std::bit_cast<std::uint32_t>(map.at(x, y));
      if constexpr (std::endian::native == std::endian::big) raw = __builtin_bswap32(raw);
      for (int b = 0; b < 4; ++b) bytes.push_back(static_cast<std::uint8_t>(raw >> (8 * b)));
    }
  }
  write_file_bytes(path, bytes.data(), bytes.size());
}

}  // namespace novelseg
