#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "novelseg/error.hpp"

namespace novelseg {

/// Integer pixel coordinate, origin top-left, y grows downwards.
struct Pixel {
  int x = 0;
  int y = 0;

  friend bool operator==(const Pixel&, const Pixel&) = default;
  friend auto operator<=>(const Pixel&, const Pixel&) = default;
};

/// Inclusive pixel bounds.
struct BoundingBox {
  int x_min = 0;
  int y_min = 0;
  int x_max = 0;
  int y_max = 0;

  int width() const { return x_max - x_min + 1; }
  int height() const { return y_max - y_min + 1; }
  bool contains(Pixel p) const {
    return p.x >= x_min && p.x <= x_max && p.y >= y_min && p.y <= y_max;
  }

  friend bool operator==(const BoundingBox&, const BoundingBox&) = default;
};

struct Rgb {
  std::uint8_t r = 0;
  std::uint8_t g = 0;
  std::uint8_t b = 0;

  friend bool operator==(const Rgb&, const Rgb&) = default;
};

/// Dense row-major 2D array. Every raster type in the library is built on it.
template <typename T>
class Grid {
 public:
  using value_type = T;

  Grid() = default;
  Grid(int width, int height, T fill = T{}) : width_(width), height_(height) {
    if (width < 1 || height < 1) {
      throw Error(ErrorCode::invalid_argument,
                  "raster dimensions must be positive, got " + std::to_string(width) + "x" +
                      std::to_string(height));
    }
    data_.assign(static_cast<std::size_t>(width) * static_cast<std::size_t>(height), fill);
  }
  Grid(int width, int height, std::vector<T> data) : Grid(width, height) {
    if (data.size() != data_.size()) {
      throw Error(ErrorCode::invalid_argument, "raster data size does not match dimensions");
    }
    data_ = std::move(data);
  }

  int width() const { return width_; }
  int height() const { return height_; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  bool in_bounds(int x, int y) const { return x >= 0 && y >= 0 && x < width_ && y < height_; }
  bool in_bounds(Pixel p) const { return in_bounds(p.x, p.y); }
  bool same_shape(const auto& other) const {
    return width_ == other.width() && height_ == other.height();
  }

  std::size_t index(int x, int y) const {
    return static_cast<std::size_t>(y) * static_cast<std::size_t>(width_) +
           static_cast<std::size_t>(x);
  }

  T& at(int x, int y) { return data_[index(x, y)]; }
  const T& at(int x, int y) const { return data_[index(x, y)]; }
  T& operator[](std::size_t i) { return data_[i]; }
  const T& operator[](std::size_t i) const { return data_[i]; }

  std::span<T> values() { return data_; }
  std::span<const T> values() const { return data_; }
  const std::vector<T>& data() const { return data_; }

  auto begin() { return data_.begin(); }
  auto end() { return data_.end(); }
  auto begin() const { return data_.begin(); }
  auto end() const { return data_.end(); }

  friend bool operator==(const Grid&, const Grid&) = default;

 private:
  int width_ = 0;
  int height_ = 0;
  std::vector<T> data_;
};

using RgbImage = Grid<Rgb>;
using FloatMap = Grid<float>;

/// Binary object mask; cells are 0 or 1.
class BinaryMask : public Grid<std::uint8_t> {
 public:
  BinaryMask() = default;
  BinaryMask(int width, int height) : Grid(width, height, 0) {}

  bool test(int x, int y) const { return in_bounds(x, y) && at(x, y) != 0; }
  bool test(Pixel p) const { return test(p.x, p.y); }
  void set(int x, int y, bool on = true) { at(x, y) = on ? 1 : 0; }
  void set(Pixel p, bool on = true) { set(p.x, p.y, on); }
};

inline constexpr std::uint8_t kDefaultIgnoreIndex = 255;

/// Per-pixel class indices with a distinguished ignore value.
class LabelRaster : public Grid<std::uint8_t> {
 public:
  LabelRaster() = default;
  LabelRaster(int width, int height, std::uint8_t fill = 0,
              std::uint8_t ignore_index = kDefaultIgnoreIndex)
      : Grid(width, height, fill), ignore_index_(ignore_index) {}

  std::uint8_t ignore_index() const { return ignore_index_; }
  void set_ignore_index(std::uint8_t v) { ignore_index_ = v; }

  /// Throws validation error if any non-ignore label is >= num_classes.
  void validate(int num_classes) const {
    for (std::size_t i = 0; i < size(); ++i) {
      const auto v = (*this)[i];
      if (v != ignore_index_ && static_cast<int>(v) >= num_classes) {
        throw Error(ErrorCode::validation,
                    "label " + std::to_string(v) + " at pixel " + std::to_string(i) +
                        " is out of range for " + std::to_string(num_classes) + " classes");
      }
    }
  }

  friend bool operator==(const LabelRaster&, const LabelRaster&) = default;

 private:
  std::uint8_t ignore_index_ = kDefaultIgnoreIndex;
};

inline std::size_t count_foreground(const BinaryMask& mask) {
  return static_cast<std::size_t>(std::count_if(mask.begin(), mask.end(),
                                                [](std::uint8_t v) { return v != 0; }));
}

inline void require_finite(const FloatMap& map, const std::string& context) {
  for (std::size_t i = 0; i < map.size(); ++i) {
    if (!std::isfinite(map[i])) {
      throw Error(ErrorCode::validation,
                  context + ": non-finite value at index " + std::to_string(i));
    }
  }
}

}  // namespace novelseg
