#pragma once

#include <vector>

#include "novelseg/raster.hpp"

namespace novelseg {

/// Discrete disk: all offsets with dx^2 + dy^2 <= radius^2.
inline std::vector<Pixel> disk_element(int radius) {
  if (radius < 0) throw Error(ErrorCode::invalid_argument, "structuring element radius must be >= 0");
  std::vector<Pixel> offsets;
  for (int dy = -radius; dy <= radius; ++dy) {
    for (int dx = -radius; dx <= radius; ++dx) {
      if (dx * dx + dy * dy <= radius * radius) offsets.push_back({dx, dy});
    }
  }
  return offsets;
}

/// Pixels outside the raster count as background.
inline BinaryMask erode(const BinaryMask& mask, const std::vector<Pixel>& element) {
  BinaryMask out(mask.width(), mask.height());
  for (int y = 0; y < mask.height(); ++y) {
    for (int x = 0; x < mask.width(); ++x) {
      if (!mask.at(x, y)) continue;
      bool all = true;
      for (const auto& o : element) {
        if (!mask.test(x + o.x, y + o.y)) {
          all = false;
          break;
        }
      }
      if (all) out.set(x, y);
    }
  }
  return out;
}

/// Pixels outside the raster count as background. Element is assumed
/// symmetric (true for disks).
inline BinaryMask dilate(const BinaryMask& mask, const std::vector<Pixel>& element) {
  BinaryMask out(mask.width(), mask.height());
  for (int y = 0; y < mask.height(); ++y) {
    for (int x = 0; x < mask.width(); ++x) {
      if (!mask.at(x, y)) continue;
      for (const auto& o : element) {
        if (out.in_bounds(x + o.x, y + o.y)) out.set(x + o.x, y + o.y);
      }
    }
  }
  return out;
}

inline BinaryMask open(const BinaryMask& mask, const std::vector<Pixel>& element) {
  return dilate(erode(mask, element), element);
}

inline BinaryMask close(const BinaryMask& mask, const std::vector<Pixel>& element) {
  return erode(dilate(mask, element), element);
}

inline constexpr int kDefaultSmoothingRadius = 3;

/// Opening followed by closing with a disk of the given radius, evaluated as
/// if the mask lay on an unbounded background plane (the raster is padded by
/// `radius` so closing cannot grow shapes into the image frame). The result
/// may be empty.
inline BinaryMask smooth_mask(const BinaryMask& mask, int radius = kDefaultSmoothingRadius) {
  if (radius < 1) throw Error(ErrorCode::invalid_argument, "smoothing radius must be >= 1");
  const auto element = disk_element(radius);
  BinaryMask padded(mask.width() + 2 * radius, mask.height() + 2 * radius);
  for (int y = 0; y < mask.height(); ++y) {
    for (int x = 0; x < mask.width(); ++x) padded.at(x + radius, y + radius) = mask.at(x, y);
  }
  const auto smoothed = close(open(padded, element), element);
  BinaryMask out(mask.width(), mask.height());
  for (int y = 0; y < mask.height(); ++y) {
    for (int x = 0; x < mask.width(); ++x) out.at(x, y) = smoothed.at(x + radius, y + radius);
  }
  return out;
}

}  // namespace novelseg
