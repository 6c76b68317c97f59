#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <deque>
#include <numbers>
#include <optional>
#include <vector>

#include "novelseg/raster.hpp"

namespace novelseg {

enum class ContourOrientation { outer, hole };

/// Closed boundary polyline through pixel centers. The closing segment from
/// the last point back to the first is implicit.
struct Contour {
  std::vector<Pixel> points;
  ContourOrientation orientation = ContourOrientation::outer;
};

/// Connected-component labeling result. Labels are 1-based in raster order of
/// each component's first pixel; 0 is background.
struct Components {
  Grid<std::int32_t> labels;
  std::vector<std::size_t> sizes;   // sizes[k] is the pixel count of label k+1
  std::vector<Pixel> first_pixel;   // first pixel of label k+1 in raster order

  std::size_t count() const { return sizes.size(); }

  /// 1-based label of the largest component; ties go to the lowest label,
  /// i.e. the component whose first pixel comes first in raster order.
  /// Returns 0 when there are no components.
  std::int32_t largest() const {
    std::int32_t best = 0;
    std::size_t best_size = 0;
    for (std::size_t k = 0; k < sizes.size(); ++k) {
      if (sizes[k] > best_size) {
        best_size = sizes[k];
        best = static_cast<std::int32_t>(k + 1);
      }
    }
    return best;
  }
};

namespace detail {

// Clockwise on screen (y down), starting west.
inline constexpr std::array<Pixel, 8> kRing = {{
    {-1, 0}, {-1, -1}, {0, -1}, {1, -1}, {1, 0}, {1, 1}, {0, 1}, {-1, 1},
}};

inline int ring_index(int dx, int dy) {
  for (int i = 0; i < 8; ++i) {
    if (kRing[i].x == dx && kRing[i].y == dy) return i;
  }
  return -1;
}

inline constexpr std::array<Pixel, 4> kAxial = {{{1, 0}, {-1, 0}, {0, 1}, {0, -1}}};

// Moore-neighbor tracing. The walk stops when it leaves `start` by the same
// transition (next pixel and backtrack) as its very first move, which is
// Jacob's criterion made robust to the synthetic initial backtrack: on
// one-pixel-wide parts `start` may never be re-entered from that direction.
template <typename IsForeground>
std::vector<Pixel> moore_trace(Pixel start, int start_backtrack, IsForeground&& fg,
                               std::size_t max_steps) {
  auto step = [&](Pixel p, int back, Pixel& next, int& next_back) {
    for (int k = 1; k <= 8; ++k) {
      const int d = (back + k) % 8;
      const Pixel q{p.x + kRing[d].x, p.y + kRing[d].y};
      if (!fg(q)) continue;
      const int prev = (d + 7) % 8;
      next = q;
      next_back = ring_index(p.x + kRing[prev].x - q.x, p.y + kRing[prev].y - q.y);
      return true;
    }
    return false;
  };
  std::vector<Pixel> points{start};
  Pixel first;
  int first_back = 0;
  if (!step(start, start_backtrack, first, first_back)) return points;  // isolated pixel
  Pixel p = first;
  int back = first_back;
  for (std::size_t n = 0; n < max_steps; ++n) {
    points.push_back(p);
    Pixel next;
    int next_back = 0;
    step(p, back, next, next_back);
    if (p == start && next == first && next_back == first_back) {
      points.pop_back();  // start is already points[0]
      return points;
    }
    p = next;
    back = next_back;
  }
  throw Error(ErrorCode::degenerate_geometry, "contour trace did not close within the step cap");
}

}  // namespace detail

/// 8-connected foreground components.
inline Components label_components(const BinaryMask& mask) {
  Components out{Grid<std::int32_t>(mask.width(), mask.height(), 0), {}, {}};
  std::vector<Pixel> stack;
  for (int y = 0; y < mask.height(); ++y) {
    for (int x = 0; x < mask.width(); ++x) {
      if (!mask.at(x, y) || out.labels.at(x, y) != 0) continue;
      const auto label = static_cast<std::int32_t>(out.sizes.size() + 1);
      std::size_t size = 0;
      out.labels.at(x, y) = label;
      stack.push_back({x, y});
      while (!stack.empty()) {
        const auto p = stack.back();
        stack.pop_back();
        ++size;
        for (const auto& d : detail::kRing) {
          const Pixel q{p.x + d.x, p.y + d.y};
          if (mask.test(q) && out.labels.at(q.x, q.y) == 0) {
            out.labels.at(q.x, q.y) = label;
            stack.push_back(q);
          }
        }
      }
      out.sizes.push_back(size);
      out.first_pixel.push_back({x, y});
    }
  }
  return out;
}

/// Mask containing only the given 1-based component.
inline BinaryMask component_mask(const Components& comps, std::int32_t label) {
  BinaryMask mask(comps.labels.width(), comps.labels.height());
  for (std::size_t i = 0; i < mask.size(); ++i) mask[i] = comps.labels[i] == label ? 1 : 0;
  return mask;
}

/// Mask containing only the largest 8-connected component (empty stays empty).
inline BinaryMask largest_component(const BinaryMask& mask) {
  const auto comps = label_components(mask);
  if (comps.count() == 0) return mask;
  return component_mask(comps, comps.largest());
}

inline std::size_t area(const BinaryMask& mask) { return count_foreground(mask); }

/// Outer contour of one 8-connected component, starting at its first pixel in
/// raster order.
inline Contour trace_outer(const BinaryMask& component, Pixel first) {
  auto fg = [&](Pixel q) { return component.test(q); };
  const std::size_t cap = 8 * area(component) + 16;
  return Contour{detail::moore_trace(first, 0, fg, cap), ContourOrientation::outer};
}

/// One outer contour per 8-connected foreground component (in raster order of
/// the component's first pixel), followed by one hole contour per background
/// region that is 4-connected and does not touch the image border.
inline std::vector<Contour> trace_contours(const BinaryMask& mask) {
  std::vector<Contour> contours;
  const auto comps = label_components(mask);
  for (std::size_t k = 0; k < comps.count(); ++k) {
    const auto label = static_cast<std::int32_t>(k + 1);
    auto fg = [&](Pixel q) {
      return comps.labels.in_bounds(q) && comps.labels.at(q.x, q.y) == label;
    };
    const std::size_t cap = 8 * comps.sizes[k] + 16;
    contours.push_back(
        {detail::moore_trace(comps.first_pixel[k], 0, fg, cap), ContourOrientation::outer});
  }

  // Background regions (4-connected); those not touching the border are holes.
  Grid<std::int32_t> bg(mask.width(), mask.height(), 0);
  std::int32_t next_region = 0;
  std::vector<Pixel> stack;
  for (int y = 0; y < mask.height(); ++y) {
    for (int x = 0; x < mask.width(); ++x) {
      if (mask.at(x, y) || bg.at(x, y) != 0) continue;
      const auto region = ++next_region;
      bool touches_border = false;
      bg.at(x, y) = region;
      stack.push_back({x, y});
      while (!stack.empty()) {
        const auto p = stack.back();
        stack.pop_back();
        if (p.x == 0 || p.y == 0 || p.x == mask.width() - 1 || p.y == mask.height() - 1) {
          touches_border = true;
        }
        for (const auto& d : detail::kAxial) {
          const Pixel q{p.x + d.x, p.y + d.y};
          if (bg.in_bounds(q) && !mask.at(q.x, q.y) && bg.at(q.x, q.y) == 0) {
            bg.at(q.x, q.y) = region;
            stack.push_back(q);
          }
        }
      }
      if (touches_border) continue;
      // (x, y) is the hole's first pixel in raster order, so the pixel above
      // it is foreground; enter that pixel with the hole pixel as backtrack.
      const Pixel start{x, y - 1};
      const auto label = comps.labels.at(start.x, start.y);
      auto fg = [&](Pixel q) {
        return comps.labels.in_bounds(q) && comps.labels.at(q.x, q.y) == label;
      };
      const std::size_t cap = 8 * comps.sizes[static_cast<std::size_t>(label - 1)] + 16;
      contours.push_back({detail::moore_trace(start, detail::ring_index(0, 1), fg, cap),
                          ContourOrientation::hole});
    }
  }
  return contours;
}

/// Outer contour of the largest component, or nullopt for an empty mask.
inline std::optional<Contour> largest_outer_contour(const BinaryMask& mask) {
  const auto comps = label_components(mask);
  if (comps.count() == 0) return std::nullopt;
  const auto label = comps.largest();
  return trace_outer(component_mask(comps, label),
                     comps.first_pixel[static_cast<std::size_t>(label - 1)]);
}

/// Freeman chain-code length of the closed contour: 1 per axial step and
/// sqrt(2) per diagonal step. Non-adjacent consecutive points (as produced by
/// simplify) contribute their Euclidean distance.
inline double perimeter(const Contour& contour) {
  const auto& pts = contour.points;
  if (pts.size() < 2) return 0.0;
  double total = 0.0;
  for (std::size_t i = 0; i < pts.size(); ++i) {
    const auto& a = pts[i];
    const auto& b = pts[(i + 1) % pts.size()];
    const int dx = std::abs(b.x - a.x);
    const int dy = std::abs(b.y - a.y);
    if (dx <= 1 && dy <= 1) {
      total += (dx + dy == 2) ? std::numbers::sqrt2 : static_cast<double>(dx + dy);
    } else {
      total += std::hypot(static_cast<double>(dx), static_cast<double>(dy));
    }
  }
  return total;
}

namespace detail {

inline double point_segment_distance(Pixel p, Pixel a, Pixel b) {
  const double vx = b.x - a.x;
  const double vy = b.y - a.y;
  const double wx = p.x - a.x;
  const double wy = p.y - a.y;
  const double len2 = vx * vx + vy * vy;
  if (len2 == 0.0) return std::hypot(wx, wy);
  const double t = std::clamp((wx * vx + wy * vy) / len2, 0.0, 1.0);
  return std::hypot(wx - t * vx, wy - t * vy);
}

// Open-polyline Douglas-Peucker over pts[first..last] (inclusive); marks kept
// interior points.
inline void douglas_peucker(const std::vector<Pixel>& pts, std::size_t first, std::size_t last,
                            double epsilon, std::vector<bool>& keep) {
  std::deque<std::pair<std::size_t, std::size_t>> work{{first, last}};
  while (!work.empty()) {
    const auto [lo, hi] = work.front();
    work.pop_front();
    if (hi <= lo + 1) continue;
    double best = -1.0;
    std::size_t best_i = lo;
    for (std::size_t i = lo + 1; i < hi; ++i) {
      const double d = point_segment_distance(pts[i], pts[lo], pts[hi % pts.size()]);
      if (d > best) {
        best = d;
        best_i = i;
      }
    }
    if (best > epsilon) {
      keep[best_i] = true;
      work.emplace_back(lo, best_i);
      work.emplace_back(best_i, hi);
    }
  }
}

}  // namespace detail

/// Douglas-Peucker simplification of the closed polyline. The contour is split
/// at its first point and the point farthest from it, each half is simplified
/// independently, and finally the split point itself is dropped if it lies
/// within epsilon of the segment joining its neighbours. With epsilon = 0 only
/// points lying exactly on a segment are removed.
inline Contour simplify(const Contour& contour, double epsilon) {
  if (epsilon < 0.0) throw Error(ErrorCode::invalid_argument, "simplify epsilon must be >= 0");
  const auto& pts = contour.points;
  const std::size_t n = pts.size();
  if (n < 3) return contour;

  std::size_t far = 0;
  double far_d = -1.0;
  for (std::size_t i = 1; i < n; ++i) {
    const double d = std::hypot(double(pts[i].x - pts[0].x), double(pts[i].y - pts[0].y));
    if (d > far_d) {
      far_d = d;
      far = i;
    }
  }
  std::vector<bool> keep(n, false);
  keep[0] = true;
  keep[far] = true;
  detail::douglas_peucker(pts, 0, far, epsilon, keep);
  detail::douglas_peucker(pts, far, n, epsilon, keep);  // index n wraps to 0

  Contour out{{}, contour.orientation};
  for (std::size_t i = 0; i < n; ++i) {
    if (keep[i]) out.points.push_back(pts[i]);
  }
  if (out.points.size() > 3) {
    const auto& prev = out.points.back();
    const auto& next = out.points[1];
    if (detail::point_segment_distance(out.points[0], prev, next) <= epsilon) {
      out.points.erase(out.points.begin());
    }
  }
  return out;
}

/// Fills a closed 8-connected contour: the contour pixels plus everything
/// they enclose (background is flood-filled 4-connected from the border).
inline BinaryMask fill_contour(const Contour& contour, int width, int height) {
  BinaryMask wall(width, height);
  for (const auto& p : contour.points) {
    if (wall.in_bounds(p)) wall.set(p);
  }
  BinaryMask outside(width, height);
  std::vector<Pixel> stack;
  auto seed = [&](int x, int y) {
    if (!wall.at(x, y) && !outside.at(x, y)) {
      outside.set(x, y);
      stack.push_back({x, y});
    }
  };
  for (int x = 0; x < width; ++x) {
    seed(x, 0);
    seed(x, height - 1);
  }
  for (int y = 0; y < height; ++y) {
    seed(0, y);
    seed(width - 1, y);
  }
  while (!stack.empty()) {
    const auto p = stack.back();
    stack.pop_back();
    for (const auto& d : detail::kAxial) {
      const Pixel q{p.x + d.x, p.y + d.y};
      if (outside.in_bounds(q) && !wall.at(q.x, q.y) && !outside.at(q.x, q.y)) {
        outside.set(q);
        stack.push_back(q);
      }
    }
  }
  BinaryMask filled(width, height);
  for (std::size_t i = 0; i < filled.size(); ++i) filled[i] = outside[i] ? 0 : 1;
  return filled;
}

/// Tight inclusive bounds of all foreground pixels, nullopt for an empty mask.
inline std::optional<BoundingBox> foreground_bounds(const BinaryMask& mask) {
  std::optional<BoundingBox> box;
  for (int y = 0; y < mask.height(); ++y) {
    for (int x = 0; x < mask.width(); ++x) {
      if (!mask.at(x, y)) continue;
      if (!box) {
        box = BoundingBox{x, y, x, y};
      } else {
        box->x_min = std::min(box->x_min, x);
        box->x_max = std::max(box->x_max, x);
        box->y_min = std::min(box->y_min, y);
        box->y_max = std::max(box->y_max, y);
      }
    }
  }
  return box;
}

}  // namespace novelseg
