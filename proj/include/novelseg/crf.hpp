#pragma once

// Two-label fully connected CRF with Gaussian pairwise kernels, solved by
// mean-field iteration.
//
//   unary     U_fg(i) = -log p_i,  U_bg(i) = -log(1 - p_i),  p_i = clamp(soft_i)
//   kernels   appearance  w1 * exp(-|p_i-p_j|^2 / 2 theta_a^2 - |I_i-I_j|^2 / 2 theta_b^2)
//             smoothness  w2 * exp(-|p_i-p_j|^2 / 2 theta_g^2)
//   labels    Potts compatibility
//
// Each kernel is evaluated exactly over a square window of half-size
// ceil(3 sigma) (sigma = its spatial std) and symmetrically normalised,
// K_ij -> K_ij / sqrt(d_i d_j) with d_i = sum_j K_ij, so messages are
// weighted averages of neighbour beliefs. The self term is excluded.

#include <algorithm>
#include <cmath>
#include <functional>
#include <optional>
#include <span>
#include <vector>

#include "novelseg/raster.hpp"

namespace novelseg {

struct CrfParams {
  int iterations = 5;
  double appearance_weight = 10.0;   // w1
  double appearance_xy_std = 80.0;   // theta_alpha, px
  double appearance_rgb_std = 13.0;  // theta_beta
  double smoothness_weight = 3.0;    // w2
  double smoothness_xy_std = 3.0;    // theta_gamma, px
  double prob_floor = 0.05;
  double prob_ceiling = 0.95;

  void validate() const {
    if (iterations < 0) throw Error(ErrorCode::config, "crf iterations must be >= 0");
    if (!(appearance_xy_std > 0) || !(appearance_rgb_std > 0) || !(smoothness_xy_std > 0)) {
      throw Error(ErrorCode::config, "crf standard deviations must be > 0");
    }
    if (!(appearance_weight >= 0) || !(smoothness_weight >= 0)) {
      throw Error(ErrorCode::config, "crf weights must be >= 0");
    }
    if (!(prob_floor > 0 && prob_floor <= prob_ceiling && prob_ceiling < 1)) {
      throw Error(ErrorCode::config, "crf probability clamp must satisfy 0 < floor <= ceiling < 1");
    }
  }
};

/// Per-pixel label beliefs; fg[i] + bg[i] == 1 after every update.
struct CrfBeliefs {
  std::vector<double> fg;
  std::vector<double> bg;
};

/// Called after each mean-field update with the 1-based iteration number.
using CrfObserver = std::function<void(int, const CrfBeliefs&)>;

namespace detail {

class GaussianKernel {
 public:
  // rgb_std <= 0 disables the colour term.
  GaussianKernel(const RgbImage& image, double xy_std, double rgb_std)
      : image_(image), radius_(static_cast<int>(std::ceil(3.0 * xy_std))) {
    radius_ = std::min(radius_, std::max(image.width(), image.height()));
    spatial_.resize(static_cast<std::size_t>(radius_ + 1) * (radius_ + 1));
    for (int dy = 0; dy <= radius_; ++dy) {
      for (int dx = 0; dx <= radius_; ++dx) {
        spatial_[static_cast<std::size_t>(dy) * (radius_ + 1) + dx] =
            std::exp(-double(dx * dx + dy * dy) / (2.0 * xy_std * xy_std));
      }
    }
    if (rgb_std > 0) {
      color_.resize(3 * 255 * 255 + 1);
      for (std::size_t d2 = 0; d2 < color_.size(); ++d2) {
        color_[d2] = std::exp(-double(d2) / (2.0 * rgb_std * rgb_std));
      }
    }
    // Degree for symmetric normalisation.
    std::vector<double> ones(image.size(), 1.0);
    std::vector<double> degree(image.size());
    accumulate(ones, degree);
    norm_.resize(image.size());
    for (std::size_t i = 0; i < norm_.size(); ++i) {
      norm_[i] = degree[i] > 0 ? 1.0 / std::sqrt(degree[i]) : 0.0;
    }
  }

  // out_l(i) = norm_i * sum_{j != i} K_ij * norm_j * q_l(j) for both labels.
  void filter(const CrfBeliefs& q, std::vector<double>& out_fg, std::vector<double>& out_bg) const {
    const std::size_t n = image_.size();
    scaled_fg_.resize(n);
    scaled_bg_.resize(n);
    for (std::size_t j = 0; j < n; ++j) {
      scaled_fg_[j] = norm_[j] * q.fg[j];
      scaled_bg_[j] = norm_[j] * q.bg[j];
    }
    accumulate2(scaled_fg_, scaled_bg_, out_fg, out_bg);
    for (std::size_t i = 0; i < n; ++i) {
      out_fg[i] *= norm_[i];
      out_bg[i] *= norm_[i];
    }
  }

 private:
  double weight(int x, int y, int xj, int yj) const {
    const int dx = std::abs(xj - x);
    const int dy = std::abs(yj - y);
    double k = spatial_[static_cast<std::size_t>(dy) * (radius_ + 1) + dx];
    if (!color_.empty()) {
      const auto& a = image_.at(x, y);
      const auto& b = image_.at(xj, yj);
      const int dr = int(a.r) - int(b.r);
      const int dg = int(a.g) - int(b.g);
      const int db = int(a.b) - int(b.b);
      k *= color_[static_cast<std::size_t>(dr * dr + dg * dg + db * db)];
    }
    return k;
  }

  template <typename Body>
  void for_window(Body&& body) const {
    const int w = image_.width();
    const int h = image_.height();
    for (int y = 0; y < h; ++y) {
      const int y0 = std::max(0, y - radius_);
      const int y1 = std::min(h - 1, y + radius_);
      for (int x = 0; x < w; ++x) {
        const int x0 = std::max(0, x - radius_);
        const int x1 = std::min(w - 1, x + radius_);
        body(x, y, x0, x1, y0, y1);
      }
    }
  }

  void accumulate(const std::vector<double>& in, std::vector<double>& out) const {
    const int w = image_.width();
    for_window([&](int x, int y, int x0, int x1, int y0, int y1) {
      double acc = 0.0;
      for (int yj = y0; yj <= y1; ++yj) {
        for (int xj = x0; xj <= x1; ++xj) {
          if (xj == x && yj == y) continue;
          acc += weight(x, y, xj, yj) * in[static_cast<std::size_t>(yj) * w + xj];
        }
      }
      out[static_cast<std::size_t>(y) * w + x] = acc;
    });
  }

  void accumulate2(const std::vector<double>& in_a, const std::vector<double>& in_b,
                   std::vector<double>& out_a, std::vector<double>& out_b) const {
    const int w = image_.width();
    for_window([&](int x, int y, int x0, int x1, int y0, int y1) {
      double acc_a = 0.0;
      double acc_b = 0.0;
      for (int yj = y0; yj <= y1; ++yj) {
        for (int xj = x0; xj <= x1; ++xj) {
          if (xj == x && yj == y) continue;
          const double k = weight(x, y, xj, yj);
          const auto j = static_cast<std::size_t>(yj) * w + xj;
          acc_a += k * in_a[j];
          acc_b += k * in_b[j];
        }
      }
      const auto i = static_cast<std::size_t>(y) * w + x;
      out_a[i] = acc_a;
      out_b[i] = acc_b;
    });
  }

  const RgbImage& image_;
  int radius_;
  std::vector<double> spatial_;
  std::vector<double> color_;
  std::vector<double> norm_;
  mutable std::vector<double> scaled_fg_;
  mutable std::vector<double> scaled_bg_;
};

}  // namespace detail

/// Mean-field inference; returns the final beliefs and writes the
/// minimum-energy labelling (ties go to foreground) into `labels`.
inline CrfBeliefs mean_field(const RgbImage& image, const FloatMap& soft, const CrfParams& params,
                             BinaryMask& labels, const CrfObserver& observer = {}) {
  params.validate();
  if (!image.same_shape(soft)) {
    throw Error(ErrorCode::invalid_argument,
                "crf: image " + std::to_string(image.width()) + "x" + std::to_string(image.height()) +
                    " and soft map " + std::to_string(soft.width()) + "x" +
                    std::to_string(soft.height()) + " differ in size");
  }
  const std::size_t n = soft.size();
  std::vector<double> unary_fg(n);
  std::vector<double> unary_bg(n);
  for (std::size_t i = 0; i < n; ++i) {
    if (!std::isfinite(soft[i])) throw Error(ErrorCode::validation, "crf: non-finite soft value");
    const double p = std::clamp(static_cast<double>(soft[i]), params.prob_floor, params.prob_ceiling);
    unary_fg[i] = -std::log(p);
    unary_bg[i] = -std::log(1.0 - p);
    if (!std::isfinite(unary_fg[i]) || !std::isfinite(unary_bg[i])) {
      throw Error(ErrorCode::validation, "crf: non-finite unary");
    }
  }

  CrfBeliefs q{std::vector<double>(n), std::vector<double>(n)};
  std::vector<double> energy_fg = unary_fg;
  std::vector<double> energy_bg = unary_bg;
  auto normalise = [&] {
    for (std::size_t i = 0; i < n; ++i) {
      const double m = std::min(energy_fg[i], energy_bg[i]);
      const double a = std::exp(-(energy_fg[i] - m));
      const double b = std::exp(-(energy_bg[i] - m));
      q.fg[i] = a / (a + b);
      q.bg[i] = 1.0 - q.fg[i];
    }
  };
  normalise();

  const bool use_appearance = params.appearance_weight > 0;
  const bool use_smoothness = params.smoothness_weight > 0;
  if (params.iterations > 0 && (use_appearance || use_smoothness)) {
    std::optional<detail::GaussianKernel> appearance;
    std::optional<detail::GaussianKernel> smooth;
    if (use_appearance) appearance.emplace(image, params.appearance_xy_std, params.appearance_rgb_std);
    if (use_smoothness) smooth.emplace(image, params.smoothness_xy_std, 0.0);
    std::vector<double> msg_fg(n);
    std::vector<double> msg_bg(n);
    for (int it = 1; it <= params.iterations; ++it) {
      energy_fg = unary_fg;
      energy_bg = unary_bg;
      // Potts: a label pays for the belief mass its neighbours put on the other label.
      auto add = [&](const detail::GaussianKernel& kernel, double weight) {
        kernel.filter(q, msg_fg, msg_bg);
        for (std::size_t i = 0; i < n; ++i) {
          energy_fg[i] += weight * msg_bg[i];
          energy_bg[i] += weight * msg_fg[i];
        }
      };
      if (appearance) add(*appearance, params.appearance_weight);
      if (smooth) add(*smooth, params.smoothness_weight);
      normalise();
      if (observer) observer(it, q);
    }
  } else if (observer) {
    for (int it = 1; it <= params.iterations; ++it) observer(it, q);
  }

  labels = BinaryMask(soft.width(), soft.height());
  for (std::size_t i = 0; i < n; ++i) labels[i] = energy_fg[i] <= energy_bg[i] ? 1 : 0;
  return q;
}

/// Dense binary mask from a soft foreground map.
inline BinaryMask densify_crf(const RgbImage& image, const FloatMap& soft, const CrfParams& params) {
  BinaryMask labels;
  mean_field(image, soft, params, labels);
  return labels;
}

}  // namespace novelseg
