#pragma once

#include <json.hpp>

#include <algorithm>
#include <array>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "novelseg/contour.hpp"
#include "novelseg/crf.hpp"
#include "novelseg/pfm_io.hpp"
#include "novelseg/png_io.hpp"

namespace novelseg {

/// One cross-attention matrix for a single (layer, timestep, head, token).
struct AttentionSlice {
  int layer = 0;
  int timestep = 0;
  int head = 0;
  int token = 0;
  FloatMap values;  // native resolution
};

struct AttentionStack {
  std::vector<AttentionSlice> slices;
  std::vector<std::string> tokens;
  int target_width = 0;
  int target_height = 0;

  void validate() const {
    if (target_width < 1 || target_height < 1) {
      throw Error(ErrorCode::validation, "attention stack target size must be positive");
    }
    if (slices.empty()) throw Error(ErrorCode::validation, "attention stack has no slices");
    for (const auto& s : slices) {
      if (s.token < 0 || static_cast<std::size_t>(s.token) >= tokens.size()) {
        throw Error(ErrorCode::validation, "slice token index " + std::to_string(s.token) +
                                               " out of range for " +
                                               std::to_string(tokens.size()) + " tokens");
      }
      for (float v : s.values) {
        if (!std::isfinite(v) || v < 0.0f) {
          throw Error(ErrorCode::validation, "attention values must be finite and >= 0");
        }
      }
    }
  }

  /// Index of a token given by its text, or by a decimal index when no token
  /// text matches. Throws missing_token.
  int token_index(const std::string& token) const {
    for (std::size_t i = 0; i < tokens.size(); ++i) {
      if (tokens[i] == token) return static_cast<int>(i);
    }
    if (!token.empty() && std::all_of(token.begin(), token.end(), ::isdigit)) {
      const int k = std::stoi(token);
      if (static_cast<std::size_t>(k) < tokens.size()) return k;
    }
    throw Error(ErrorCode::missing_token, "token '" + token + "' not in attention stack index");
  }
};

inline constexpr const char* kStackIndexName = "stack.json";

/// Reads `stack.json` and the PFM slices it lists from a stack directory.
inline AttentionStack load_attention_stack(const fs::path& dir) {
  const auto index_path = dir / kStackIndexName;
  std::ifstream in(index_path);
  if (!in) throw Error(ErrorCode::io, "cannot open attention index " + index_path.string());
  AttentionStack stack;
  try {
    const auto doc = nlohmann::json::parse(in);
    stack.target_width = doc.at("target_width").get<int>();
    stack.target_height = doc.at("target_height").get<int>();
    stack.tokens = doc.at("tokens").get<std::vector<std::string>>();
    for (const auto& s : doc.at("slices")) {
      AttentionSlice slice;
      slice.layer = s.at("layer").get<int>();
      slice.timestep = s.at("timestep").get<int>();
      slice.head = s.at("head").get<int>();
      slice.token = s.at("token").get<int>();
      slice.values = load_float_map(dir / s.at("file").get<std::string>());
      stack.slices.push_back(std::move(slice));
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::decode, "bad attention index " + index_path.string() + ": " + e.what());
  }
  stack.validate();
  return stack;
}

/// Writes the stack as `stack.json` plus one PFM per slice.
inline void save_attention_stack(const fs::path& dir, const AttentionStack& stack) {
  fs::create_directories(dir);
  nlohmann::json doc;
  doc["target_width"] = stack.target_width;
  doc["target_height"] = stack.target_height;
  doc["tokens"] = stack.tokens;
  doc["slices"] = nlohmann::json::array();
  for (std::size_t i = 0; i < stack.slices.size(); ++i) {
    const auto& s = stack.slices[i];
    const std::string file = "slice_" + std::to_string(i) + ".pfm";
    save_float_map(dir / file, s.values);
    doc["slices"].push_back({{"layer", s.layer},
                             {"timestep", s.timestep},
                             {"head", s.head},
                             {"token", s.token},
                             {"file", file}});
  }
  const auto text = doc.dump(2) + "\n";
  write_file_bytes(dir / kStackIndexName, text.data(), text.size());
}

/// Bilinear resampling with half-pixel centres and edge clamping.
inline FloatMap resize_bilinear(const FloatMap& src, int width, int height) {
  if (src.width() == width && src.height() == height) return src;
  FloatMap dst(width, height);
  const double sx = double(src.width()) / width;
  const double sy = double(src.height()) / height;
  for (int y = 0; y < height; ++y) {
    const double fy = std::clamp((y + 0.5) * sy - 0.5, 0.0, double(src.height() - 1));
    const int y0 = static_cast<int>(fy);
    const int y1 = std::min(y0 + 1, src.height() - 1);
    const float wy = static_cast<float>(fy - y0);
    for (int x = 0; x < width; ++x) {
      const double fx = std::clamp((x + 0.5) * sx - 0.5, 0.0, double(src.width() - 1));
      const int x0 = static_cast<int>(fx);
      const int x1 = std::min(x0 + 1, src.width() - 1);
      const float wx = static_cast<float>(fx - x0);
      const float top = (1.0f - wx) * src.at(x0, y0) + wx * src.at(x1, y0);
      const float bottom = (1.0f - wx) * src.at(x0, y1) + wx * src.at(x1, y1);
      dst.at(x, y) = (1.0f - wy) * top + wy * bottom;
    }
  }
  return dst;
}

/// Min-max normalisation to [0,1]; a constant map becomes all zeros.
inline FloatMap normalize_min_max(const FloatMap& map) {
  const auto [lo_it, hi_it] = std::minmax_element(map.begin(), map.end());
  const float lo = *lo_it;
  const float hi = *hi_it;
  FloatMap out(map.width(), map.height(), 0.0f);
  if (!(hi > lo)) return out;
  const float range = hi - lo;
  for (std::size_t i = 0; i < map.size(); ++i) out[i] = (map[i] - lo) / range;
  return out;
}

/// Sums every slice of token `token` after resizing to the target resolution,
/// then min-max normalises. Slices are summed in a canonical order (by
/// layer, timestep, head, then values) so the result does not depend on the
/// order slices are listed in.
inline FloatMap aggregate(const AttentionStack& stack, int token) {
  std::vector<FloatMap> resized;
  std::vector<std::array<int, 3>> keys;
  for (const auto& s : stack.slices) {
    if (s.token != token) continue;
    resized.push_back(resize_bilinear(s.values, stack.target_width, stack.target_height));
    keys.push_back({s.layer, s.timestep, s.head});
  }
  if (resized.empty()) {
    throw Error(ErrorCode::missing_token, "no attention slice for token " + std::to_string(token));
  }
  std::vector<std::size_t> order(resized.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (keys[a] != keys[b]) return keys[a] < keys[b];
    return std::lexicographical_compare(resized[a].begin(), resized[a].end(),
                                        resized[b].begin(), resized[b].end());
  });
  FloatMap sum(stack.target_width, stack.target_height, 0.0f);
  for (auto i : order) {
    for (std::size_t p = 0; p < sum.size(); ++p) sum[p] += resized[i][p];
  }
  return normalize_min_max(sum);
}

struct ThresholdResult {
  BinaryMask mask;
  double attention_ratio = 0.0;
};

/// Pixels with value >= t_th become foreground.
inline ThresholdResult threshold(const FloatMap& map, double t_th) {
  ThresholdResult out{BinaryMask(map.width(), map.height()), 0.0};
  std::size_t ones = 0;
  for (std::size_t i = 0; i < map.size(); ++i) {
    if (map[i] >= t_th) {
      out.mask[i] = 1;
      ++ones;
    }
  }
  out.attention_ratio = double(ones) / double(map.size());
  return out;
}

/// Tight box around the largest 8-connected component.
inline BoundingBox bounding_box(const BinaryMask& mask) {
  const auto comps = label_components(mask);
  if (comps.count() == 0) throw Error(ErrorCode::empty_mask, "bounding_box of empty mask");
  const auto label = comps.largest();
  BoundingBox box{mask.width(), mask.height(), -1, -1};
  for (int y = 0; y < mask.height(); ++y) {
    for (int x = 0; x < mask.width(); ++x) {
      if (comps.labels.at(x, y) != label) continue;
      box.x_min = std::min(box.x_min, x);
      box.y_min = std::min(box.y_min, y);
      box.x_max = std::max(box.x_max, x);
      box.y_max = std::max(box.y_max, y);
    }
  }
  return box;
}

/// Centre, left, right, top, bottom. Offsets are a quarter of the box extent,
/// clamped inside the box.
inline std::array<Pixel, 5> propose_points(const BoundingBox& box) {
  const int cx = (box.x_min + box.x_max) / 2;
  const int cy = (box.y_min + box.y_max) / 2;
  const int ox = static_cast<int>(std::lround(0.25 * box.width()));
  const int oy = static_cast<int>(std::lround(0.25 * box.height()));
  auto clamp_x = [&](int x) { return std::clamp(x, box.x_min, box.x_max); };
  auto clamp_y = [&](int y) { return std::clamp(y, box.y_min, box.y_max); };
  return {{{cx, cy}, {clamp_x(cx - ox), cy}, {clamp_x(cx + ox), cy}, {cx, clamp_y(cy - oy)},
           {cx, clamp_y(cy + oy)}}};
}

struct LocalizationResult {
  FloatMap aggregated;
  BinaryMask binary;
  BinaryMask densified;
  double attention_ratio = 0.0;
  BoundingBox bbox;
  std::array<Pixel, 5> prompt_points{};
};

inline constexpr double kDefaultAttentionThreshold = 0.5;

/// aggregate -> threshold -> dense CRF -> bounding box -> point prompts.
/// Errors carry the failing stage as a "[stage]" prefix.
inline LocalizationResult localize(const AttentionStack& stack, int token, const RgbImage& image,
                                   double t_th = kDefaultAttentionThreshold,
                                   const CrfParams& crf = {}) {
  LocalizationResult out;
  try {
    if (image.width() != stack.target_width || image.height() != stack.target_height) {
      throw Error(ErrorCode::invalid_argument, "image size does not match stack target size");
    }
    out.aggregated = aggregate(stack, token);
  } catch (const Error& e) {
    throw e.tagged("aggregate");
  }
  auto thresholded = threshold(out.aggregated, t_th);
  out.binary = std::move(thresholded.mask);
  out.attention_ratio = thresholded.attention_ratio;
  if (count_foreground(out.binary) == 0) {
    throw Error(ErrorCode::localization_failed, "no pixel reaches the attention threshold")
        .tagged("threshold");
  }
  try {
    out.densified = densify_crf(image, out.aggregated, crf);
  } catch (const Error& e) {
    throw e.tagged("densify_crf");
  }
  try {
    out.bbox = bounding_box(out.densified);
  } catch (const Error& e) {
    throw Error(ErrorCode::localization_failed, e.what()).tagged("bounding_box");
  }
  out.prompt_points = propose_points(out.bbox);
  return out;
}

inline nlohmann::json to_json(const LocalizationResult& r) {
  nlohmann::json points = nlohmann::json::array();
  for (const auto& p : r.prompt_points) points.push_back({p.x, p.y});
  return {{"bbox", {r.bbox.x_min, r.bbox.y_min, r.bbox.x_max, r.bbox.y_max}},
          {"prompt_points", points},
          {"attention_ratio", r.attention_ratio}};
}

}  // namespace novelseg
