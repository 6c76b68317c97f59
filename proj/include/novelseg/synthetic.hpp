#pragma once

// Synthetic stand-ins for generator outputs: images with a single object,
// attention stacks whose target-token slices peak on that object, and a small
// labelled street-scene dataset to mix into. Used by the demo workspace and
// the end-to-end tests.

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "novelseg/attention.hpp"
#include "novelseg/manifest.hpp"
#include "novelseg/random.hpp"

namespace novelseg::synthetic {

inline BinaryMask disk(int width, int height, double cx, double cy, double radius) {
  BinaryMask mask(width, height);
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) {
      if ((x - cx) * (x - cx) + (y - cy) * (y - cy) <= radius * radius) mask.set(x, y);
    }
  }
  return mask;
}

inline BinaryMask ellipse(int width, int height, double cx, double cy, double rx, double ry) {
  BinaryMask mask(width, height);
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) {
      const double u = (x - cx) / rx;
      const double v = (y - cy) / ry;
      if (u * u + v * v <= 1.0) mask.set(x, y);
    }
  }
  return mask;
}

inline BinaryMask rectangle(int width, int height, const BoundingBox& box) {
  BinaryMask mask(width, height);
  for (int y = box.y_min; y <= box.y_max; ++y) {
    for (int x = box.x_min; x <= box.x_max; ++x) {
      if (mask.in_bounds(x, y)) mask.set(x, y);
    }
  }
  return mask;
}

/// Separable Gaussian blur with edge clamping.
inline FloatMap gaussian_blur(const FloatMap& in, double sigma) {
  const int r = std::max(1, static_cast<int>(std::ceil(3 * sigma)));
  std::vector<double> k(static_cast<std::size_t>(2 * r + 1));
  double sum = 0;
  for (int i = -r; i <= r; ++i) sum += k[static_cast<std::size_t>(i + r)] = std::exp(-i * i / (2 * sigma * sigma));
  for (auto& v : k) v /= sum;
  FloatMap tmp(in.width(), in.height());
  FloatMap out(in.width(), in.height());
  for (int y = 0; y < in.height(); ++y) {
    for (int x = 0; x < in.width(); ++x) {
      double acc = 0;
      for (int i = -r; i <= r; ++i) acc += k[static_cast<std::size_t>(i + r)] * in.at(std::clamp(x + i, 0, in.width() - 1), y);
      tmp.at(x, y) = static_cast<float>(acc);
    }
  }
  for (int y = 0; y < in.height(); ++y) {
    for (int x = 0; x < in.width(); ++x) {
      double acc = 0;
      for (int i = -r; i <= r; ++i) acc += k[static_cast<std::size_t>(i + r)] * tmp.at(x, std::clamp(y + i, 0, in.height() - 1));
      out.at(x, y) = static_cast<float>(acc);
    }
  }
  return out;
}

/// Box-average downsampling by an integer factor.
inline FloatMap downsample(const FloatMap& in, int factor) {
  FloatMap out(in.width() / factor, in.height() / factor);
  for (int y = 0; y < out.height(); ++y) {
    for (int x = 0; x < out.width(); ++x) {
      double acc = 0;
      for (int dy = 0; dy < factor; ++dy) {
        for (int dx = 0; dx < factor; ++dx) acc += in.at(x * factor + dx, y * factor + dy);
      }
      out.at(x, y) = static_cast<float>(acc / (factor * factor));
    }
  }
  return out;
}

inline FloatMap to_float(const BinaryMask& mask) {
  FloatMap out(mask.width(), mask.height());
  for (std::size_t i = 0; i < mask.size(); ++i) out[i] = mask[i] ? 1.0f : 0.0f;
  return out;
}

/// Street-like background (sky over road) with mild per-pixel noise, and the
/// object painted in a flat colour.
inline RgbImage render_object_image(const BinaryMask& object, Rgb color, Pcg32& rng) {
  RgbImage image(object.width(), object.height());
  for (int y = 0; y < image.height(); ++y) {
    for (int x = 0; x < image.width(); ++x) {
      const bool sky = y < image.height() / 2;
      const int n = static_cast<int>(rng.bounded(9)) - 4;
      auto c = [&](int v) { return static_cast<std::uint8_t>(std::clamp(v + n, 0, 255)); };
      image.at(x, y) = sky ? Rgb{c(120), c(160), c(215)} : Rgb{c(90), c(90), c(95)};
      if (object.at(x, y)) image.at(x, y) = color;
    }
  }
  return image;
}

/// Attention stack whose slices for `token` follow the blurred object mask at
/// several native resolutions; other tokens get unrelated blobs.
inline AttentionStack object_attention(const BinaryMask& object, const std::vector<std::string>& tokens,
                                       int token, Pcg32& rng) {
  AttentionStack stack;
  stack.tokens = tokens;
  stack.target_width = object.width();
  stack.target_height = object.height();
  const auto focus = gaussian_blur(to_float(object), 1.5);
  int layer = 0;
  for (int factor : {4, 2}) {
    for (int t = 0; t < 2; ++t) {
      for (int h = 0; h < 2; ++h) {
        for (int k = 0; k < static_cast<int>(tokens.size()); ++k) {
          FloatMap map(object.width(), object.height());
          if (k == token) {
            map = focus;
          } else {
            const double cx = rng.uniform01() * object.width();
            const double cy = rng.uniform01() * object.height();
            map = gaussian_blur(to_float(disk(object.width(), object.height(), cx, cy, 6)), 3.0);
          }
          const float gain = 0.5f + static_cast<float>(rng.uniform01());
          for (auto& v : map) v = v * gain + 0.02f * static_cast<float>(rng.uniform01());
          stack.slices.push_back({layer, t * 10, h, k, downsample(map, factor)});
        }
      }
    }
    ++layer;
  }
  return stack;
}

inline const std::vector<std::string>& cityscapes_classes() {
  static const std::vector<std::string> names = {
      "road",  "sidewalk", "building", "wall",   "fence", "pole",       "traffic light",
      "traffic sign", "vegetation", "terrain", "sky", "person", "rider", "car",
      "truck", "bus", "train", "motorcycle", "bicycle"};
  return names;
}

/// Toy 19-class dataset: sky / building / road bands with a car box and a
/// strip of ignore pixels. Writes images/, labels/ and manifest.json.
inline DatasetManifest write_toy_dataset(const fs::path& dir, std::size_t count, int width, int height,
                                         std::uint64_t seed) {
  fs::create_directories(dir / "images");
  fs::create_directories(dir / "labels");
  Pcg32 rng(seed, 7);
  DatasetManifest manifest;
  manifest.num_classes = 19;
  manifest.class_names = cityscapes_classes();
  for (std::size_t i = 0; i < count; ++i) {
    RgbImage image(width, height);
    LabelRaster labels(width, height, 0);
    const int horizon = height / 3 + static_cast<int>(rng.bounded(static_cast<std::uint32_t>(height / 6 + 1)));
    const int road = 2 * height / 3;
    const int car_x = static_cast<int>(rng.bounded(static_cast<std::uint32_t>(std::max(1, width - 20))));
    for (int y = 0; y < height; ++y) {
      for (int x = 0; x < width; ++x) {
        std::uint8_t label = y < horizon ? 10 : (y < road ? 2 : 0);
        Rgb color = y < horizon ? Rgb{110, 150, 210} : (y < road ? Rgb{140, 110, 90} : Rgb{80, 80, 85});
        if (y >= road - 6 && y < road + 6 && x >= car_x && x < car_x + 18) {
          label = 13;
          color = Rgb{200, 30, 30};
        }
        if (y == height - 1) label = kDefaultIgnoreIndex;
        image.at(x, y) = color;
        labels.at(x, y) = label;
      }
    }
    const std::string stem = "toy_" + std::to_string(i);
    const auto image_path = dir / "images" / (stem + ".png");
    const auto label_path = dir / "labels" / (stem + ".png");
    save_image(image_path, image);
    save_labels(label_path, labels);
    manifest.entries.push_back({image_path, label_path});
  }
  save_manifest(dir / "manifest.json", manifest);
  return manifest;
}

/// Boundary noise: flips pixels within `band` px of the mask edge at random.
inline BinaryMask ragged(const BinaryMask& mask, int band, double flip, Pcg32& rng) {
  BinaryMask out = mask;
  for (int y = 0; y < mask.height(); ++y) {
    for (int x = 0; x < mask.width(); ++x) {
      bool near_edge = false;
      for (int dy = -band; dy <= band && !near_edge; ++dy) {
        for (int dx = -band; dx <= band; ++dx) {
          if (mask.test(x + dx, y + dy) != mask.test(x, y)) {
            near_edge = true;
            break;
          }
        }
      }
      if (near_edge && rng.uniform01() < flip) out.set(x, y, !mask.at(x, y));
    }
  }
  return out;
}

struct DemoWorkspace {
  fs::path root;
  fs::path config;
  fs::path manifest;
  fs::path samples_dir;
  std::size_t good_samples = 0;
};

/// Generates a complete pipeline workspace under `root`:
///   samples/bus/<name>/{image.png, stack/, [candidate_mask.png]}
///   dataset/{images,labels,manifest.json}, prompt_spec.toml, pipeline.toml
/// Four samples are clean objects; one is a close-up whose attention covers
/// most of the frame; one carries a ragged candidate mask.
inline DemoWorkspace write_demo_workspace(const fs::path& root, std::uint64_t seed = 1) {
  constexpr int kSize = 64;
  DemoWorkspace ws;
  ws.root = root;
  ws.samples_dir = root / "samples" / "bus";
  fs::create_directories(ws.samples_dir);
  Pcg32 rng(seed, 11);
  const std::vector<std::string> tokens = {"a", "bus", "in", "the", "street"};
  const int bus_token = 1;

  struct Sample {
    std::string name;
    BinaryMask object;
    bool ragged_candidate = false;
  };
  std::vector<Sample> samples = {
      {"sample_00", ellipse(kSize, kSize, 30, 36, 14, 9)},
      {"sample_01", rectangle(kSize, kSize, {18, 26, 45, 43})},
      {"sample_02", ellipse(kSize, kSize, 34, 30, 12, 11)},
      {"sample_03", rectangle(kSize, kSize, {10, 30, 37, 47})},
      {"sample_04_closeup", rectangle(kSize, kSize, {2, 2, 61, 61})},
      {"sample_05_ragged", ellipse(kSize, kSize, 32, 32, 15, 12), true},
  };
  const std::vector<Rgb> colors = {{230, 190, 30}, {240, 200, 40}, {220, 120, 30}, {250, 210, 60},
                                   {230, 190, 30}, {235, 180, 35}};
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const auto& s = samples[i];
    const auto dir = ws.samples_dir / s.name;
    fs::create_directories(dir);
    save_image(dir / "image.png", render_object_image(s.object, colors[i], rng));
    save_attention_stack(dir / "stack", object_attention(s.object, tokens, bus_token, rng));
    if (s.ragged_candidate) save_mask(dir / "candidate_mask.png", ragged(s.object, 2, 0.5, rng));
    if (!s.ragged_candidate && s.name.find("closeup") == std::string::npos) ++ws.good_samples;
  }

  const auto dataset = write_toy_dataset(root / "dataset", 10, 96, 96, seed);
  ws.manifest = root / "dataset" / "manifest.json";

  const std::string prompt_spec =
      "class_token = \"bus\"\n"
      "variants = [\"school bus\", \"tour bus\", \"trolleybus\", \"double-decker bus\"]\n"
      "locations = [\"in the street\", \"at the airport\", \"on a scenic route\"]\n"
      "style_suffix = \"ego camera, color\"\n"
      "negative_prompt = \"grayscale, artistic, painting\"\n";
  write_file_bytes(root / "prompt_spec.toml", prompt_spec.data(), prompt_spec.size());

  const std::string config =
      "seed = " + std::to_string(seed) + "\n"
      "work_dir = \"work\"\n"
      "manifest = \"dataset/manifest.json\"\n\n"
      "[localize]\nthreshold = 0.5\n\n"
      "[crf]\niterations = 5\nappearance_weight = 10.0\nappearance_xy_std = 80.0\n"
      "appearance_rgb_std = 13.0\nsmoothness_weight = 3.0\nsmoothness_xy_std = 3.0\n\n"
      "[curation]\npp_min = 0.6\nsmooth_min = 1.0\nenergy_max = 50.0\nratio_max = 0.4\n\n"
      "[mix]\np_m = 1.0\n\n"
      "[prompts]\nn = 10\n" + prompt_spec + "\n"
      "[[classes]]\nname = \"bus\"\nindex = 19\ntoken = \"bus\"\nsamples_dir = \"samples/bus\"\n";
  ws.config = root / "pipeline.toml";
  write_file_bytes(ws.config, config.data(), config.size());
  return ws;
}

}  // namespace novelseg::synthetic
