#pragma once

#include <json.hpp>

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "novelseg/contour.hpp"
#include "novelseg/manifest.hpp"
#include "novelseg/parallel.hpp"
#include "novelseg/png_io.hpp"
#include "novelseg/random.hpp"

namespace novelseg {

/// Tight crop of a generated object with its mask and novel class index.
struct Cutout {
  RgbImage pixels;
  BinaryMask mask;
  int class_index = 0;
};

/// Crops image and mask to the bounding box of the mask's largest component.
/// Only that component is kept in the cutout mask.
inline Cutout extract_cutout(const RgbImage& image, const BinaryMask& mask, int class_index) {
  if (!image.same_shape(mask)) {
    throw Error(ErrorCode::invalid_argument, "extract_cutout: image and mask differ in size");
  }
  const auto object = largest_component(mask);
  const auto box = foreground_bounds(object);
  if (!box) throw Error(ErrorCode::empty_mask, "extract_cutout: empty mask");
  Cutout out{RgbImage(box->width(), box->height()), BinaryMask(box->width(), box->height()),
             class_index};
  for (int y = 0; y < box->height(); ++y) {
    for (int x = 0; x < box->width(); ++x) {
      out.pixels.at(x, y) = image.at(box->x_min + x, box->y_min + y);
      out.mask.at(x, y) = object.at(box->x_min + x, box->y_min + y);
    }
  }
  return out;
}

struct ClassCutouts {
  std::string class_name;
  int class_index = 0;
  std::vector<Cutout> cutouts;
};

struct CutoutBank {
  std::vector<ClassCutouts> classes;

  const ClassCutouts* find(const std::string& name) const {
    for (const auto& c : classes) {
      if (c.class_name == name) return &c;
    }
    return nullptr;
  }
};

inline constexpr const char* kBankIndexName = "bank.json";

namespace detail {

inline std::string bank_stem(std::size_t i) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%03zu", i);
  return buf;
}

inline ClassCutouts load_bank_class(const fs::path& dir) {
  const auto index = dir / kBankIndexName;
  std::ifstream in(index);
  if (!in) throw Error(ErrorCode::io, "cannot open " + index.string());
  ClassCutouts out;
  std::size_t count = 0;
  try {
    const auto doc = nlohmann::json::parse(in);
    out.class_name = doc.at("class_name").get<std::string>();
    out.class_index = doc.at("Q").get<int>();
    count = doc.at("count").get<std::size_t>();
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::decode, "bad bank index " + index.string() + ": " + e.what());
  }
  for (std::size_t i = 0; i < count; ++i) {
    const auto stem = bank_stem(i);
    Cutout c{load_image(dir / (stem + "_rgb.png")), load_mask(dir / (stem + "_mask.png")),
             out.class_index};
    if (!c.pixels.same_shape(c.mask)) {
      throw Error(ErrorCode::validation, "bank cutout " + stem + " in " + dir.string() +
                                             " has mismatched rgb/mask sizes");
    }
    if (count_foreground(c.mask) == 0) {
      throw Error(ErrorCode::validation, "bank cutout " + stem + " in " + dir.string() + " is empty");
    }
    out.cutouts.push_back(std::move(c));
  }
  return out;
}

}  // namespace detail

/// Writes `NNN_rgb.png` / `NNN_mask.png` pairs and `bank.json`.
inline void save_bank_class(const fs::path& dir, const ClassCutouts& bank) {
  fs::create_directories(dir);
  for (std::size_t i = 0; i < bank.cutouts.size(); ++i) {
    const auto stem = detail::bank_stem(i);
    save_image(dir / (stem + "_rgb.png"), bank.cutouts[i].pixels);
    save_mask(dir / (stem + "_mask.png"), bank.cutouts[i].mask);
  }
  const auto text = nlohmann::json{{"class_name", bank.class_name},
                                   {"Q", bank.class_index},
                                   {"count", bank.cutouts.size()}}
                        .dump(2) +
                    "\n";
  write_file_bytes(dir / kBankIndexName, text.data(), text.size());
}

/// A bank directory either holds one class (bank.json at its root) or one
/// class per subdirectory, read in sorted name order.
inline CutoutBank load_bank(const fs::path& dir) {
  CutoutBank bank;
  if (fs::exists(dir / kBankIndexName)) {
    bank.classes.push_back(detail::load_bank_class(dir));
    return bank;
  }
  if (!fs::is_directory(dir)) throw Error(ErrorCode::io, "bank directory not found: " + dir.string());
  std::vector<fs::path> subdirs;
  for (const auto& e : fs::directory_iterator(dir)) {
    if (e.is_directory() && fs::exists(e.path() / kBankIndexName)) subdirs.push_back(e.path());
  }
  std::sort(subdirs.begin(), subdirs.end());
  for (const auto& d : subdirs) bank.classes.push_back(detail::load_bank_class(d));
  if (bank.classes.empty()) throw Error(ErrorCode::io, "no bank.json under " + dir.string());
  return bank;
}

struct MixConfig {
  double p_m = 0.5;
  std::uint64_t seed = 0;
  std::map<std::string, int> class_assignments;  // novel class name -> Q

  /// Assignments default to the indices recorded in the bank.
  static MixConfig from_bank(const CutoutBank& bank, double p_m, std::uint64_t seed) {
    MixConfig cfg{p_m, seed, {}};
    for (const auto& c : bank.classes) cfg.class_assignments[c.class_name] = c.class_index;
    return cfg;
  }

  void validate(int num_classes) const {
    if (!(p_m >= 0.0 && p_m <= 1.0)) throw Error(ErrorCode::config, "p_m must lie in [0,1]");
    std::vector<int> seen;
    for (const auto& [name, q] : class_assignments) {
      if (q < num_classes) {
        throw Error(ErrorCode::config, "novel class '" + name + "' index " + std::to_string(q) +
                                           " collides with existing classes [0," +
                                           std::to_string(num_classes) + ")");
      }
      if (q > 254) throw Error(ErrorCode::config, "novel class index must be <= 254");
      if (std::find(seen.begin(), seen.end(), q) != seen.end()) {
        throw Error(ErrorCode::config, "novel class index " + std::to_string(q) + " assigned twice");
      }
      seen.push_back(q);
    }
  }
};

/// Uniform top-left corner such that the cutout fits entirely.
inline Pixel sample_roi(int source_w, int source_h, int cutout_w, int cutout_h, Pcg32& rng) {
  if (cutout_w > source_w || cutout_h > source_h) {
    throw Error(ErrorCode::does_not_fit,
                "cutout " + std::to_string(cutout_w) + "x" + std::to_string(cutout_h) +
                    " does not fit source " + std::to_string(source_w) + "x" + std::to_string(source_h));
  }
  const int x = rng.uniform_int(0, source_w - cutout_w);
  const int y = rng.uniform_int(0, source_h - cutout_h);
  return {x, y};
}

/// Copy-paste of one cutout at `roi` (top-left). Wherever the cutout mask is
/// set, the image takes the cutout pixel and the label becomes the cutout's
/// class index; every other pixel is untouched.
inline std::pair<RgbImage, LabelRaster> paste(const RgbImage& image, const LabelRaster& labels,
                                              const Cutout& cutout, Pixel roi, int num_classes) {
  if (!image.same_shape(labels)) {
    throw Error(ErrorCode::invalid_argument, "paste: image and labels differ in size");
  }
  if (cutout.class_index < num_classes) {
    throw Error(ErrorCode::invalid_argument, "paste: class index " + std::to_string(cutout.class_index) +
                                                 " is not a novel class (C = " +
                                                 std::to_string(num_classes) + ")");
  }
  if (roi.x < 0 || roi.y < 0 || roi.x + cutout.mask.width() > image.width() ||
      roi.y + cutout.mask.height() > image.height()) {
    throw Error(ErrorCode::invalid_argument, "paste: roi out of bounds");
  }
  std::pair<RgbImage, LabelRaster> out{image, labels};
  for (int y = 0; y < cutout.mask.height(); ++y) {
    for (int x = 0; x < cutout.mask.width(); ++x) {
      if (!cutout.mask.at(x, y)) continue;
      out.first.at(roi.x + x, roi.y + y) = cutout.pixels.at(x, y);
      out.second.at(roi.x + x, roi.y + y) = static_cast<std::uint8_t>(cutout.class_index);
    }
  }
  return out;
}

inline constexpr int kMaxPasteAttempts = 10;

struct PastePlan {
  int class_index = 0;
  std::size_t cutout = 0;
  Pixel roi;
};

/// Draws the pastes for one entry from its own substream (seed, entry index).
/// Per novel class in ascending index order: one Bernoulli(p_m) draw; on
/// success up to kMaxPasteAttempts of (cutout index, then roi if it fits).
inline std::vector<PastePlan> plan_entry(const std::vector<const ClassCutouts*>& classes,
                                         const std::vector<int>& indices, double p_m,
                                         std::uint64_t seed, std::size_t entry, int width,
                                         int height) {
  Pcg32 rng(seed, entry);
  std::vector<PastePlan> plan;
  for (std::size_t c = 0; c < classes.size(); ++c) {
    if (!rng.bernoulli(p_m)) continue;
    const auto& cutouts = classes[c]->cutouts;
    for (int attempt = 0; attempt < kMaxPasteAttempts; ++attempt) {
      const auto pick = rng.bounded(static_cast<std::uint32_t>(cutouts.size()));
      const auto& cut = cutouts[pick];
      if (cut.mask.width() > width || cut.mask.height() > height) continue;
      plan.push_back({indices[c], pick, sample_roi(width, height, cut.mask.width(), cut.mask.height(), rng)});
      break;
    }
  }
  return plan;
}

struct MixResult {
  DatasetManifest manifest;
  std::vector<std::size_t> pastes_per_entry;

  std::size_t mixed_entries() const {
    return static_cast<std::size_t>(std::count_if(pastes_per_entry.begin(), pastes_per_entry.end(),
                                                  [](std::size_t n) { return n > 0; }));
  }
};

/// Writes the mixed dataset to out_dir (images/, labels/, manifest.json).
/// Entries without a paste are copied byte-for-byte. Output depends only on
/// the inputs and cfg.seed, not on `jobs`.
inline MixResult mix_dataset(const DatasetManifest& manifest, const CutoutBank& bank,
                             const MixConfig& cfg, const fs::path& out_dir, int jobs = 1,
                             std::ostream* log = nullptr) {
  cfg.validate(manifest.num_classes);
  std::vector<std::pair<int, std::string>> order;
  for (const auto& [name, q] : cfg.class_assignments) order.emplace_back(q, name);
  std::sort(order.begin(), order.end());
  std::vector<const ClassCutouts*> classes;
  std::vector<int> indices;
  for (const auto& [q, name] : order) {
    const auto* c = bank.find(name);
    if (!c || c->cutouts.empty()) {
      throw Error(ErrorCode::validation, "cutout bank has no cutouts for class '" + name + "'");
    }
    classes.push_back(c);
    indices.push_back(q);
  }

  std::error_code ec;
  fs::create_directories(out_dir / "images", ec);
  fs::create_directories(out_dir / "labels", ec);
  if (ec || !fs::is_directory(out_dir / "images") || !fs::is_directory(out_dir / "labels")) {
    throw Error(ErrorCode::io, "cannot create output directory " + out_dir.string());
  }

  MixResult result;
  result.manifest.num_classes = manifest.num_classes;
  result.manifest.class_names = manifest.class_names;
  result.manifest.ignore_index = manifest.ignore_index;
  const int max_q = indices.empty() ? manifest.num_classes - 1 : indices.back();
  const int new_count = std::max<int>(manifest.num_classes + static_cast<int>(indices.size()), max_q + 1);
  if (!result.manifest.class_names.empty() || !order.empty()) {
    result.manifest.class_names.resize(static_cast<std::size_t>(manifest.num_classes));
    for (int c = 0; c < manifest.num_classes; ++c) {
      auto& name = result.manifest.class_names[static_cast<std::size_t>(c)];
      if (name.empty()) name = "class_" + std::to_string(c);
    }
    result.manifest.class_names.resize(static_cast<std::size_t>(new_count));
    for (int c = manifest.num_classes; c < new_count; ++c) {
      result.manifest.class_names[static_cast<std::size_t>(c)] = "unused_" + std::to_string(c);
    }
    for (const auto& [q, name] : order) result.manifest.class_names[static_cast<std::size_t>(q)] = name;
  }
  result.manifest.num_classes = new_count;
  result.manifest.entries.resize(manifest.entries.size());
  result.pastes_per_entry.assign(manifest.entries.size(), 0);

  std::mutex log_mutex;
  parallel_for(manifest.entries.size(), jobs, [&](std::size_t i) {
    const auto started = std::chrono::steady_clock::now();
    const auto& entry = manifest.entries[i];
    char prefix[32];
    std::snprintf(prefix, sizeof(prefix), "%06zu_", i);
    const fs::path image_out = out_dir / "images" / (prefix + entry.image.filename().string());
    const fs::path label_out = out_dir / "labels" / (prefix + entry.label.filename().string());

    auto image = load_image(entry.image);
    auto labels = load_labels(entry.label, manifest.ignore_index);
    const auto plan = plan_entry(classes, indices, cfg.p_m, cfg.seed, i, image.width(), image.height());
    if (plan.empty()) {
      fs::copy_file(entry.image, image_out, fs::copy_options::overwrite_existing);
      fs::copy_file(entry.label, label_out, fs::copy_options::overwrite_existing);
    } else {
      for (const auto& p : plan) {
        const auto* cls = classes[static_cast<std::size_t>(
            std::find(indices.begin(), indices.end(), p.class_index) - indices.begin())];
        Cutout cut = cls->cutouts[p.cutout];
        cut.class_index = p.class_index;
        std::tie(image, labels) = paste(image, labels, cut, p.roi, manifest.num_classes);
      }
      save_image(image_out, image);
      save_labels(label_out, labels);
    }
    result.manifest.entries[i] = {image_out, label_out};
    result.pastes_per_entry[i] = plan.size();
    if (log) {
      const auto ms = std::chrono::duration<double, std::milli>(
                          std::chrono::steady_clock::now() - started).count();
      std::lock_guard lock(log_mutex);
      *log << "mix path=" << entry.image.string() << " action="
           << (plan.empty() ? "copied" : "pasted:" + std::to_string(plan.size())) << " ms="
           << std::fixed << std::setprecision(2) << ms << "\n";
    }
  });

  save_manifest(out_dir / "manifest.json", result.manifest);
  return result;
}

}  // namespace novelseg
