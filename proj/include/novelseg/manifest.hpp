#pragma once

#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <set>
#include <string>
#include <vector>

#include "novelseg/error.hpp"
#include "novelseg/png_io.hpp"
#include "novelseg/raster.hpp"

namespace novelseg {

struct ManifestEntry {
  fs::path image;  // absolute or relative to the working directory once loaded
  fs::path label;

  friend bool operator==(const ManifestEntry&, const ManifestEntry&) = default;
};

/// Image/label pairs of a semantic-segmentation dataset.
struct DatasetManifest {
  int num_classes = 0;
  std::vector<std::string> class_names;
  std::vector<ManifestEntry> entries;
  std::uint8_t ignore_index = kDefaultIgnoreIndex;
};

namespace detail {

inline fs::path resolve_against(const fs::path& base, const std::string& p) {
  fs::path path(p);
  return path.is_absolute() ? path : (base / path).lexically_normal();
}

inline std::string relative_to(const fs::path& base, const fs::path& p) {
  const auto abs_base = fs::absolute(base).lexically_normal();
  const auto abs_p = fs::absolute(p).lexically_normal();
  auto rel = abs_p.lexically_relative(abs_base);
  return rel.empty() ? abs_p.generic_string() : rel.generic_string();
}

}  // namespace detail

/// Checks every manifest invariant eagerly, including raster contents.
inline void validate_manifest(const DatasetManifest& manifest) {
  if (manifest.num_classes < 1 || manifest.num_classes > 255) {
    throw Error(ErrorCode::validation,
                "num_classes must be in [1,255], got " + std::to_string(manifest.num_classes));
  }
  if (!manifest.class_names.empty() &&
      static_cast<int>(manifest.class_names.size()) != manifest.num_classes) {
    throw Error(ErrorCode::validation, "class_names has " +
                                           std::to_string(manifest.class_names.size()) +
                                           " names for " + std::to_string(manifest.num_classes) +
                                           " classes");
  }
  std::set<fs::path> seen;
  for (const auto& entry : manifest.entries) {
    for (const auto& p : {entry.image, entry.label}) {
      if (!seen.insert(fs::weakly_canonical(p)).second) {
        throw Error(ErrorCode::validation, "duplicate path in manifest: " + p.string());
      }
    }
    const auto image = load_image(entry.image);
    const auto labels = load_labels(entry.label, manifest.ignore_index);
    if (!image.same_shape(labels)) {
      throw Error(ErrorCode::validation, "image " + entry.image.string() + " and label " +
                                             entry.label.string() + " differ in size");
    }
    try {
      labels.validate(manifest.num_classes);
    } catch (const Error& e) {
      throw Error(ErrorCode::validation, entry.label.string() + ": " + e.what());
    }
  }
}

/// Parses and fully validates a manifest. Relative paths resolve against the
/// manifest's own directory.
inline DatasetManifest load_manifest(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::io, "cannot open manifest " + path.string());
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::decode, "manifest " + path.string() + " is not valid JSON: " + e.what());
  }
  DatasetManifest manifest;
  const auto base = path.parent_path();
  try {
    manifest.num_classes = doc.at("num_classes").get<int>();
    if (doc.contains("class_names")) {
      manifest.class_names = doc.at("class_names").get<std::vector<std::string>>();
    }
    if (doc.contains("ignore_index")) {
      manifest.ignore_index = doc.at("ignore_index").get<std::uint8_t>();
    }
    for (const auto& e : doc.at("entries")) {
      manifest.entries.push_back(
          {detail::resolve_against(base, e.at("image").get<std::string>()),
           detail::resolve_against(base, e.at("label").get<std::string>())});
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::decode, "manifest " + path.string() + " has bad schema: " + e.what());
  }
  try {
    validate_manifest(manifest);
  } catch (const Error& e) {
    throw Error(e.code(), "manifest " + path.string() + ": " + e.what());
  }
  return manifest;
}

/// Writes the manifest with paths relative to the manifest's directory.
inline void save_manifest(const fs::path& path, const DatasetManifest& manifest) {
  const auto base = path.parent_path().empty() ? fs::path(".") : path.parent_path();
  nlohmann::json doc;
  doc["num_classes"] = manifest.num_classes;
  doc["class_names"] = manifest.class_names;
  if (manifest.ignore_index != kDefaultIgnoreIndex) doc["ignore_index"] = manifest.ignore_index;
  doc["entries"] = nlohmann::json::array();
  for (const auto& e : manifest.entries) {
    doc["entries"].push_back({{"image", detail::relative_to(base, e.image)},
                              {"label", detail::relative_to(base, e.label)}});
  }
  const auto text = doc.dump(2) + "\n";
  write_file_bytes(path, text.data(), text.size());
}

}  // namespace novelseg
