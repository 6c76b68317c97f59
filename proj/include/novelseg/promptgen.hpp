#pragma once

#include <json.hpp>
#include <toml.hpp>

#include <filesystem>
#include <string>
#include <vector>

#include "novelseg/error.hpp"
#include "novelseg/random.hpp"

namespace novelseg {

/// Word lists for one novel class.
struct PromptSpec {
  std::string class_token;            // single-token class name, e.g. "bus"
  std::vector<std::string> variants;  // e.g. "school bus", each containing class_token
  std::vector<std::string> locations;
  std::string style_suffix;
  std::string negative_prompt;

  void validate() const {
    if (class_token.empty()) throw Error(ErrorCode::config, "prompt spec: class_token is empty");
    if (variants.empty()) throw Error(ErrorCode::config, "prompt spec: variants list is empty");
    if (locations.empty()) throw Error(ErrorCode::config, "prompt spec: locations list is empty");
    for (const auto& v : variants) {
      if (v.find(class_token) == std::string::npos) {
        throw Error(ErrorCode::config,
                    "prompt spec: variant '" + v + "' does not contain '" + class_token + "'");
      }
    }
  }
};

struct PromptRecord {
  std::string prompt;      // full text conditioning
  std::string simplified;  // variant collapsed to the class token
  std::string negative;

  friend bool operator==(const PromptRecord&, const PromptRecord&) = default;
};

namespace detail {

inline std::string compose_prompt(const std::string& subject, const std::string& location,
                                  const std::string& style) {
  std::string text = subject + " " + location;
  if (!style.empty()) text += ", " + style;
  return text;
}

}  // namespace detail

/// n prompts "{variant} {location}, {style}" drawn uniformly with replacement
/// from variants x locations. Each prompt consumes one draw for the variant
/// index, then one for the location index.
inline std::vector<PromptRecord> generate_prompts(const PromptSpec& spec, std::size_t n,
                                                  std::uint64_t seed) {
  spec.validate();
  if (n < 1) throw Error(ErrorCode::invalid_argument, "prompt count must be >= 1");
  Pcg32 rng(seed);
  std::vector<PromptRecord> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto& variant = spec.variants[rng.bounded(static_cast<std::uint32_t>(spec.variants.size()))];
    const auto& location = spec.locations[rng.bounded(static_cast<std::uint32_t>(spec.locations.size()))];
    out.push_back({detail::compose_prompt(variant, location, spec.style_suffix),
                   detail::compose_prompt(spec.class_token, location, spec.style_suffix),
                   spec.negative_prompt});
  }
  return out;
}

namespace detail {

inline std::vector<std::string> string_array(const toml::table& table, std::string_view key) {
  std::vector<std::string> out;
  const auto* arr = table[key].as_array();
  if (!arr) return out;
  for (const auto& node : *arr) {
    const auto value = node.value<std::string>();
    if (!value) throw Error(ErrorCode::config, "prompt spec: '" + std::string(key) + "' must hold strings");
    out.push_back(*value);
  }
  return out;
}

}  // namespace detail

/// Reads a PromptSpec from a TOML table with keys class_token, variants,
/// locations, style_suffix, negative_prompt.
inline PromptSpec prompt_spec_from_toml(const toml::table& table) {
  PromptSpec spec;
  spec.class_token = table["class_token"].value_or(std::string{});
  spec.variants = detail::string_array(table, "variants");
  spec.locations = detail::string_array(table, "locations");
  spec.style_suffix = table["style_suffix"].value_or(std::string{});
  spec.negative_prompt = table["negative_prompt"].value_or(std::string{});
  spec.validate();
  return spec;
}

inline PromptSpec load_prompt_spec(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) {
    throw Error(ErrorCode::config, "prompt spec not found: " + path.string());
  }
  try {
    return prompt_spec_from_toml(toml::parse_file(path.string()));
  } catch (const toml::parse_error& e) {
    throw Error(ErrorCode::config, "prompt spec " + path.string() + ": " + std::string(e.description()));
  }
}

/// One JSON object per line.
inline std::string to_jsonl(const std::vector<PromptRecord>& prompts) {
  std::string out;
  for (const auto& p : prompts) {
    out += nlohmann::json{{"prompt", p.prompt}, {"simplified", p.simplified}, {"negative", p.negative}}
               .dump();
    out += '\n';
  }
  return out;
}

}  // namespace novelseg
