#pragma once

// File-level commands behind the `novelseg` CLI. Each run_* function reads
// its inputs from disk, writes its outputs, and returns a JSON summary.

#include <json.hpp>
#include <toml.hpp>

#include <algorithm>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "novelseg/attention.hpp"
#include "novelseg/curation.hpp"
#include "novelseg/eval.hpp"
#include "novelseg/manifest.hpp"
#include "novelseg/mixing.hpp"
#include "novelseg/promptgen.hpp"

namespace novelseg {

/// Exit status contract of the CLI: 0 success, 1 data error, 2 usage/config error.
inline int exit_code_for(ErrorCode code) {
  switch (code) {
    case ErrorCode::config:
    case ErrorCode::invalid_argument:
    case ErrorCode::missing_token:
      return 2;
    default:
      return 1;
  }
}

namespace detail {

inline void write_text(const fs::path& path, const std::string& text) {
  write_file_bytes(path, text.data(), text.size());
}

inline nlohmann::json read_json(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::io, "cannot open " + path.string());
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::decode, path.string() + ": " + e.what());
  }
}

inline double elapsed_ms(std::chrono::steady_clock::time_point since) {
  return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - since).count();
}

}  // namespace detail

// ---------------------------------------------------------------- prompts

inline nlohmann::json run_prompts(const fs::path& spec_path, std::size_t n, std::uint64_t seed,
                                  const fs::path& out_path) {
  const auto spec = load_prompt_spec(spec_path);
  const auto prompts = generate_prompts(spec, n, seed);
  detail::write_text(out_path, to_jsonl(prompts));
  return {{"command", "prompts"}, {"count", prompts.size()}, {"output", out_path.generic_string()}};
}

// ---------------------------------------------------------------- localize

inline constexpr const char* kLocalizationName = "localization.json";

struct LocalizeOptions {
  double threshold = kDefaultAttentionThreshold;
  CrfParams crf;
  std::optional<fs::path> candidate_mask;
};

/// Writes image.png, aggregated.pfm, binary_mask.png, crf_mask.png,
/// densified_mask.png (the candidate mask when one is supplied, otherwise the
/// CRF mask) and localization.json into out_dir.
inline nlohmann::json run_localize(const fs::path& stack_dir, const fs::path& image_path,
                                   const std::string& token, const fs::path& out_dir,
                                   const LocalizeOptions& options = {}) {
  const auto stack = load_attention_stack(stack_dir);
  const int token_index = stack.token_index(token);
  const auto image = load_image(image_path);
  auto result = localize(stack, token_index, image, options.threshold, options.crf);
  const auto crf_mask = result.densified;
  std::string mask_source = "crf";
  if (options.candidate_mask) {
    auto candidate = load_mask(*options.candidate_mask);
    if (!candidate.same_shape(image)) {
      throw Error(ErrorCode::invalid_argument, "candidate mask size differs from image");
    }
    result.densified = std::move(candidate);
    mask_source = "candidate";
  }
  fs::create_directories(out_dir);
  save_image(out_dir / "image.png", image);
  save_float_map(out_dir / "aggregated.pfm", result.aggregated);
  save_mask(out_dir / "binary_mask.png", result.binary);
  save_mask(out_dir / "crf_mask.png", crf_mask);
  save_mask(out_dir / "densified_mask.png", result.densified);
  auto doc = to_json(result);
  doc["token"] = stack.tokens[static_cast<std::size_t>(token_index)];
  doc["token_index"] = token_index;
  doc["source_image"] = image_path.generic_string();
  doc["mask_source"] = mask_source;
  doc["image"] = "image.png";
  doc["mask"] = "densified_mask.png";
  detail::write_text(out_dir / kLocalizationName, doc.dump(2) + "\n");
  doc["command"] = "localize";
  return doc;
}

// ---------------------------------------------------------------- curate

/// Every immediate subdirectory of `dir` holding a localization.json is one
/// candidate, taken in sorted name order. A localization.json that cannot be
/// parsed still yields a candidate (with attention ratio 0) so that curation
/// records it as an io failure instead of silently dropping it.
inline std::vector<CurationCandidate> collect_candidates(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw Error(ErrorCode::io, "candidates directory not found: " + dir.string());
  std::vector<fs::path> subdirs;
  for (const auto& e : fs::directory_iterator(dir)) {
    if (e.is_directory() && fs::exists(e.path() / kLocalizationName)) subdirs.push_back(e.path());
  }
  std::sort(subdirs.begin(), subdirs.end());
  std::vector<CurationCandidate> out;
  for (const auto& d : subdirs) {
    CurationCandidate c{d / "image.png", d / "densified_mask.png", 0.0};
    try {
      const auto doc = detail::read_json(d / kLocalizationName);
      c.attention_ratio = doc.at("attention_ratio").get<double>();
      c.image = d / doc.value("image", std::string("image.png"));
      c.mask = d / doc.value("mask", std::string("densified_mask.png"));
    } catch (const std::exception&) {
      c.mask = d / kLocalizationName;  // guaranteed to fail PNG decoding
    }
    out.push_back(c);
  }
  return out;
}

inline void write_curation_report(const fs::path& report_path, const CurationReport& report) {
  if (report_path.has_parent_path()) fs::create_directories(report_path.parent_path());
  detail::write_text(report_path, to_json(report).dump(2) + "\n");
  auto csv_path = report_path;
  csv_path.replace_extension(".csv");
  detail::write_text(csv_path, to_csv(report));
}

inline nlohmann::json run_curate(const fs::path& candidates_dir, const CurationThresholds& thresholds,
                                 const fs::path& report_path, int jobs = 1, std::ostream* log = nullptr) {
  const auto candidates = collect_candidates(candidates_dir);
  const auto report = curate_batch(candidates, thresholds, jobs, log);
  write_curation_report(report_path, report);
  auto summary = to_json(report)["counts"];
  return {{"command", "curate"}, {"counts", summary}, {"report", report_path.generic_string()}};
}

/// Cutouts of every accepted candidate, in report order.
inline ClassCutouts build_bank(const CurationReport& report, const std::string& class_name, int class_index) {
  ClassCutouts bank{class_name, class_index, {}};
  for (const auto& r : report.records) {
    if (!r.verdict.accepted) continue;
    bank.cutouts.push_back(
        extract_cutout(load_image(r.candidate.image), load_mask(r.candidate.mask), class_index));
  }
  return bank;
}

// ---------------------------------------------------------------- mix

inline nlohmann::json run_mix(const fs::path& manifest_path, const fs::path& bank_dir, double p_m,
                              std::uint64_t seed, const fs::path& out_dir, int jobs = 1,
                              std::ostream* log = nullptr) {
  if (!(p_m >= 0.0 && p_m <= 1.0)) throw Error(ErrorCode::config, "p_m must lie in [0,1]");
  const auto manifest = load_manifest(manifest_path);
  const auto bank = load_bank(bank_dir);
  const auto cfg = MixConfig::from_bank(bank, p_m, seed);
  cfg.validate(manifest.num_classes);
  const auto result = mix_dataset(manifest, bank, cfg, out_dir, jobs, log);
  return {{"command", "mix"},
          {"entries", result.manifest.entries.size()},
          {"mixed_entries", result.mixed_entries()},
          {"num_classes", result.manifest.num_classes},
          {"manifest", (out_dir / "manifest.json").generic_string()}};
}

// ---------------------------------------------------------------- eval

/// Writes report JSON plus `<stem>_per_class.csv` and `<stem>_confusion.csv`
/// next to it.
inline nlohmann::json run_eval(const fs::path& pred_manifest, const fs::path& gt_manifest,
                               int num_classes, const fs::path& report_path, int jobs = 1) {
  if (num_classes < 1 || num_classes > 255) throw Error(ErrorCode::config, "class count must be in [1,255]");
  const auto pred = load_manifest(pred_manifest);
  const auto gt = load_manifest(gt_manifest);
  const auto report = evaluate_dataset(pred, gt, num_classes, jobs);
  if (report_path.has_parent_path()) fs::create_directories(report_path.parent_path());
  const auto doc = to_json(report);
  detail::write_text(report_path, doc.dump(2) + "\n");
  const auto stem = report_path.parent_path() / report_path.stem();
  detail::write_text(stem.string() + "_per_class.csv", per_class_csv(report));
  detail::write_text(stem.string() + "_confusion.csv", confusion_csv(report.confusion));
  return {{"command", "eval"}, {"miou", report.miou}, {"pixel_total", report.confusion.total()},
          {"report", report_path.generic_string()}};
}

// ---------------------------------------------------------------- pipeline

struct NovelClassConfig {
  std::string name;
  int index = 0;
  std::string token;
  fs::path samples_dir;  // one subdirectory per generated sample
};

/// Whole-pipeline configuration, read from TOML. Relative paths resolve
/// against the config file's directory.
struct PipelineConfig {
  std::uint64_t seed = 0;
  fs::path work_dir;
  fs::path manifest;
  double threshold = kDefaultAttentionThreshold;
  CrfParams crf;
  CurationThresholds curation;
  double p_m = 0.5;
  std::vector<NovelClassConfig> classes;
  std::optional<PromptSpec> prompts;
  std::size_t prompt_count = 10;

  void validate() const {
    if (classes.empty()) throw Error(ErrorCode::config, "pipeline config lists no [[classes]]");
    if (!fs::exists(manifest)) throw Error(ErrorCode::config, "manifest not found: " + manifest.string());
    for (const auto& c : classes) {
      if (c.name.empty() || c.token.empty()) throw Error(ErrorCode::config, "class entries need name and token");
      if (!fs::is_directory(c.samples_dir)) {
        throw Error(ErrorCode::config, "samples_dir not found: " + c.samples_dir.string());
      }
    }
    if (!(threshold >= 0.0 && threshold <= 1.0)) throw Error(ErrorCode::config, "threshold must lie in [0,1]");
    if (!(p_m >= 0.0 && p_m <= 1.0)) throw Error(ErrorCode::config, "p_m must lie in [0,1]");
    crf.validate();
    curation.validate();
  }
};

namespace detail {

template <typename T>
void read_number(const toml::table* table, std::string_view key, T& field) {
  if (!table) return;
  const auto* node = table->get(key);
  if (!node) return;
  if (auto v = node->value<double>()) {
    field = static_cast<T>(*v);
  } else {
    throw Error(ErrorCode::config, "config key '" + std::string(key) + "' must be a number");
  }
}

inline fs::path resolve_path(const fs::path& base, const std::string& p) {
  const fs::path path(p);
  return path.is_absolute() ? path : (base / path).lexically_normal();
}

}  // namespace detail

/// Reads the [localize], [crf], [curation] and [mix] sections into the given
/// fields; absent keys keep their current values.
inline void apply_stage_sections(const toml::table& doc, double& threshold, CrfParams& crf_params,
                                 CurationThresholds& curation, double& p_m) {
  const auto* localize = doc["localize"].as_table();
  detail::read_number(localize, "threshold", threshold);

  const auto* crf_table = doc["crf"].as_table();
  detail::read_number(crf_table, "iterations", crf_params.iterations);
  detail::read_number(crf_table, "appearance_weight", crf_params.appearance_weight);
  detail::read_number(crf_table, "appearance_xy_std", crf_params.appearance_xy_std);
  detail::read_number(crf_table, "appearance_rgb_std", crf_params.appearance_rgb_std);
  detail::read_number(crf_table, "smoothness_weight", crf_params.smoothness_weight);
  detail::read_number(crf_table, "smoothness_xy_std", crf_params.smoothness_xy_std);
  detail::read_number(crf_table, "prob_floor", crf_params.prob_floor);
  detail::read_number(crf_table, "prob_ceiling", crf_params.prob_ceiling);

  const auto* cur = doc["curation"].as_table();
  detail::read_number(cur, "pp_min", curation.pp_min);
  detail::read_number(cur, "smooth_min", curation.smooth_min);
  detail::read_number(cur, "energy_max", curation.energy_max);
  detail::read_number(cur, "ratio_max", curation.ratio_max);
  detail::read_number(cur, "min_area", curation.min_area);
  detail::read_number(cur, "smoothing_radius", curation.smoothing_radius);
  detail::read_number(cur, "simplify_epsilon", curation.simplify_epsilon);

  detail::read_number(doc["mix"].as_table(), "p_m", p_m);
}

inline PipelineConfig parse_pipeline_config(const toml::table& doc, const fs::path& base) {
  PipelineConfig cfg;
  cfg.seed = static_cast<std::uint64_t>(doc["seed"].value_or(std::int64_t{0}));
  const auto work = doc["work_dir"].value<std::string>();
  const auto manifest = doc["manifest"].value<std::string>();
  if (!work || !manifest) throw Error(ErrorCode::config, "config needs work_dir and manifest");
  cfg.work_dir = detail::resolve_path(base, *work);
  cfg.manifest = detail::resolve_path(base, *manifest);

  apply_stage_sections(doc, cfg.threshold, cfg.crf, cfg.curation, cfg.p_m);

  if (const auto* prompts = doc["prompts"].as_table()) {
    cfg.prompts = prompt_spec_from_toml(*prompts);
    detail::read_number(prompts, "n", cfg.prompt_count);
  }

  if (const auto* classes = doc["classes"].as_array()) {
    for (const auto& node : *classes) {
      const auto* t = node.as_table();
      if (!t) throw Error(ErrorCode::config, "[[classes]] entries must be tables");
      NovelClassConfig c;
      c.name = (*t)["name"].value_or(std::string{});
      c.index = static_cast<int>((*t)["index"].value_or(std::int64_t{-1}));
      c.token = (*t)["token"].value_or(c.name);
      c.samples_dir = detail::resolve_path(base, (*t)["samples_dir"].value_or(std::string{}));
      cfg.classes.push_back(c);
    }
  }
  return cfg;
}

inline PipelineConfig load_pipeline_config(const fs::path& path) {
  if (!fs::exists(path)) throw Error(ErrorCode::config, "config not found: " + path.string());
  toml::table doc;
  try {
    doc = toml::parse_file(path.string());
  } catch (const toml::parse_error& e) {
    throw Error(ErrorCode::config, "config " + path.string() + ": " + std::string(e.description()));
  }
  auto cfg = parse_pipeline_config(doc, path.parent_path());
  cfg.validate();
  return cfg;
}

struct PipelineOptions {
  bool force = false;
  int jobs = 1;
  std::optional<std::uint64_t> seed;  // overrides the config seed
  std::ostream* log = nullptr;
};

inline const std::vector<std::string>& pipeline_outputs() {
  static const std::vector<std::string> names = {"prompts.jsonl", "localized", "curation", "bank", "mixed"};
  return names;
}

/// localize -> curate -> bank -> mix. Samples whose localization fails are
/// logged and skipped; any other error aborts with a "[stage]" tag. Existing
/// outputs in work_dir are only replaced when `force` is set.
inline nlohmann::json run_pipeline(const PipelineConfig& cfg, const PipelineOptions& options = {}) {
  cfg.validate();
  const auto seed = options.seed.value_or(cfg.seed);
  for (const auto& name : pipeline_outputs()) {
    if (!fs::exists(cfg.work_dir / name)) continue;
    if (!options.force) {
      throw Error(ErrorCode::config, "outputs already exist in " + cfg.work_dir.string() +
                                         " (pass --force to regenerate)");
    }
    fs::remove_all(cfg.work_dir / name);
  }
  fs::create_directories(cfg.work_dir);
  nlohmann::json summary{{"command", "pipeline"}, {"seed", seed}};

  if (cfg.prompts) {
    const auto prompts = generate_prompts(*cfg.prompts, cfg.prompt_count, seed);
    detail::write_text(cfg.work_dir / "prompts.jsonl", to_jsonl(prompts));
    summary["prompts"] = prompts.size();
  }

  DatasetManifest manifest;
  try {
    manifest = load_manifest(cfg.manifest);
  } catch (const Error& e) {
    throw e.tagged("mix");
  }
  MixConfig mix_cfg{cfg.p_m, seed, {}};
  for (const auto& c : cfg.classes) mix_cfg.class_assignments[c.name] = c.index;
  try {
    mix_cfg.validate(manifest.num_classes);
  } catch (const Error& e) {
    throw e.tagged("mix");
  }

  CutoutBank bank;
  summary["classes"] = nlohmann::json::array();
  for (const auto& cls : cfg.classes) {
    const auto localized_dir = cfg.work_dir / "localized" / cls.name;
    std::vector<fs::path> samples;
    for (const auto& e : fs::directory_iterator(cls.samples_dir)) {
      if (e.is_directory()) samples.push_back(e.path());
    }
    std::sort(samples.begin(), samples.end());
    std::size_t localized = 0;
    for (const auto& sample : samples) {
      const auto started = std::chrono::steady_clock::now();
      LocalizeOptions lo{cfg.threshold, cfg.crf, std::nullopt};
      if (fs::exists(sample / "candidate_mask.png")) lo.candidate_mask = sample / "candidate_mask.png";
      try {
        run_localize(sample / "stack", sample / "image.png", cls.token,
                     localized_dir / sample.filename(), lo);
        ++localized;
        if (options.log) {
          *options.log << "localize path=" << sample.string() << " action=localized ms="
                       << std::fixed << std::setprecision(2) << detail::elapsed_ms(started) << "\n";
        }
      } catch (const Error& e) {
        if (e.code() != ErrorCode::localization_failed) throw e.tagged("localize");
        if (options.log) {
          *options.log << "localize path=" << sample.string() << " action=skipped reason=\""
                       << e.what() << "\"\n";
        }
      }
    }

    CurationReport report;
    try {
      const auto candidates = fs::exists(localized_dir) ? collect_candidates(localized_dir)
                                                        : std::vector<CurationCandidate>{};
      report = curate_batch(candidates, cfg.curation, options.jobs, options.log);
      write_curation_report(cfg.work_dir / "curation" / (cls.name + ".json"), report);
    } catch (const Error& e) {
      throw e.tagged("curate");
    }

    try {
      auto class_bank = build_bank(report, cls.name, cls.index);
      save_bank_class(cfg.work_dir / "bank" / cls.name, class_bank);
      summary["classes"].push_back({{"name", cls.name},
                                    {"index", cls.index},
                                    {"samples", samples.size()},
                                    {"localized", localized},
                                    {"accepted", report.accepted()},
                                    {"cutouts", class_bank.cutouts.size()}});
      bank.classes.push_back(std::move(class_bank));
    } catch (const Error& e) {
      throw e.tagged("bank");
    }
  }

  try {
    const auto result = mix_dataset(manifest, bank, mix_cfg, cfg.work_dir / "mixed", options.jobs, options.log);
    summary["mixed_entries"] = result.mixed_entries();
    summary["entries"] = result.manifest.entries.size();
    summary["num_classes"] = result.manifest.num_classes;
    summary["manifest"] = (cfg.work_dir / "mixed" / "manifest.json").generic_string();
  } catch (const Error& e) {
    throw e.tagged("mix");
  }
  return summary;
}

}  // namespace novelseg
