// novelseg: batch front end for prompt generation, localization, curation,
// mixing and evaluation. Machine-readable summaries go to stdout, one log line
// per processed item to stderr.

#include <CLI11.hpp>

#include <cstdint>
#include <iostream>
#include <optional>
#include <string>

#include "novelseg/novelseg.hpp"

namespace {

using namespace novelseg;

struct GlobalFlags {
  std::optional<std::uint64_t> seed;
  int jobs = 1;
  std::string config;
  bool force = false;
};

struct StageDefaults {
  double threshold = kDefaultAttentionThreshold;
  CrfParams crf;
  CurationThresholds curation;
  double p_m = 0.5;
  std::uint64_t seed = 0;
};

StageDefaults stage_defaults(const GlobalFlags& g) {
  StageDefaults d;
  if (!g.config.empty()) {
    if (!fs::exists(g.config)) throw Error(ErrorCode::config, "config not found: " + g.config);
    toml::table doc;
    try {
      doc = toml::parse_file(g.config);
    } catch (const toml::parse_error& e) {
      throw Error(ErrorCode::config, "config " + g.config + ": " + std::string(e.description()));
    }
    apply_stage_sections(doc, d.threshold, d.crf, d.curation, d.p_m);
    d.seed = static_cast<std::uint64_t>(doc["seed"].value_or(std::int64_t{0}));
  }
  if (g.seed) d.seed = *g.seed;
  return d;
}

// Optional overrides that only apply when given on the command line.
template <typename T>
void override_with(const std::optional<T>& flag, T& field) {
  if (flag) field = *flag;
}

int run(int argc, char** argv) {
  CLI::App app{"Novel-class cutout mining and dataset mixing"};
  app.require_subcommand(1);
  GlobalFlags g;
  app.add_option("--seed", g.seed, "Seed for all randomized steps")->group("Global");
  app.add_option("--jobs", g.jobs, "Worker threads for batch commands")
      ->check(CLI::PositiveNumber)
      ->group("Global");
  app.add_option("--config", g.config, "TOML file supplying stage parameters")->group("Global");
  app.add_flag("--force", g.force, "Replace existing outputs")->group("Global");

  // prompts
  auto* prompts = app.add_subcommand("prompts", "Sample text prompts from a prompt spec");
  std::string spec_path, prompts_out;
  std::size_t prompt_count = 10;
  prompts->add_option("spec", spec_path, "Prompt spec (TOML)")->required();
  prompts->add_option("out", prompts_out, "Output JSONL")->required();
  prompts->add_option("-n,--count", prompt_count, "Number of prompts")->check(CLI::PositiveNumber);

  // localize
  auto* loc = app.add_subcommand("localize", "Aggregate attention, threshold, densify");
  std::string stack_dir, image_path, token, loc_out, candidate_mask;
  std::optional<double> t_th;
  std::optional<int> crf_iterations;
  loc->add_option("stack_dir", stack_dir, "Attention stack directory")->required();
  loc->add_option("image", image_path, "Generated image (PNG)")->required();
  loc->add_option("token", token, "Class token text or index")->required();
  loc->add_option("out_dir", loc_out, "Output directory")->required();
  loc->add_option("--threshold", t_th, "Attention threshold");
  loc->add_option("--crf-iterations", crf_iterations, "Mean-field iterations");
  loc->add_option("--candidate-mask", candidate_mask, "External mask replacing the densified mask");

  // curate
  auto* cur = app.add_subcommand("curate", "Filter candidate masks by shape metrics");
  std::string candidates_dir, report_path;
  std::optional<double> pp_min, smooth_min, energy_max, ratio_max;
  std::optional<std::size_t> min_area;
  cur->add_option("candidates_dir", candidates_dir, "Directory of localized candidates")->required();
  cur->add_option("report", report_path, "Report JSON path (CSV written alongside)")->required();
  cur->add_option("--pp-min", pp_min);
  cur->add_option("--smooth-min", smooth_min);
  cur->add_option("--energy-max", energy_max);
  cur->add_option("--ratio-max", ratio_max);
  cur->add_option("--min-area", min_area);

  // mix
  auto* mix = app.add_subcommand("mix", "Paste bank cutouts into a labelled dataset");
  std::string manifest_path, bank_dir, mix_out;
  std::optional<double> p_m;
  mix->add_option("manifest", manifest_path, "Source dataset manifest")->required();
  mix->add_option("bank_dir", bank_dir, "Cutout bank directory")->required();
  mix->add_option("out_dir", mix_out, "Output directory")->required();
  mix->add_option("--p-m", p_m, "Mixing probability");

  // eval
  auto* ev = app.add_subcommand("eval", "Confusion matrix and IoU report");
  std::string pred_manifest, gt_manifest, eval_report;
  int num_classes = 0;
  ev->add_option("pred_manifest", pred_manifest, "Prediction manifest")->required();
  ev->add_option("gt_manifest", gt_manifest, "Ground-truth manifest")->required();
  ev->add_option("num_classes", num_classes, "Class count C")->required();
  ev->add_option("report", eval_report, "Report JSON path")->required();

  // pipeline
  auto* pipe = app.add_subcommand("pipeline", "localize, curate, bank, mix from one config");
  std::string pipeline_config;
  pipe->add_option("config_file", pipeline_config, "Pipeline TOML (defaults to --config)");

  for (auto* sub : {prompts, loc, cur, mix, ev, pipe}) sub->fallthrough();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  try {
    nlohmann::json summary;
    if (*prompts) {
      const auto d = stage_defaults(g);
      summary = run_prompts(spec_path, prompt_count, d.seed, prompts_out);
    } else if (*loc) {
      auto d = stage_defaults(g);
      override_with(t_th, d.threshold);
      override_with(crf_iterations, d.crf.iterations);
      LocalizeOptions options{d.threshold, d.crf, std::nullopt};
      if (!candidate_mask.empty()) options.candidate_mask = fs::path(candidate_mask);
      summary = run_localize(stack_dir, image_path, token, loc_out, options);
    } else if (*cur) {
      auto d = stage_defaults(g);
      override_with(pp_min, d.curation.pp_min);
      override_with(smooth_min, d.curation.smooth_min);
      override_with(energy_max, d.curation.energy_max);
      override_with(ratio_max, d.curation.ratio_max);
      override_with(min_area, d.curation.min_area);
      d.curation.validate();
      summary = run_curate(candidates_dir, d.curation, report_path, g.jobs, &std::cerr);
    } else if (*mix) {
      auto d = stage_defaults(g);
      override_with(p_m, d.p_m);
      if (fs::exists(fs::path(mix_out) / "manifest.json") && !g.force) {
        throw Error(ErrorCode::config, "output already exists in " + mix_out + " (pass --force)");
      }
      summary = run_mix(manifest_path, bank_dir, d.p_m, d.seed, mix_out, g.jobs, &std::cerr);
    } else if (*ev) {
      summary = run_eval(pred_manifest, gt_manifest, num_classes, eval_report, g.jobs);
    } else if (*pipe) {
      const auto path = !pipeline_config.empty() ? pipeline_config : g.config;
      if (path.empty()) throw Error(ErrorCode::config, "pipeline needs a config file");
      const auto cfg = load_pipeline_config(path);
      summary = run_pipeline(cfg, {g.force, g.jobs, g.seed, &std::cerr});
    }
    std::cout << summary.dump() << "\n";
    return 0;
  } catch (const Error& e) {
    std::cerr << "error (" << to_string(e.code()) << "): " << e.what() << "\n";
    return exit_code_for(e.code());
  } catch (const fs::filesystem_error& e) {
    std::cerr << "error (io): " << e.what() << "\n";
    return 1;
  }
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run(argc, argv);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
