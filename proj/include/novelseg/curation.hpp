#pragma once

// Mask-quality gauntlet for generated object masks. A candidate is checked in
// a fixed order and rejected at the first failing stage:
//
//   area            area(mask) >= min_area
//   ratio           attention_ratio <= ratio_max
//   polsby_popper   4*pi*A / P^2 > pp_min
//   smoothness      P / P_smoothed >= smooth_min
//   energy          sum of |turning angle| on the simplified contour < energy_max
//
// Shape metrics are measured on the largest 8-connected component's outer
// contour; holes are ignored.

#include <json.hpp>

#include <array>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <iomanip>
#include <mutex>
#include <numbers>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "novelseg/contour.hpp"
#include "novelseg/morphology.hpp"
#include "novelseg/parallel.hpp"
#include "novelseg/png_io.hpp"

namespace novelseg {

struct CurationThresholds {
  double pp_min = 0.6;
  double smooth_min = 1.0;
  double energy_max = 50.0;  // radians
  double ratio_max = 0.4;
  std::size_t min_area = 16;
  int smoothing_radius = kDefaultSmoothingRadius;
  double simplify_epsilon = 2.0;

  void validate() const {
    if (!(pp_min > 0) || !(smooth_min > 0) || !(energy_max > 0) || min_area < 1) {
      throw Error(ErrorCode::config, "curation thresholds must be positive");
    }
    if (!(ratio_max > 0 && ratio_max <= 1)) {
      throw Error(ErrorCode::config, "ratio_max must lie in (0, 1]");
    }
    if (smoothing_radius < 1) throw Error(ErrorCode::config, "smoothing_radius must be >= 1");
    if (!(simplify_epsilon >= 0)) throw Error(ErrorCode::config, "simplify_epsilon must be >= 0");
  }
};

enum class CurationStage { none, io, area, ratio, polsby_popper, smoothness, energy };

inline constexpr std::array<CurationStage, 6> kRejectionStages = {
    CurationStage::io,           CurationStage::area,       CurationStage::ratio,
    CurationStage::polsby_popper, CurationStage::smoothness, CurationStage::energy};

inline std::string_view to_string(CurationStage stage) {
  switch (stage) {
    case CurationStage::none: return "none";
    case CurationStage::io: return "io";
    case CurationStage::area: return "area";
    case CurationStage::ratio: return "ratio";
    case CurationStage::polsby_popper: return "polsby_popper";
    case CurationStage::smoothness: return "smoothness";
    case CurationStage::energy: return "energy";
  }
  return "unknown";
}

struct CurationVerdict {
  bool accepted = false;
  CurationStage failed_stage = CurationStage::none;
  std::optional<std::size_t> area;
  std::optional<double> attention_ratio;
  std::optional<double> pp;
  std::optional<double> s;
  std::optional<double> e_p;
  std::string detail;  // diagnostic for io failures and degenerate geometry

  friend bool operator==(const CurationVerdict&, const CurationVerdict&) = default;
};

/// 4*pi*A/P^2 of the largest component. Throws degenerate_geometry when the
/// mask is empty or its contour has zero length.
inline double polsby_popper(const BinaryMask& mask) {
  const auto comps = label_components(mask);
  if (comps.count() == 0) throw Error(ErrorCode::degenerate_geometry, "polsby_popper of empty mask");
  const auto label = comps.largest();
  const auto idx = static_cast<std::size_t>(label - 1);
  const auto contour = trace_outer(component_mask(comps, label), comps.first_pixel[idx]);
  const double p = perimeter(contour);
  if (p <= 0.0) throw Error(ErrorCode::degenerate_geometry, "polsby_popper: zero perimeter");
  return 4.0 * std::numbers::pi * static_cast<double>(comps.sizes[idx]) / (p * p);
}

/// P(mask) / P(smooth_mask(mask)); nullopt when smoothing erases the mask or
/// leaves a zero-length contour.
inline std::optional<double> smoothness(const BinaryMask& mask,
                                        int radius = kDefaultSmoothingRadius) {
  const auto raw = largest_outer_contour(mask);
  const auto smoothed = largest_outer_contour(smooth_mask(mask, radius));
  if (!raw || !smoothed) return std::nullopt;
  const double ps = perimeter(*smoothed);
  if (ps <= 0.0) return std::nullopt;
  return perimeter(*raw) / ps;
}

/// Sum over all vertices of the closed polygon of |change in segment
/// direction|, each change wrapped into (-pi, pi]. Returns 0 for fewer than 3
/// vertices.
inline double turning_energy(const Contour& polygon) {
  const auto& v = polygon.points;
  const std::size_t n = v.size();
  if (n < 3) return 0.0;
  std::vector<double> heading(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto& a = v[i];
    const auto& b = v[(i + 1) % n];
    heading[i] = std::atan2(double(b.y - a.y), double(b.x - a.x));
  }
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    double d = heading[(i + 1) % n] - heading[i];
    while (d > std::numbers::pi) d -= 2 * std::numbers::pi;
    while (d <= -std::numbers::pi) d += 2 * std::numbers::pi;
    total += std::abs(d);
  }
  return total;
}

/// Angular energy of the largest component's outer contour after
/// Douglas-Peucker simplification with the given epsilon.
inline double angular_energy(const BinaryMask& mask, double epsilon = 2.0) {
  const auto contour = largest_outer_contour(mask);
  if (!contour) return 0.0;
  return turning_energy(simplify(*contour, epsilon));
}

inline CurationVerdict curate(const BinaryMask& mask, double attention_ratio,
                              const CurationThresholds& t) {
  if (!(attention_ratio >= 0.0 && attention_ratio <= 1.0)) {
    throw Error(ErrorCode::invalid_argument, "attention_ratio must lie in [0,1]");
  }
  CurationVerdict v;
  auto reject = [&](CurationStage stage) {
    v.accepted = false;
    v.failed_stage = stage;
    return v;
  };

  v.area = area(mask);
  if (*v.area < t.min_area) return reject(CurationStage::area);

  v.attention_ratio = attention_ratio;
  if (attention_ratio > t.ratio_max) return reject(CurationStage::ratio);

  try {
    v.pp = polsby_popper(mask);
  } catch (const Error& e) {
    if (e.code() != ErrorCode::degenerate_geometry) throw;
    v.detail = e.what();
    return reject(CurationStage::polsby_popper);
  }
  if (!(*v.pp > t.pp_min)) return reject(CurationStage::polsby_popper);

  v.s = smoothness(mask, t.smoothing_radius);
  if (!v.s) {
    v.detail = "smoothing erased the mask";
    return reject(CurationStage::smoothness);
  }
  if (*v.s < t.smooth_min) return reject(CurationStage::smoothness);

  v.e_p = angular_energy(mask, t.simplify_epsilon);
  if (!(*v.e_p < t.energy_max)) return reject(CurationStage::energy);

  v.accepted = true;
  v.failed_stage = CurationStage::none;
  return v;
}

struct CurationCandidate {
  fs::path image;
  fs::path mask;
  double attention_ratio = 0.0;
};

struct CurationRecord {
  CurationCandidate candidate;
  CurationVerdict verdict;
};

struct CurationReport {
  CurationThresholds thresholds;
  std::vector<CurationRecord> records;

  std::size_t accepted() const {
    std::size_t n = 0;
    for (const auto& r : records) n += r.verdict.accepted ? 1 : 0;
    return n;
  }
  std::size_t rejected_at(CurationStage stage) const {
    std::size_t n = 0;
    for (const auto& r : records) n += (!r.verdict.accepted && r.verdict.failed_stage == stage) ? 1 : 0;
    return n;
  }
};

/// Loads and curates every candidate. Unreadable or mismatched files become
/// io verdicts. Records keep input order regardless of `jobs`.
inline CurationReport curate_batch(const std::vector<CurationCandidate>& candidates,
                                   const CurationThresholds& thresholds, int jobs = 1,
                                   std::ostream* log = nullptr) {
  thresholds.validate();
  CurationReport report{thresholds, std::vector<CurationRecord>(candidates.size())};
  std::mutex log_mutex;
  parallel_for(candidates.size(), jobs, [&](std::size_t i) {
    const auto started = std::chrono::steady_clock::now();
    auto& record = report.records[i];
    record.candidate = candidates[i];
    try {
      const auto image = load_image(candidates[i].image);
      const auto mask = load_mask(candidates[i].mask);
      if (!image.same_shape(mask)) {
        throw Error(ErrorCode::validation, "image and mask differ in size");
      }
      record.verdict = curate(mask, candidates[i].attention_ratio, thresholds);
    } catch (const Error& e) {
      record.verdict = CurationVerdict{};
      record.verdict.failed_stage = CurationStage::io;
      record.verdict.detail = e.what();
    }
    if (log) {
      const auto ms = std::chrono::duration<double, std::milli>(
                          std::chrono::steady_clock::now() - started).count();
      std::lock_guard lock(log_mutex);
      *log << "curate path=" << candidates[i].mask.string()
           << " verdict=" << (record.verdict.accepted ? "accepted" : "rejected")
           << " stage=" << to_string(record.verdict.failed_stage) << " ms=" << std::fixed
           << std::setprecision(2) << ms << "\n";
    }
  });
  return report;
}

inline nlohmann::json to_json(const CurationThresholds& t) {
  return {{"pp_min", t.pp_min},
          {"smooth_min", t.smooth_min},
          {"energy_max", t.energy_max},
          {"energy_unit", "radians (simplified contour, epsilon px = " +
                              std::to_string(t.simplify_epsilon) + ")"},
          {"ratio_max", t.ratio_max},
          {"min_area", t.min_area},
          {"smoothing_radius", t.smoothing_radius},
          {"simplify_epsilon", t.simplify_epsilon}};
}

inline nlohmann::json to_json(const CurationReport& report) {
  nlohmann::json doc;
  doc["thresholds"] = to_json(report.thresholds);
  nlohmann::json counts;
  counts["total"] = report.records.size();
  counts["accepted"] = report.accepted();
  for (auto stage : kRejectionStages) counts[std::string(to_string(stage))] = report.rejected_at(stage);
  doc["counts"] = counts;
  doc["candidates"] = nlohmann::json::array();
  for (const auto& r : report.records) {
    nlohmann::json metrics = nlohmann::json::object();
    if (r.verdict.area) metrics["area"] = *r.verdict.area;
    if (r.verdict.attention_ratio) metrics["attention_ratio"] = *r.verdict.attention_ratio;
    if (r.verdict.pp) metrics["pp"] = *r.verdict.pp;
    if (r.verdict.s) metrics["s"] = *r.verdict.s;
    if (r.verdict.e_p) metrics["e_p"] = *r.verdict.e_p;
    nlohmann::json rec{{"image", r.candidate.image.generic_string()},
                       {"mask", r.candidate.mask.generic_string()},
                       {"attention_ratio_input", r.candidate.attention_ratio},
                       {"accepted", r.verdict.accepted},
                       {"failed_stage", to_string(r.verdict.failed_stage)},
                       {"metrics", metrics}};
    if (!r.verdict.detail.empty()) rec["detail"] = r.verdict.detail;
    doc["candidates"].push_back(rec);
  }
  return doc;
}

/// One row per candidate; absent metrics are empty cells.
inline std::string to_csv(const CurationReport& report) {
  std::ostringstream out;
  out << std::setprecision(10);
  out << "image,mask,accepted,failed_stage,area,attention_ratio,pp,s,e_p\n";
  auto cell = [&](const auto& opt) {
    if (opt) out << *opt;
  };
  for (const auto& r : report.records) {
    out << '"' << r.candidate.image.generic_string() << "\",\"" << r.candidate.mask.generic_string()
        << "\"," << (r.verdict.accepted ? 1 : 0) << ',' << to_string(r.verdict.failed_stage) << ',';
    cell(r.verdict.area);
    out << ',';
    cell(r.verdict.attention_ratio);
    out << ',';
    cell(r.verdict.pp);
    out << ',';
    cell(r.verdict.s);
    out << ',';
    cell(r.verdict.e_p);
    out << '\n';
  }
  return out.str();
}

}  // namespace novelseg
