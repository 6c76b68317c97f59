#pragma once

#include <json.hpp>

#include <algorithm>
#include <cstdint>
#include <iomanip>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "novelseg/manifest.hpp"
#include "novelseg/parallel.hpp"

namespace novelseg {

/// Pixel counts with rows = ground truth, columns = prediction. Predictions of
/// the ignore value on valid ground truth are kept in `missed` (they are false
/// negatives for the ground-truth class but not false positives for anyone).
class ConfusionMatrix {
 public:
  explicit ConfusionMatrix(int num_classes, std::uint8_t ignore_index = kDefaultIgnoreIndex)
      : num_classes_(num_classes), ignore_index_(ignore_index) {
    if (num_classes < 1 || num_classes > 255) {
      throw Error(ErrorCode::invalid_argument, "confusion matrix needs 1..255 classes");
    }
    counts_.assign(static_cast<std::size_t>(num_classes) * num_classes, 0);
    missed_.assign(static_cast<std::size_t>(num_classes), 0);
  }

  int num_classes() const { return num_classes_; }
  std::uint8_t ignore_index() const { return ignore_index_; }

  std::uint64_t count(int gt, int pred) const {
    return counts_[static_cast<std::size_t>(gt) * num_classes_ + pred];
  }
  std::uint64_t missed(int gt) const { return missed_[static_cast<std::size_t>(gt)]; }

  std::uint64_t total() const {
    std::uint64_t t = 0;
    for (auto c : counts_) t += c;
    for (auto c : missed_) t += c;
    return t;
  }

  void update(const LabelRaster& pred, const LabelRaster& gt) {
    if (!pred.same_shape(gt)) {
      throw Error(ErrorCode::validation, "prediction and ground truth differ in size");
    }
    for (std::size_t i = 0; i < gt.size(); ++i) {
      const int g = gt[i];
      if (g == ignore_index_) continue;
      const int p = pred[i];
      if (g >= num_classes_) {
        throw Error(ErrorCode::validation, "ground-truth label " + std::to_string(g) + " out of range");
      }
      if (p == ignore_index_) {
        ++missed_[static_cast<std::size_t>(g)];
        continue;
      }
      if (p >= num_classes_) {
        throw Error(ErrorCode::validation, "predicted label " + std::to_string(p) + " out of range");
      }
      ++counts_[static_cast<std::size_t>(g) * num_classes_ + p];
    }
  }

  ConfusionMatrix& operator+=(const ConfusionMatrix& other) {
    if (other.num_classes_ != num_classes_) {
      throw Error(ErrorCode::invalid_argument, "cannot merge confusion matrices of different size");
    }
    for (std::size_t i = 0; i < counts_.size(); ++i) counts_[i] += other.counts_[i];
    for (std::size_t i = 0; i < missed_.size(); ++i) missed_[i] += other.missed_[i];
    return *this;
  }

  friend bool operator==(const ConfusionMatrix&, const ConfusionMatrix&) = default;

  /// Builds a matrix directly from a count table (rows = ground truth).
  static ConfusionMatrix from_counts(const std::vector<std::vector<std::uint64_t>>& table) {
    ConfusionMatrix cm(static_cast<int>(table.size()));
    for (std::size_t g = 0; g < table.size(); ++g) {
      if (table[g].size() != table.size()) throw Error(ErrorCode::invalid_argument, "table must be square");
      for (std::size_t p = 0; p < table.size(); ++p) cm.counts_[g * table.size() + p] = table[g][p];
    }
    return cm;
  }

 private:
  int num_classes_;
  std::uint8_t ignore_index_;
  std::vector<std::uint64_t> counts_;
  std::vector<std::uint64_t> missed_;
};

struct ClassIou {
  int class_index = 0;
  std::uint64_t tp = 0;
  std::uint64_t fp = 0;
  std::uint64_t fn = 0;
  std::optional<double> iou;  // undefined when tp + fp + fn == 0
};

/// IoU = TP / (TP + FP + FN) per class.
inline std::vector<ClassIou> per_class_iou(const ConfusionMatrix& cm) {
  const int c_count = cm.num_classes();
  std::vector<ClassIou> out(static_cast<std::size_t>(c_count));
  for (int c = 0; c < c_count; ++c) {
    auto& r = out[static_cast<std::size_t>(c)];
    r.class_index = c;
    r.tp = cm.count(c, c);
    r.fn = cm.missed(c);
    for (int k = 0; k < c_count; ++k) {
      if (k == c) continue;
      r.fp += cm.count(k, c);
      r.fn += cm.count(c, k);
    }
    const auto denom = r.tp + r.fp + r.fn;
    if (denom > 0) r.iou = double(r.tp) / double(denom);
  }
  return out;
}

/// Unweighted mean over defined IoUs, optionally restricted to `subset`.
inline double miou(const ConfusionMatrix& cm, const std::vector<int>& subset = {}) {
  const auto ious = per_class_iou(cm);
  double sum = 0.0;
  std::size_t n = 0;
  for (const auto& r : ious) {
    if (!subset.empty() && std::find(subset.begin(), subset.end(), r.class_index) == subset.end()) continue;
    if (!r.iou) continue;
    sum += *r.iou;
    ++n;
  }
  if (n == 0) throw Error(ErrorCode::validation, "mIoU undefined: no class has pixels");
  return sum / double(n);
}

struct EvaluationReport {
  ConfusionMatrix confusion;
  std::vector<ClassIou> per_class;
  double miou = 0.0;
  std::vector<std::string> class_names;
};

/// Accumulates one confusion matrix over paired manifests (label rasters of
/// `pred` are predictions). Per-entry matrices are merged by addition, so the
/// result is independent of `jobs`.
inline EvaluationReport evaluate_dataset(const DatasetManifest& pred, const DatasetManifest& gt,
                                         int num_classes, int jobs = 1) {
  if (gt.entries.empty()) throw Error(ErrorCode::validation, "evaluation manifest is empty");
  if (pred.entries.size() != gt.entries.size()) {
    throw Error(ErrorCode::validation, "prediction manifest has " + std::to_string(pred.entries.size()) +
                                           " entries, ground truth has " +
                                           std::to_string(gt.entries.size()));
  }
  std::vector<ConfusionMatrix> partial(gt.entries.size(), ConfusionMatrix(num_classes, gt.ignore_index));
  parallel_for(gt.entries.size(), jobs, [&](std::size_t i) {
    const auto p = load_labels(pred.entries[i].label, gt.ignore_index);
    const auto g = load_labels(gt.entries[i].label, gt.ignore_index);
    try {
      partial[i].update(p, g);
    } catch (const Error& e) {
      throw Error(e.code(), "entry " + std::to_string(i) + " (" + gt.entries[i].label.string() + "): " + e.what());
    }
  });
  EvaluationReport report{ConfusionMatrix(num_classes, gt.ignore_index), {}, 0.0, gt.class_names};
  for (const auto& m : partial) report.confusion += m;
  report.per_class = per_class_iou(report.confusion);
  report.miou = miou(report.confusion);
  return report;
}

inline nlohmann::json to_json(const EvaluationReport& r) {
  nlohmann::json doc;
  doc["per_class"] = nlohmann::json::array();
  for (const auto& c : r.per_class) {
    nlohmann::json row{{"class", c.class_index}, {"tp", c.tp}, {"fp", c.fp}, {"fn", c.fn}};
    if (static_cast<std::size_t>(c.class_index) < r.class_names.size()) {
      row["name"] = r.class_names[static_cast<std::size_t>(c.class_index)];
    }
    row["iou"] = c.iou ? nlohmann::json(*c.iou) : nlohmann::json(nullptr);
    doc["per_class"].push_back(row);
  }
  doc["miou"] = r.miou;
  doc["pixel_total"] = r.confusion.total();
  return doc;
}

inline std::string per_class_csv(const EvaluationReport& r) {
  std::ostringstream out;
  out << std::setprecision(10) << "class,name,tp,fp,fn,iou\n";
  for (const auto& c : r.per_class) {
    const auto idx = static_cast<std::size_t>(c.class_index);
    out << c.class_index << ',' << (idx < r.class_names.size() ? r.class_names[idx] : "") << ','
        << c.tp << ',' << c.fp << ',' << c.fn << ',';
    if (c.iou) out << *c.iou;
    out << '\n';
  }
  return out.str();
}

/// Square count table, header row of prediction indices, first column ground truth.
inline std::string confusion_csv(const ConfusionMatrix& cm) {
  std::ostringstream out;
  out << "gt\\pred";
  for (int p = 0; p < cm.num_classes(); ++p) out << ',' << p;
  out << ",ignore\n";
  for (int g = 0; g < cm.num_classes(); ++g) {
    out << g;
    for (int p = 0; p < cm.num_classes(); ++p) out << ',' << cm.count(g, p);
    out << ',' << cm.missed(g) << '\n';
  }
  return out.str();
}

}  // namespace novelseg
