#pragma once

// Overlap scores of predicted masks against ground truth and the
// across-method comparison (ANOVA, Bonferroni, eta squared, Tukey letters).

#include <array>
#include <cmath>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "calfweight/error.hpp"
#include "calfweight/imgcore.hpp"
#include "calfweight/ingest.hpp"
#include "calfweight/stats.hpp"

namespace calfweight {

struct SegScores {
  double iou = 0;
  double dice = 0;
  double pixel_accuracy = 0;

  [[nodiscard]] double get(std::size_t metric) const { return metric == 0 ? iou : metric == 1 ? dice : pixel_accuracy; }
  friend bool operator==(const SegScores&, const SegScores&) = default;
};

inline constexpr std::array<std::string_view, 3> kSegMetricNames{"iou", "dice", "pixel_accuracy"};

inline SegScores score_masks(const BinaryMask& pred, const BinaryMask& truth) {
  if (pred.width() != truth.width() || pred.height() != truth.height()) {
    fail(ErrorKind::ShapeError, "predicted and truth masks differ in size");
  }
  const auto p = pred.bits(), t = truth.bits();
  std::size_t inter = 0, np = 0, nt = 0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    np += p[i];
    nt += t[i];
    inter += p[i] & t[i];
  }
  const std::size_t uni = np + nt - inter;
  const double total = static_cast<double>(p.size());
  SegScores s;
  s.pixel_accuracy = (total - static_cast<double>(uni) + static_cast<double>(inter)) / total;
  if (uni == 0) {
    s.iou = s.dice = 1.0;
  } else {
    s.iou = static_cast<double>(inter) / static_cast<double>(uni);
    s.dice = 2.0 * static_cast<double>(inter) / static_cast<double>(np + nt);
  }
  return s;
}

struct MethodScores {
  std::string name;
  std::vector<SegScores> scores;  ///< frames where the method produced a mask
  std::size_t attempted = 0;      ///< frames submitted, including failures
};

struct MetricComparison {
  std::vector<double> mean;  ///< per method
  std::vector<double> sd;
  std::optional<AnovaResult> anova;  ///< absent when the data carry no variance
  double p = std::numeric_limits<double>::quiet_NaN();
  double p_adj = std::numeric_limits<double>::quiet_NaN();
  double eta2 = std::numeric_limits<double>::quiet_NaN();
  std::vector<std::string> letters;
};

struct MethodComparison {
  std::vector<std::string> methods;
  std::vector<std::size_t> n;
  std::vector<double> success_pct;
  std::array<MetricComparison, 3> metrics;
};

/// Per-metric one-way comparison across methods. A metric whose scores are
/// all identical reports p = 1, eta² = 0 and one shared letter.
inline MethodComparison compare_methods(const std::vector<MethodScores>& methods, double alpha = 0.05,
                                        double family = 3) {
  if (methods.size() < 2) fail(ErrorKind::InsufficientGroups, "need at least 2 methods");
  MethodComparison out;
  for (const auto& m : methods) {
    if (m.scores.size() < 2) fail(ErrorKind::InsufficientGroups, "method has fewer than 2 scored frames", m.name);
    out.methods.push_back(m.name);
    out.n.push_back(m.scores.size());
    const std::size_t attempted = std::max(m.attempted, m.scores.size());
    out.success_pct.push_back(100.0 * static_cast<double>(m.scores.size()) / static_cast<double>(attempted));
  }
  for (std::size_t k = 0; k < 3; ++k) {
    std::vector<std::vector<double>> groups;
    for (const auto& m : methods) {
      std::vector<double> v;
      for (const auto& s : m.scores) v.push_back(s.get(k));
      groups.push_back(std::move(v));
    }
    MetricComparison& mc = out.metrics[k];
    for (const auto& g : groups) {
      mc.mean.push_back(mean_of(g));
      mc.sd.push_back(sd_of(g));
    }
    auto c = compare_groups(groups, alpha, family);
    mc.anova = c.anova;
    mc.p = c.p;
    mc.p_adj = c.p_adj;
    mc.eta2 = c.eta2;
    mc.letters = std::move(c.letters);
  }
  return out;
}

/// Body of segeval_report.csv: one row per method.
inline std::string format_segeval_report(const MethodComparison& c) {
  std::string out = "method,n,success_pct";
  for (auto name : kSegMetricNames) {
    const std::string n(name);
    out += "," + n + "_mean," + n + "_sd," + n + "_letters," + n + "_p," + n + "_p_adj," + n + "_eta2";
  }
  out += '\n';
  auto num = [](double v) { return std::isnan(v) ? std::string("NA") : text::format_double(v); };
  for (std::size_t i = 0; i < c.methods.size(); ++i) {
    out += c.methods[i] + ',' + std::to_string(c.n[i]) + ',' + num(c.success_pct[i]);
    for (const auto& m : c.metrics) {
      out += ',' + num(m.mean[i]) + ',' + num(m.sd[i]) + ',' + m.letters[i] + ',' + num(m.p) + ',' + num(m.p_adj) + ',' +
             num(m.eta2);
    }
    out += '\n';
  }
  return out;
}

}  // namespace calfweight
