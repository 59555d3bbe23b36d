#pragma once

// Regression scores, leakage-safe splits (calf-grouped folds, per-calf
// chronological splits) and the repeated evaluation drivers behind the
// cross-validation and longitudinal report tables.

#include <Eigen/Dense>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "calfweight/bodymetrics.hpp"
#include "calfweight/error.hpp"
#include "calfweight/ingest.hpp"
#include "calfweight/models.hpp"
#include "calfweight/parallel.hpp"
#include "calfweight/rng.hpp"
#include "calfweight/stats.hpp"

namespace calfweight {

struct RegMetrics {
  double r2 = 0;
  double mse = 0;   ///< lb²
  double rmse = 0;  ///< lb
  double mae = 0;   ///< lb
  double mape = 0;  ///< percent

  [[nodiscard]] double get(std::size_t k) const {
    switch (k) {
      case 0: return r2;
      case 1: return mse;
      case 2: return rmse;
      case 3: return mae;
      default: return mape;
    }
  }
  friend bool operator==(const RegMetrics&, const RegMetrics&) = default;
};

inline constexpr std::array<std::string_view, 5> kRegMetricNames{"r2", "mse", "rmse", "mae", "mape"};

inline RegMetrics reg_metrics(const Eigen::VectorXd& y, const Eigen::VectorXd& yhat) {
  if (y.size() != yhat.size()) fail(ErrorKind::ShapeError, "targets and predictions differ in length");
  if (y.size() < 2) fail(ErrorKind::InsufficientRows, "regression scores need at least 2 rows");
  if ((y.array() <= 0).any()) fail(ErrorKind::InvalidTarget, "targets must be positive for MAPE");
  const double n = static_cast<double>(y.size());
  const double sst = (y.array() - y.mean()).square().sum();
  if (!(sst > 0)) fail(ErrorKind::DegenerateTarget, "targets have zero variance");
  const Eigen::ArrayXd e = (y - yhat).array();
  RegMetrics m;
  const double sse = e.square().sum();
  m.r2 = 1 - sse / sst;
  m.mse = sse / n;
  m.rmse = std::sqrt(m.mse);
  m.mae = e.abs().sum() / n;
  m.mape = 100 * (e.abs() / y.array()).sum() / n;
  return m;
}

struct SplitPlan {
  std::vector<std::size_t> train_idx;
  std::vector<std::size_t> test_idx;

  friend bool operator==(const SplitPlan&, const SplitPlan&) = default;
};

/// Calves shuffled by seed and dealt round-robin into k folds; plan f tests
/// fold f. Row indices keep their input order.
inline std::vector<SplitPlan> grouped_kfold(const std::vector<std::string>& calf_ids, int k, std::uint64_t seed) {
  if (k < 2) fail(ErrorKind::InvalidK, "k must be >= 2");
  const std::set<std::string> distinct(calf_ids.begin(), calf_ids.end());
  std::vector<std::string> calves(distinct.begin(), distinct.end());
  if (calves.size() < static_cast<std::size_t>(k)) {
    fail(ErrorKind::InsufficientGroups, std::to_string(calves.size()) + " calves cannot fill " + std::to_string(k) + " folds");
  }
  Rng rng(seed);
  rng.shuffle(calves);
  std::map<std::string, std::size_t> fold;
  for (std::size_t i = 0; i < calves.size(); ++i) fold[calves[i]] = i % static_cast<std::size_t>(k);
  std::vector<SplitPlan> plans(static_cast<std::size_t>(k));
  for (std::size_t i = 0; i < calf_ids.size(); ++i) {
    const std::size_t f = fold[calf_ids[i]];
    for (std::size_t p = 0; p < plans.size(); ++p) (p == f ? plans[p].test_idx : plans[p].train_idx).push_back(i);
  }
  return plans;
}

/// Per calf: the earliest clamp(floor(n·ratio/100), 1, n−1) observations of
/// `keep` train and the rest test. Every train date must precede every test
/// date of the same calf.
inline SplitPlan longitudinal_split(const std::vector<std::string>& calf_ids, const std::vector<Date>& dates, int ratio,
                                    const std::vector<std::size_t>& keep) {
  if (calf_ids.size() != dates.size()) fail(ErrorKind::ShapeError, "one date per row required");
  if (ratio <= 0 || ratio >= 100) fail(ErrorKind::InvalidParams, "train ratio must lie strictly between 0 and 100");
  std::map<std::string, std::vector<std::size_t>> series;
  for (std::size_t i : keep) series[calf_ids.at(i)].push_back(i);
  SplitPlan plan;
  for (auto& [calf, idx] : series) {
    if (idx.size() < 2) fail(ErrorKind::InsufficientSeries, "a chronological split needs at least 2 observations", calf);
    std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return dates[a] < dates[b]; });
    const auto n = static_cast<long>(idx.size());
    const long n_train = std::clamp(n * ratio / 100, 1L, n - 1);
    if (!(dates[idx[static_cast<std::size_t>(n_train - 1)]] < dates[idx[static_cast<std::size_t>(n_train)]])) {
      fail(ErrorKind::ConsistencyError, "repeated observation date straddles the split", calf);
    }
    plan.train_idx.insert(plan.train_idx.end(), idx.begin(), idx.begin() + n_train);
    plan.test_idx.insert(plan.test_idx.end(), idx.begin() + n_train, idx.end());
  }
  std::sort(plan.train_idx.begin(), plan.train_idx.end());
  std::sort(plan.test_idx.begin(), plan.test_idx.end());
  return plan;
}

inline SplitPlan longitudinal_split(const std::vector<std::string>& calf_ids, const std::vector<Date>& dates, int ratio) {
  std::vector<std::size_t> all(calf_ids.size());
  std::iota(all.begin(), all.end(), 0);
  return longitudinal_split(calf_ids, dates, ratio, all);
}

// ---------------------------------------------------------------------------
// Model specifications

enum class ModelKind { Ols, Gbm, Lmm };

inline std::string_view to_string(ModelKind k) {
  switch (k) {
    case ModelKind::Ols: return "ols";
    case ModelKind::Gbm: return "gbm";
    case ModelKind::Lmm: return "lmm";
  }
  return "?";
}

inline ModelKind parse_model_kind(std::string_view s) {
  if (s == "ols") return ModelKind::Ols;
  if (s == "gbm") return ModelKind::Gbm;
  if (s == "lmm") return ModelKind::Lmm;
  fail(ErrorKind::ConfigError, "unknown model '" + std::string(s) + "'");
}

/// Randomized search settings for a boosted model. Without per_fit the search
/// runs once on the full evaluation table before any split.
struct GbmTuning {
  GbmSearchSpace space;
  int iterations = 50;
  bool per_fit = false;
};

struct ModelSpec {
  std::string name;
  ModelKind kind = ModelKind::Ols;
  GbmHyperParams gbm;
  std::optional<GbmTuning> tuning;
  LmmOptions lmm;
};

inline ModelSpec model_spec(ModelKind kind) { return ModelSpec{std::string(to_string(kind)), kind, {}, {}, {}}; }

/// Fixed effects, weights, calf ids and dates of a metrics table.
struct Dataset {
  Design x;
  Eigen::VectorXd y;
  std::vector<std::string> calf;
  std::vector<Date> date;

  [[nodiscard]] std::size_t size() const { return calf.size(); }

  [[nodiscard]] Dataset subset(const std::vector<std::size_t>& idx) const {
    Dataset d{x.subset(idx), Eigen::VectorXd(static_cast<Eigen::Index>(idx.size())), {}, {}};
    for (std::size_t i = 0; i < idx.size(); ++i) {
      d.y(static_cast<Eigen::Index>(i)) = y(static_cast<Eigen::Index>(idx[i]));
      d.calf.push_back(calf[idx[i]]);
      d.date.push_back(date[idx[i]]);
    }
    return d;
  }
};

inline Dataset dataset_of(const std::vector<MetricsRecord>& rows) {
  Dataset d{features_of(rows), targets_of(rows), calf_ids_of(rows), {}};
  for (const auto& r : rows) d.date.push_back(r.obs_date);
  return d;
}

inline FitResult fit_model(const ModelSpec& spec, const Dataset& train, std::uint64_t seed) {
  switch (spec.kind) {
    case ModelKind::Ols: return ols_fit(train.x, train.y);
    case ModelKind::Lmm: return lmm_fit(train.x, train.y, train.calf, spec.lmm);
    case ModelKind::Gbm: {
      GbmHyperParams h = spec.gbm;
      if (spec.tuning) h = gbm_random_search(train.x, train.y, train.calf, spec.tuning->space, spec.tuning->iterations, seed).best;
      return gbm_fit(train.x, train.y, h);
    }
  }
  fail(ErrorKind::InvalidParams, "unknown model kind");
}

/// Runs every once-per-configuration search on the whole table and freezes
/// the selected hyperparameters into each ModelSpec.
inline std::vector<ModelSpec> resolve_tuning(std::vector<ModelSpec> specs, const Dataset& data, std::uint64_t seed, int jobs) {
  for (auto& s : specs) {
    if (s.kind != ModelKind::Gbm || !s.tuning || s.tuning->per_fit) continue;
    s.gbm = gbm_random_search(data.x, data.y, data.calf, s.tuning->space, s.tuning->iterations, seed, jobs).best;
    s.tuning.reset();
  }
  return specs;
}

// ---------------------------------------------------------------------------
// Comparison tables

struct ComparisonRow {
  std::string metric;
  std::string split;
  std::vector<std::vector<double>> values;  ///< per model, one entry per repeat or iteration
  std::vector<double> mean;
  std::vector<double> sd;
  GroupComparison cmp;
};

struct ComparisonTable {
  std::vector<std::string> models;
  std::vector<ComparisonRow> rows;  ///< grouped by split, metrics in kRegMetricNames order
  std::vector<std::string> excluded_calves;

  [[nodiscard]] const ComparisonRow& at(std::string_view metric, std::string_view split) const {
    for (const auto& r : rows)
      if (r.metric == metric && r.split == split) return r;
    fail(ErrorKind::InvalidParams, "no row " + std::string(metric) + " @ " + std::string(split));
  }
};

/// scores[model][sample] → one row per metric.
inline void append_rows(ComparisonTable& t, const std::string& split, const std::vector<std::vector<RegMetrics>>& scores,
                        double alpha, double family) {
  for (std::size_t k = 0; k < kRegMetricNames.size(); ++k) {
    ComparisonRow row{std::string(kRegMetricNames[k]), split, {}, {}, {}, {}};
    for (const auto& per_model : scores) {
      std::vector<double> v;
      for (const auto& s : per_model) v.push_back(s.get(k));
      row.mean.push_back(mean_of(v));
      row.sd.push_back(sd_of(v));
      row.values.push_back(std::move(v));
    }
    if (row.values.size() >= 2) {
      row.cmp = compare_groups(row.values, alpha, family);
    } else {
      row.cmp.letters.assign(row.values.size(), "a");  // nothing to compare against
    }
    t.rows.push_back(std::move(row));
  }
}

inline constexpr double kLbToKg = 0.45359237;

/// `metric,split,<model>_mean,<model>_sd,<model>_letter...,p,p_adj,eta2`.
/// With kg, squared and absolute errors are converted; r2 and mape are unitless.
inline std::string format_comparison_csv(const ComparisonTable& t, bool kg = false) {
  std::string out = "metric,split";
  for (const auto& m : t.models) out += "," + m + "_mean," + m + "_sd," + m + "_letter";
  out += ",p,p_adj,eta2\n";
  auto num = [](double v) { return std::isnan(v) ? std::string("NA") : text::format_double(v); };
  for (const auto& r : t.rows) {
    double scale = 1;
    if (kg && r.metric == "mse") scale = kLbToKg * kLbToKg;
    if (kg && (r.metric == "rmse" || r.metric == "mae")) scale = kLbToKg;
    out += r.metric + ',' + r.split;
    for (std::size_t i = 0; i < t.models.size(); ++i) {
      out += ',' + num(r.mean[i] * scale) + ',' + num(r.sd[i] * scale) + ',' + r.cmp.letters[i];
    }
    out += ',' + num(r.cmp.p) + ',' + num(r.cmp.p_adj) + ',' + num(r.cmp.eta2) + '\n';
  }
  return out;
}

namespace harness_detail {

inline void require_models(const std::vector<ModelSpec>& specs) {
  if (specs.empty()) fail(ErrorKind::InvalidParams, "no models to evaluate");
  std::set<std::string> names;
  for (const auto& s : specs)
    if (!names.insert(s.name).second) fail(ErrorKind::InvalidParams, "duplicate model name", s.name);
}

inline std::vector<std::string> names_of(const std::vector<ModelSpec>& specs) {
  std::vector<std::string> out;
  for (const auto& s : specs) out.push_back(s.name);
  return out;
}

inline Eigen::VectorXd predict_on(const FitResult& f, const Dataset& d) { return predict(f, d.x, d.calf); }

}  // namespace harness_detail

// ---------------------------------------------------------------------------
// Repeated grouped cross-validation

struct CvOptions {
  int k = 5;
  int repeats = 100;
  std::uint64_t seed = 1;
  bool per_fold = false;  ///< average fold scores instead of scoring pooled predictions
  int jobs = 1;
  double alpha = 0.05;
  std::optional<double> family;  ///< Bonferroni family; defaults to the number of models
};

/// Repeat r reshuffles calves with seed ⊕ r; each row is tested exactly once
/// per repeat.
inline ComparisonTable repeated_cv(const Dataset& data, const std::vector<ModelSpec>& models, const CvOptions& opt) {
  harness_detail::require_models(models);
  if (opt.repeats < 1) fail(ErrorKind::InvalidParams, "repeats must be >= 1");
  const auto specs = resolve_tuning(models, data, opt.seed, opt.jobs);
  const std::size_t n = data.size();
  auto per_repeat = parallel_map<std::vector<RegMetrics>>(static_cast<std::size_t>(opt.repeats), opt.jobs, [&](std::size_t r) {
    const auto plans = grouped_kfold(data.calf, opt.k, opt.seed ^ static_cast<std::uint64_t>(r));
    std::vector<RegMetrics> out;
    for (std::size_t m = 0; m < specs.size(); ++m) {
      Eigen::VectorXd pooled = Eigen::VectorXd::Constant(static_cast<Eigen::Index>(n), std::nan(""));
      std::vector<int> tested(n, 0);
      std::vector<RegMetrics> folds;
      for (std::size_t f = 0; f < plans.size(); ++f) {
        try {
          const Dataset train = data.subset(plans[f].train_idx), test = data.subset(plans[f].test_idx);
          const auto fit = fit_model(specs[m], train, stream_seed(opt.seed, r * plans.size() + f));
          const Eigen::VectorXd yhat = harness_detail::predict_on(fit, test);
          for (std::size_t i = 0; i < plans[f].test_idx.size(); ++i) {
            pooled(static_cast<Eigen::Index>(plans[f].test_idx[i])) = yhat(static_cast<Eigen::Index>(i));
            ++tested[plans[f].test_idx[i]];
          }
          if (opt.per_fold) folds.push_back(reg_metrics(test.y, yhat));
        } catch (const Error& e) {
          throw e.with_context("repeat " + std::to_string(r) + ", fold " + std::to_string(f) + ", model " + specs[m].name);
        }
      }
      if (std::any_of(tested.begin(), tested.end(), [](int c) { return c != 1; })) {
        fail(ErrorKind::ConsistencyError, "a row was not tested exactly once in repeat " + std::to_string(r));
      }
      if (!opt.per_fold) {
        out.push_back(reg_metrics(data.y, pooled));
      } else {
        RegMetrics avg{};
        for (const auto& s : folds) {
          avg.r2 += s.r2 / static_cast<double>(folds.size());
          avg.mse += s.mse / static_cast<double>(folds.size());
          avg.rmse += s.rmse / static_cast<double>(folds.size());
          avg.mae += s.mae / static_cast<double>(folds.size());
          avg.mape += s.mape / static_cast<double>(folds.size());
        }
        out.push_back(avg);
      }
    }
    return out;
  });
  std::vector<std::vector<RegMetrics>> scores(specs.size());
  for (const auto& rep : per_repeat)
    for (std::size_t m = 0; m < specs.size(); ++m) scores[m].push_back(rep[m]);
  ComparisonTable t;
  t.models = harness_detail::names_of(specs);
  append_rows(t, "k" + std::to_string(opt.k), scores, opt.alpha, opt.family.value_or(static_cast<double>(specs.size())));
  return t;
}

// ---------------------------------------------------------------------------
// Longitudinal evaluation

struct LongitudinalOptions {
  std::vector<int> ratios{90, 80, 70, 60, 50};
  int iterations = 100;
  std::uint64_t seed = 1;
  std::size_t min_series = 5;  ///< calves with fewer observations are excluded up front
  int jobs = 1;
  double alpha = 0.05;
  std::optional<double> family;  ///< defaults to the number of models
};

inline std::string ratio_label(int ratio) { return std::to_string(ratio) + ":" + std::to_string(100 - ratio); }

/// Calves whose series is long enough, in sorted order, with their row indices.
inline std::map<std::string, std::vector<std::size_t>> eligible_series(const Dataset& data, std::size_t min_series,
                                                                       std::vector<std::string>* excluded = nullptr) {
  std::map<std::string, std::vector<std::size_t>> series;
  for (std::size_t i = 0; i < data.size(); ++i) series[data.calf[i]].push_back(i);
  for (auto it = series.begin(); it != series.end();) {
    if (it->second.size() < min_series) {
      if (excluded) excluded->push_back(it->first);
      it = series.erase(it);
    } else {
      ++it;
    }
  }
  return series;
}

/// The jackknife exclusion of iteration i: a random eligible calf, then a
/// random observation of that calf. Returns the retained rows.
inline std::vector<std::size_t> jackknife_keep(const std::map<std::string, std::vector<std::size_t>>& series,
                                               std::uint64_t seed, std::size_t iteration) {
  Rng rng(stream_seed(seed, iteration));
  auto it = series.begin();
  std::advance(it, static_cast<std::ptrdiff_t>(rng.below(series.size())));
  const std::size_t drop = it->second[rng.below(it->second.size())];
  std::vector<std::size_t> keep;
  for (const auto& [calf, idx] : series)
    for (std::size_t i : idx)
      if (i != drop) keep.push_back(i);
  std::sort(keep.begin(), keep.end());
  return keep;
}

inline ComparisonTable longitudinal_eval(const Dataset& data, const std::vector<ModelSpec>& models,
                                         const LongitudinalOptions& opt) {
  harness_detail::require_models(models);
  if (opt.iterations < 1) fail(ErrorKind::InvalidParams, "iterations must be >= 1");
  if (opt.ratios.empty()) fail(ErrorKind::InvalidParams, "no train ratios");
  ComparisonTable t;
  const auto series = eligible_series(data, std::max<std::size_t>(opt.min_series, 2), &t.excluded_calves);
  if (series.size() < 2) fail(ErrorKind::InsufficientGroups, "fewer than 2 calves have a long enough series");
  std::vector<std::size_t> retained;
  for (const auto& [calf, idx] : series) retained.insert(retained.end(), idx.begin(), idx.end());
  std::sort(retained.begin(), retained.end());
  const auto specs = resolve_tuning(models, data.subset(retained), opt.seed, opt.jobs);

  // results[iteration][ratio][model]
  auto results = parallel_map<std::vector<std::vector<RegMetrics>>>(
      static_cast<std::size_t>(opt.iterations), opt.jobs, [&](std::size_t it) {
        const auto keep = jackknife_keep(series, opt.seed, it);
        std::vector<std::vector<RegMetrics>> out;
        for (std::size_t q = 0; q < opt.ratios.size(); ++q) {
          const auto plan = longitudinal_split(data.calf, data.date, opt.ratios[q], keep);
          const Dataset train = data.subset(plan.train_idx), test = data.subset(plan.test_idx);
          std::vector<RegMetrics> per_model;
          for (std::size_t m = 0; m < specs.size(); ++m) {
            try {
              const auto fit = fit_model(specs[m], train, stream_seed(opt.seed, it * opt.ratios.size() + q));
              per_model.push_back(reg_metrics(test.y, harness_detail::predict_on(fit, test)));
            } catch (const Error& e) {
              throw e.with_context("iteration " + std::to_string(it) + ", ratio " + ratio_label(opt.ratios[q]) + ", model " +
                                   specs[m].name);
            }
          }
          out.push_back(std::move(per_model));
        }
        return out;
      });
  t.models = harness_detail::names_of(specs);
  for (std::size_t q = 0; q < opt.ratios.size(); ++q) {
    std::vector<std::vector<RegMetrics>> scores(specs.size());
    for (const auto& res : results)
      for (std::size_t m = 0; m < specs.size(); ++m) scores[m].push_back(res[q][m]);
    append_rows(t, ratio_label(opt.ratios[q]), scores, opt.alpha, opt.family.value_or(static_cast<double>(specs.size())));
  }
  return t;
}

}  // namespace calfweight
