#pragma once

// Weight predictors: ordinary least squares, second-order gradient-boosted
// regression trees (with randomized hyperparameter search), and a random
// calf-intercept linear mixed model fitted by profiled (RE)ML.

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <numeric>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <utility>
#include <variant>
#include <vector>

#include <boost/math/tools/minima.hpp>

#include "calfweight/bodymetrics.hpp"
#include "calfweight/error.hpp"
#include "calfweight/parallel.hpp"
#include "calfweight/rng.hpp"

namespace calfweight {

inline constexpr std::array<std::string_view, 6> kFeatureNames{"age_days",      "length_px",     "width_px",
                                                               "avg_height_mm", "volume_mm_px2", "contour_area_px2"};

/// Named numeric design matrix (rows = observations).
struct Design {
  std::vector<std::string> names;
  Eigen::MatrixXd x;

  [[nodiscard]] Eigen::Index rows() const { return x.rows(); }
  [[nodiscard]] Eigen::Index cols() const { return x.cols(); }

  [[nodiscard]] Design subset(const std::vector<std::size_t>& idx) const {
    Design d{names, Eigen::MatrixXd(static_cast<Eigen::Index>(idx.size()), x.cols())};
    for (std::size_t i = 0; i < idx.size(); ++i) d.x.row(static_cast<Eigen::Index>(i)) = x.row(static_cast<Eigen::Index>(idx[i]));
    return d;
  }
};

/// The six standard fixed effects of each record.
inline Design features_of(const std::vector<MetricsRecord>& rows) {
  Design d{{kFeatureNames.begin(), kFeatureNames.end()}, Eigen::MatrixXd(static_cast<Eigen::Index>(rows.size()), 6)};
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto& m = rows[i].metrics;
    const double v[6] = {static_cast<double>(rows[i].age_days), m.length_px, m.width_px, m.avg_height_mm,
                         m.volume_mm_px2, m.contour_area_px2};
    for (int j = 0; j < 6; ++j) {
      if (!std::isfinite(v[j])) fail(ErrorKind::DegenerateInput, "non-finite feature", rows[i].calf_id);
      d.x(static_cast<Eigen::Index>(i), j) = v[j];
    }
  }
  return d;
}

inline Eigen::VectorXd targets_of(const std::vector<MetricsRecord>& rows) {
  Eigen::VectorXd y(static_cast<Eigen::Index>(rows.size()));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (!rows[i].body_weight_lb) fail(ErrorKind::MissingWeight, "row without body weight", rows[i].calf_id + "@" + rows[i].obs_date.iso());
    y(static_cast<Eigen::Index>(i)) = *rows[i].body_weight_lb;
  }
  return y;
}

inline std::vector<std::string> calf_ids_of(const std::vector<MetricsRecord>& rows) {
  std::vector<std::string> ids;
  ids.reserve(rows.size());
  for (const auto& r : rows) ids.push_back(r.calf_id);
  return ids;
}

namespace model_detail {

inline void require_rows(const Design& d, const Eigen::VectorXd& y) {
  if (d.rows() != y.size()) fail(ErrorKind::ShapeError, "design and target lengths differ");
  if (static_cast<Eigen::Index>(d.names.size()) != d.cols()) fail(ErrorKind::ShapeError, "one name per design column required");
}

/// Column means and standard deviations; a constant column is rank deficient
/// next to the intercept.
struct Standardizer {
  Eigen::VectorXd mean;
  Eigen::VectorXd scale;

  static Standardizer of(const Design& d) {
    Standardizer s{d.x.colwise().mean().transpose(), Eigen::VectorXd(d.cols())};
    for (Eigen::Index j = 0; j < d.cols(); ++j) {
      const double sd = std::sqrt((d.x.col(j).array() - s.mean(j)).square().sum() / static_cast<double>(d.rows()));
      if (!(sd > 0) || sd < 1e-12 * std::max(1.0, std::fabs(s.mean(j)))) {
        fail(ErrorKind::RankDeficient, "column is constant", d.names[static_cast<std::size_t>(j)]);
      }
      s.scale(j) = sd;
    }
    return s;
  }

  [[nodiscard]] Eigen::MatrixXd apply(const Eigen::MatrixXd& x) const {
    return (x.rowwise() - mean.transpose()).array().rowwise() / scale.transpose().array();
  }
};

/// Fails with the name of the first column that is linearly dependent on the
/// preceding ones.
inline void require_full_rank(const Eigen::MatrixXd& z, const std::vector<std::string>& names) {
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(z);
  qr.setThreshold(1e-9);
  if (qr.rank() == z.cols()) return;
  for (Eigen::Index k = 1; k <= z.cols(); ++k) {
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> part(z.leftCols(k));
    part.setThreshold(1e-9);
    if (part.rank() < k) fail(ErrorKind::RankDeficient, "design column is collinear", names[static_cast<std::size_t>(k - 1)]);
  }
  fail(ErrorKind::RankDeficient, "design is rank deficient");
}

inline void require_arity(const std::vector<std::string>& fitted, const Design& d) {
  if (d.cols() != static_cast<Eigen::Index>(fitted.size())) {
    fail(ErrorKind::ShapeError, "model expects " + std::to_string(fitted.size()) + " features, got " + std::to_string(d.cols()));
  }
}

}  // namespace model_detail

// ---------------------------------------------------------------------------
// Ordinary least squares

struct OlsModel {
  std::vector<std::string> features;
  double intercept = 0;
  std::vector<double> coefficients;

  friend bool operator==(const OlsModel&, const OlsModel&) = default;
};

/// Solved on centred, scaled columns with a column-pivoting QR; the intercept
/// is recovered from the means.
inline OlsModel ols_fit(const Design& d, const Eigen::VectorXd& y) {
  model_detail::require_rows(d, y);
  if (d.rows() < d.cols() + 2) fail(ErrorKind::InsufficientRows, "OLS needs more rows than parameters");
  const auto s = model_detail::Standardizer::of(d);
  const Eigen::MatrixXd z = s.apply(d.x);
  model_detail::require_full_rank(z, d.names);
  const double ybar = y.mean();
  const Eigen::VectorXd gamma = z.colPivHouseholderQr().solve((y.array() - ybar).matrix());
  OlsModel m{d.names, ybar, std::vector<double>(static_cast<std::size_t>(d.cols()))};
  for (Eigen::Index j = 0; j < d.cols(); ++j) {
    const double b = gamma(j) / s.scale(j);
    m.coefficients[static_cast<std::size_t>(j)] = b;
    m.intercept -= b * s.mean(j);
  }
  return m;
}

inline Eigen::VectorXd predict(const OlsModel& m, const Design& d) {
  model_detail::require_arity(m.features, d);
  Eigen::VectorXd out = Eigen::VectorXd::Constant(d.rows(), m.intercept);
  for (Eigen::Index j = 0; j < d.cols(); ++j) out += m.coefficients[static_cast<std::size_t>(j)] * d.x.col(j);
  return out;
}

// ---------------------------------------------------------------------------
// Gradient-boosted trees

struct GbmHyperParams {
  double learning_rate = 0.1;
  int n_estimators = 100;
  double l1_alpha = 0.0;
  double l2_lambda = 1.0;
  int max_depth = 6;
  int min_samples_leaf = 1;

  /// Learning rates above 1 overshoot the per-leaf optimum and would break the
  /// per-round loss guarantee.
  void validate() const {
    if (!(learning_rate > 0 && learning_rate <= 1)) fail(ErrorKind::InvalidParams, "learning_rate must lie in (0, 1]");
    if (n_estimators < 0) fail(ErrorKind::InvalidParams, "n_estimators must be >= 0");
    if (!(l1_alpha >= 0) || !(l2_lambda >= 0)) fail(ErrorKind::InvalidParams, "alpha and lambda must be >= 0");
    if (max_depth < 1) fail(ErrorKind::InvalidParams, "max_depth must be >= 1");
    if (min_samples_leaf < 1) fail(ErrorKind::InvalidParams, "min_samples_leaf must be >= 1");
  }

  friend bool operator==(const GbmHyperParams&, const GbmHyperParams&) = default;
};

struct TreeNode {
  int feature = -1;  ///< -1 for a leaf
  double threshold = 0;  ///< rows with x[feature] < threshold go left
  int left = -1;
  int right = -1;
  double weight = 0;

  friend bool operator==(const TreeNode&, const TreeNode&) = default;
};

struct RegressionTree {
  std::vector<TreeNode> nodes;  ///< nodes[0] is the root

  template <typename Row>
  [[nodiscard]] double leaf_weight(const Row& row) const {
    int k = 0;
    while (nodes[static_cast<std::size_t>(k)].feature >= 0) {
      const auto& n = nodes[static_cast<std::size_t>(k)];
      k = row(n.feature) < n.threshold ? n.left : n.right;
    }
    return nodes[static_cast<std::size_t>(k)].weight;
  }

  [[nodiscard]] int depth() const { return depth_from(0); }

  friend bool operator==(const RegressionTree&, const RegressionTree&) = default;

 private:
  [[nodiscard]] int depth_from(int k) const {
    const auto& n = nodes[static_cast<std::size_t>(k)];
    return n.feature < 0 ? 0 : 1 + std::max(depth_from(n.left), depth_from(n.right));
  }
};

struct GbmModel {
  std::vector<std::string> features;
  double base_score = 0;
  std::vector<RegressionTree> trees;
  GbmHyperParams hyper;
  std::vector<double> train_loss;  ///< mean squared error after each round, starting with the base score

  friend bool operator==(const GbmModel&, const GbmModel&) = default;
};

namespace gbm_detail {

/// A boosting round can never raise the squared loss, but once residuals
/// approach the rounding error of the predictions (|pred| ≤ scale after
/// `rounds` accumulated updates) the computed MSE jitters by about
/// 2·sqrt(loss)·e + e².
inline double loss_slack(double loss, double scale, int rounds) {
  const double e = 8 * std::numeric_limits<double>::epsilon() * std::max(scale, 1.0) * std::sqrt(static_cast<double>(rounds));
  return 1e-12 * loss + 2 * std::sqrt(loss) * e + e * e;
}

inline double soft_threshold(double g, double alpha) {
  const double mag = std::max(std::fabs(g) - alpha, 0.0);
  return g < 0 ? -mag : mag;
}

class TreeBuilder {
 public:
  TreeBuilder(const Eigen::MatrixXd& x, const std::vector<double>& grad, const GbmHyperParams& h)
      : x_(x), g_(grad), h_(h), side_(static_cast<std::size_t>(x.rows()), 0) {}

  RegressionTree build(const std::vector<std::vector<int>>& sorted) {
    RegressionTree t;
    grow(t, sorted, 0);
    return t;
  }

 private:
  int grow(RegressionTree& t, const std::vector<std::vector<int>>& sorted, int depth) {
    const int id = static_cast<int>(t.nodes.size());
    t.nodes.emplace_back();
    const auto& rows = sorted[0];
    const double count = static_cast<double>(rows.size());
    double G = 0, g2 = 0;
    for (int r : rows) {
      G += g_[static_cast<std::size_t>(r)];
      g2 += g_[static_cast<std::size_t>(r)] * g_[static_cast<std::size_t>(r)];
    }
    const double lambda = h_.l2_lambda;
    const std::size_t min_leaf = static_cast<std::size_t>(h_.min_samples_leaf);
    int best_f = -1;
    std::size_t best_pos = 0;
    double best_gain = 1e-12 * g2;
    if (depth < h_.max_depth && rows.size() >= 2 * min_leaf) {
      const double parent = G * G / (count + lambda);
      for (std::size_t f = 0; f < sorted.size(); ++f) {
        const auto& order = sorted[f];
        double gl = 0;
        for (std::size_t k = 0; k + 1 < order.size(); ++k) {
          gl += g_[static_cast<std::size_t>(order[k])];
          const std::size_t nl = k + 1;
          if (nl < min_leaf || order.size() - nl < min_leaf) continue;
          const double xa = x_(order[k], static_cast<Eigen::Index>(f));
          const double xb = x_(order[k + 1], static_cast<Eigen::Index>(f));
          if (!(xa < xb)) continue;
          const double hl = static_cast<double>(nl), hr = count - hl, gr = G - gl;
          const double gain = 0.5 * (gl * gl / (hl + lambda) + gr * gr / (hr + lambda) - parent);
          if (gain > best_gain) {
            best_gain = gain;
            best_f = static_cast<int>(f);
            best_pos = k;
          }
        }
      }
    }
    if (best_f < 0) {
      t.nodes[static_cast<std::size_t>(id)].weight = -soft_threshold(G, h_.l1_alpha) / (count + lambda);
      return id;
    }
    const auto& order = sorted[static_cast<std::size_t>(best_f)];
    const double threshold = 0.5 * (x_(order[best_pos], best_f) + x_(order[best_pos + 1], best_f));
    for (std::size_t k = 0; k < order.size(); ++k) side_[static_cast<std::size_t>(order[k])] = k <= best_pos ? 1 : 2;
    std::vector<std::vector<int>> left(sorted.size()), right(sorted.size());
    for (std::size_t f = 0; f < sorted.size(); ++f) {
      left[f].reserve(best_pos + 1);
      right[f].reserve(order.size() - best_pos - 1);
      for (int r : sorted[f]) (side_[static_cast<std::size_t>(r)] == 1 ? left[f] : right[f]).push_back(r);
    }
    const int l = grow(t, left, depth + 1);
    const int r = grow(t, right, depth + 1);
    auto& node = t.nodes[static_cast<std::size_t>(id)];
    node.feature = best_f;
    node.threshold = threshold;
    node.left = l;
    node.right = r;
    return id;
  }

  const Eigen::MatrixXd& x_;
  const std::vector<double>& g_;
  const GbmHyperParams& h_;
  std::vector<int> side_;
};

}  // namespace gbm_detail

/// Squared-error boosting with exact greedy splits, unit hessians and soft-
/// thresholded leaf weights. Training loss is checked after every round.
inline GbmModel gbm_fit(const Design& d, const Eigen::VectorXd& y, const GbmHyperParams& hyper) {
  model_detail::require_rows(d, y);
  hyper.validate();
  if (d.rows() < 2) fail(ErrorKind::InsufficientRows, "boosting needs at least 2 rows");
  const auto n = static_cast<std::size_t>(d.rows());
  GbmModel m{d.names, y.mean(), {}, hyper, {}};
  std::vector<std::vector<int>> sorted(static_cast<std::size_t>(d.cols()));
  for (Eigen::Index f = 0; f < d.cols(); ++f) {
    auto& order = sorted[static_cast<std::size_t>(f)];
    order.resize(n);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return d.x(a, f) < d.x(b, f); });
  }
  std::vector<double> pred(n, m.base_score), grad(n);
  auto loss = [&] {
    double s = 0;
    for (std::size_t i = 0; i < n; ++i) s += (pred[i] - y(static_cast<Eigen::Index>(i))) * (pred[i] - y(static_cast<Eigen::Index>(i)));
    return s / static_cast<double>(n);
  };
  m.train_loss.push_back(loss());
  m.trees.reserve(static_cast<std::size_t>(hyper.n_estimators));
  for (int round = 0; round < hyper.n_estimators; ++round) {
    for (std::size_t i = 0; i < n; ++i) grad[i] = pred[i] - y(static_cast<Eigen::Index>(i));
    gbm_detail::TreeBuilder builder(d.x, grad, hyper);
    RegressionTree tree = builder.build(sorted);
    for (std::size_t i = 0; i < n; ++i) pred[i] += hyper.learning_rate * tree.leaf_weight(d.x.row(static_cast<Eigen::Index>(i)));
    const double l = loss();
    double scale = 0;
    for (double v : pred) scale = std::max(scale, std::fabs(v));
    if (!std::isfinite(l) || l > m.train_loss.back() + gbm_detail::loss_slack(m.train_loss.back(), scale, round + 1)) {
      fail(ErrorKind::FitDiverged, "training loss increased in round " + std::to_string(round));
    }
    m.train_loss.push_back(l);
    m.trees.push_back(std::move(tree));
  }
  return m;
}

inline Eigen::VectorXd predict(const GbmModel& m, const Design& d) {
  model_detail::require_arity(m.features, d);
  Eigen::VectorXd out = Eigen::VectorXd::Constant(d.rows(), m.base_score);
  for (Eigen::Index i = 0; i < d.rows(); ++i) {
    double s = 0;
    for (const auto& t : m.trees) s += m.hyper.learning_rate * t.leaf_weight(d.x.row(i));
    out(i) += s;
  }
  return out;
}

/// Ranges sampled by the randomized search.
struct GbmSearchSpace {
  double learning_rate_lo = 0.01, learning_rate_hi = 0.9;
  int n_estimators_lo = 50, n_estimators_hi = 10'000;  ///< sampled log-uniformly
  double alpha_lo = 0.0, alpha_hi = 1.0;
  double lambda_lo = 0.0, lambda_hi = 1.0;
  int max_depth = 6;
  int min_samples_leaf = 1;

  void validate() const {
    if (!(learning_rate_lo > 0 && learning_rate_lo <= learning_rate_hi && learning_rate_hi <= 1)) {
      fail(ErrorKind::InvalidParams, "learning-rate range must lie in (0, 1]");
    }
    if (n_estimators_lo < 1 || n_estimators_lo > n_estimators_hi) fail(ErrorKind::InvalidParams, "bad n_estimators range");
    if (!(alpha_lo >= 0 && alpha_lo <= alpha_hi) || !(lambda_lo >= 0 && lambda_lo <= lambda_hi)) {
      fail(ErrorKind::InvalidParams, "bad alpha or lambda range");
    }
    GbmHyperParams{0.5, 1, 0, 0, max_depth, min_samples_leaf}.validate();
  }

  [[nodiscard]] GbmHyperParams sample(Rng& rng) const {
    GbmHyperParams h;
    h.learning_rate = rng.uniform(learning_rate_lo, learning_rate_hi);
    const double u = rng.uniform(std::log(static_cast<double>(n_estimators_lo)), std::log(n_estimators_hi + 1.0));
    h.n_estimators = std::clamp(static_cast<int>(std::floor(std::exp(u))), n_estimators_lo, n_estimators_hi);
    h.l1_alpha = rng.uniform(alpha_lo, alpha_hi);
    h.l2_lambda = rng.uniform(lambda_lo, lambda_hi);
    h.max_depth = max_depth;
    h.min_samples_leaf = min_samples_leaf;
    return h;
  }
};

struct GbmSearchResult {
  GbmHyperParams best;
  double best_rmse = std::numeric_limits<double>::infinity();
  std::vector<double> rmse;  ///< inner held-out RMSE per draw
  std::vector<std::size_t> train_idx;
  std::vector<std::size_t> valid_idx;
};

/// Inner split: distinct groups shuffled by seed, 20% (at least one) held out.
inline std::pair<std::vector<std::size_t>, std::vector<std::size_t>> inner_group_split(
    const std::vector<std::string>& groups, std::uint64_t seed) {
  std::vector<std::string> distinct;
  std::set<std::string> seen;
  for (const auto& g : groups)
    if (seen.insert(g).second) distinct.push_back(g);
  if (distinct.size() < 2) fail(ErrorKind::InsufficientGroups, "search needs at least 2 distinct groups");
  std::sort(distinct.begin(), distinct.end());
  Rng rng(stream_seed(seed, 0xA11CE));
  rng.shuffle(distinct);
  const std::size_t n_valid = std::clamp<std::size_t>(
      static_cast<std::size_t>(std::llround(0.2 * static_cast<double>(distinct.size()))), 1, distinct.size() - 1);
  const std::set<std::string> held(distinct.begin(), distinct.begin() + static_cast<std::ptrdiff_t>(n_valid));
  std::vector<std::size_t> train, valid;
  for (std::size_t i = 0; i < groups.size(); ++i) (held.count(groups[i]) ? valid : train).push_back(i);
  return {train, valid};
}

inline GbmSearchResult gbm_random_search(const Design& d, const Eigen::VectorXd& y, const std::vector<std::string>& groups,
                                         const GbmSearchSpace& space, int iterations, std::uint64_t seed, int jobs = 1) {
  model_detail::require_rows(d, y);
  space.validate();
  if (iterations < 1) fail(ErrorKind::InvalidParams, "search iterations must be >= 1");
  if (groups.size() != static_cast<std::size_t>(d.rows())) fail(ErrorKind::ShapeError, "one group id per row required");
  GbmSearchResult out;
  std::tie(out.train_idx, out.valid_idx) = inner_group_split(groups, seed);
  const Design train = d.subset(out.train_idx), valid = d.subset(out.valid_idx);
  Eigen::VectorXd ytr(static_cast<Eigen::Index>(out.train_idx.size())), yva(static_cast<Eigen::Index>(out.valid_idx.size()));
  for (std::size_t i = 0; i < out.train_idx.size(); ++i) ytr(static_cast<Eigen::Index>(i)) = y(static_cast<Eigen::Index>(out.train_idx[i]));
  for (std::size_t i = 0; i < out.valid_idx.size(); ++i) yva(static_cast<Eigen::Index>(i)) = y(static_cast<Eigen::Index>(out.valid_idx[i]));
  std::vector<GbmHyperParams> draws;
  for (int i = 0; i < iterations; ++i) {
    Rng rng(stream_seed(seed, static_cast<std::uint64_t>(i)));
    draws.push_back(space.sample(rng));
  }
  out.rmse = parallel_map<double>(draws.size(), jobs, [&](std::size_t i) {
    const GbmModel m = gbm_fit(train, ytr, draws[i]);
    return std::sqrt((predict(m, valid) - yva).squaredNorm() / static_cast<double>(yva.size()));
  });
  for (std::size_t i = 0; i < draws.size(); ++i) {
    if (out.rmse[i] < out.best_rmse) {
      out.best_rmse = out.rmse[i];
      out.best = draws[i];
    }
  }
  if (!std::isfinite(out.best_rmse)) fail(ErrorKind::FitDiverged, "no search draw produced a finite validation error");
  return out;
}

// ---------------------------------------------------------------------------
// Linear mixed model with a random calf intercept

struct LmmOptions {
  bool reml = true;
  std::optional<double> fixed_theta;  ///< σ_u² / σ_e²; skips the profile search
  double log_theta_lo = -12.0;
  double log_theta_hi = 12.0;
};

struct LmmModel {
  std::vector<std::string> features;
  double intercept = 0;
  std::vector<double> beta;
  double sigma_u2 = 0;
  double sigma_e2 = 0;
  double theta = 0;
  bool reml = true;
  std::map<std::string, double> blup;
  double objective = 0;  ///< −2 × profiled (restricted) log-likelihood, up to a constant

  friend bool operator==(const LmmModel&, const LmmModel&) = default;
};

namespace lmm_detail {

struct Groups {
  std::vector<std::string> names;
  std::vector<std::vector<Eigen::Index>> rows;
};

inline Groups group_rows(const std::vector<std::string>& ids) {
  Groups g;
  std::map<std::string, std::size_t> at;
  for (std::size_t i = 0; i < ids.size(); ++i) {
    auto [it, fresh] = at.emplace(ids[i], g.names.size());
    if (fresh) {
      g.names.push_back(ids[i]);
      g.rows.emplace_back();
    }
    g.rows[it->second].push_back(static_cast<Eigen::Index>(i));
  }
  return g;
}

struct Profile {
  double objective = 0;
  double sigma_e2 = 0;
  Eigen::VectorXd beta;      ///< on the standardized design, intercept first
  Eigen::VectorXd residual;  ///< y − Xβ
};

/// GLS at a given θ on a design whose first column is the intercept.
inline Profile evaluate(const Eigen::MatrixXd& z, const Eigen::VectorXd& y, const Groups& g, double theta, bool reml) {
  const Eigen::Index p = z.cols();
  Eigen::MatrixXd a = z.transpose() * z;
  Eigen::VectorXd b = z.transpose() * y;
  double logdet_v = 0;
  for (const auto& rows : g.rows) {
    const double n = static_cast<double>(rows.size());
    const double c = theta / (1 + n * theta);
    Eigen::VectorXd zs = Eigen::VectorXd::Zero(p);
    double ys = 0;
    for (Eigen::Index r : rows) {
      zs += z.row(r).transpose();
      ys += y(r);
    }
    a.noalias() -= c * zs * zs.transpose();
    b -= c * ys * zs;
    logdet_v += std::log1p(n * theta);
  }
  const Eigen::LDLT<Eigen::MatrixXd> ldlt(a);
  Profile out;
  out.beta = ldlt.solve(b);
  out.residual = y - z * out.beta;
  double s = out.residual.squaredNorm();
  for (const auto& rows : g.rows) {
    const double n = static_cast<double>(rows.size());
    double rs = 0;
    for (Eigen::Index r : rows) rs += out.residual(r);
    s -= theta / (1 + n * theta) * rs * rs;
  }
  const double N = static_cast<double>(y.size());
  const double dof = reml ? N - static_cast<double>(p) : N;
  out.sigma_e2 = s / dof;
  double obj = dof * std::log(out.sigma_e2) + logdet_v;
  if (reml) obj += ldlt.vectorD().array().log().sum();
  out.objective = obj;
  return out;
}

}  // namespace lmm_detail

/// θ = σ_u²/σ_e² maximizes the profiled likelihood over log θ in the option
/// bounds (grid scan, then Brent refinement); β and the per-calf BLUPs
/// n θ/(n θ + 1)·r̄ follow at θ̂.
inline LmmModel lmm_fit(const Design& d, const Eigen::VectorXd& y, const std::vector<std::string>& calf_ids,
                        const LmmOptions& opt = {}) {
  model_detail::require_rows(d, y);
  if (calf_ids.size() != static_cast<std::size_t>(d.rows())) fail(ErrorKind::ShapeError, "one calf id per row required");
  const auto groups = lmm_detail::group_rows(calf_ids);
  if (groups.names.size() < 2) fail(ErrorKind::VarianceNotIdentifiable, "a random intercept needs at least 2 calves");
  if (d.rows() < d.cols() + 2) fail(ErrorKind::InsufficientRows, "mixed model needs more rows than fixed effects");
  model_detail::Standardizer s{Eigen::VectorXd::Zero(d.cols()), Eigen::VectorXd::Ones(d.cols())};
  if (d.cols() > 0) s = model_detail::Standardizer::of(d);
  Eigen::MatrixXd z(d.rows(), d.cols() + 1);
  z.col(0).setOnes();
  if (d.cols() > 0) {
    z.rightCols(d.cols()) = s.apply(d.x);
    model_detail::require_full_rank(z.rightCols(d.cols()), d.names);
  }
  auto objective = [&](double log_theta) {
    const double v = lmm_detail::evaluate(z, y, groups, std::exp(log_theta), opt.reml).objective;
    if (!std::isfinite(v)) fail(ErrorKind::FitDiverged, "profiled likelihood is not finite");
    return v;
  };
  double theta = 0;
  if (opt.fixed_theta) {
    if (!(*opt.fixed_theta >= 0)) fail(ErrorKind::InvalidParams, "fixed theta must be >= 0");
    theta = *opt.fixed_theta;
  } else {
    if (!(opt.log_theta_lo < opt.log_theta_hi)) fail(ErrorKind::InvalidParams, "empty log-theta interval");
    constexpr int kGrid = 96;
    const double step = (opt.log_theta_hi - opt.log_theta_lo) / kGrid;
    int best = 0;
    double best_v = std::numeric_limits<double>::infinity();
    for (int k = 0; k <= kGrid; ++k) {
      const double v = objective(opt.log_theta_lo + k * step);
      if (v < best_v) {
        best_v = v;
        best = k;
      }
    }
    const double lo = opt.log_theta_lo + std::max(0, best - 1) * step;
    const double hi = opt.log_theta_lo + std::min(kGrid, best + 1) * step;
    std::uintmax_t max_iter = 200;
    auto [x, v] = boost::math::tools::brent_find_minima(objective, lo, hi, 30, max_iter);
    if (v > best_v) x = opt.log_theta_lo + best * step;
    theta = std::exp(x);
  }
  const auto prof = lmm_detail::evaluate(z, y, groups, theta, opt.reml);
  if (!std::isfinite(prof.objective) && !opt.fixed_theta) fail(ErrorKind::FitDiverged, "profiled likelihood is not finite");
  LmmModel m;
  m.features = d.names;
  m.reml = opt.reml;
  m.theta = theta;
  m.sigma_e2 = prof.sigma_e2;
  m.sigma_u2 = theta * prof.sigma_e2;
  m.objective = prof.objective;
  m.intercept = prof.beta(0);
  for (Eigen::Index j = 0; j < d.cols(); ++j) {
    const double b = prof.beta(j + 1) / s.scale(j);
    m.beta.push_back(b);
    m.intercept -= b * s.mean(j);
  }
  for (std::size_t k = 0; k < groups.names.size(); ++k) {
    const double n = static_cast<double>(groups.rows[k].size());
    double rs = 0;
    for (Eigen::Index r : groups.rows[k]) rs += prof.residual(r);
    m.blup[groups.names[k]] = theta / (1 + n * theta) * rs;
  }
  return m;
}

/// Fixed effects plus the calf's BLUP; calves unseen in training get 0.
inline Eigen::VectorXd predict(const LmmModel& m, const Design& d, const std::vector<std::string>& calf_ids) {
  model_detail::require_arity(m.features, d);
  if (calf_ids.size() != static_cast<std::size_t>(d.rows())) fail(ErrorKind::ShapeError, "one calf id per row required");
  Eigen::VectorXd out = Eigen::VectorXd::Constant(d.rows(), m.intercept);
  for (Eigen::Index j = 0; j < d.cols(); ++j) out += m.beta[static_cast<std::size_t>(j)] * d.x.col(j);
  for (Eigen::Index i = 0; i < d.rows(); ++i) {
    const auto it = m.blup.find(calf_ids[static_cast<std::size_t>(i)]);
    if (it != m.blup.end()) out(i) += it->second;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Any fitted model

using FitResult = std::variant<OlsModel, GbmModel, LmmModel>;

/// calf_ids are used by the mixed model only.
inline Eigen::VectorXd predict(const FitResult& fit, const Design& d, const std::vector<std::string>& calf_ids = {}) {
  return std::visit(
      [&](const auto& m) -> Eigen::VectorXd {
        using M = std::decay_t<decltype(m)>;
        if constexpr (std::is_same_v<M, LmmModel>) {
          if (calf_ids.empty()) return predict(m, d, std::vector<std::string>(static_cast<std::size_t>(d.rows())));
          return predict(m, d, calf_ids);
        } else {
          return predict(m, d);
        }
      },
      fit);
}

inline constexpr int kModelFormatVersion = 1;

inline nlohmann::json to_json(const FitResult& fit) {
  using nlohmann::json;
  json j;
  j["format_version"] = kModelFormatVersion;
  std::visit(
      [&](const auto& m) {
        using M = std::decay_t<decltype(m)>;
        j["features"] = m.features;
        if constexpr (std::is_same_v<M, OlsModel>) {
          j["kind"] = "ols";
          j["intercept"] = m.intercept;
          j["coefficients"] = m.coefficients;
        } else if constexpr (std::is_same_v<M, GbmModel>) {
          j["kind"] = "gbm";
          j["base_score"] = m.base_score;
          j["hyper"] = {{"learning_rate", m.hyper.learning_rate}, {"n_estimators", m.hyper.n_estimators},
                        {"l1_alpha", m.hyper.l1_alpha},           {"l2_lambda", m.hyper.l2_lambda},
                        {"max_depth", m.hyper.max_depth},         {"min_samples_leaf", m.hyper.min_samples_leaf}};
          j["train_loss"] = m.train_loss;
          json trees = json::array();
          for (const auto& t : m.trees) {
            json nodes = json::array();
            for (const auto& n : t.nodes) nodes.push_back({n.feature, n.threshold, n.left, n.right, n.weight});
            trees.push_back(std::move(nodes));
          }
          j["trees"] = std::move(trees);
        } else {
          j["kind"] = "lmm";
          j["intercept"] = m.intercept;
          j["beta"] = m.beta;
          j["sigma_u2"] = m.sigma_u2;
          j["sigma_e2"] = m.sigma_e2;
          j["theta"] = m.theta;
          j["reml"] = m.reml;
          j["objective"] = m.objective;
          j["blup"] = m.blup;
        }
      },
      fit);
  return j;
}

inline FitResult model_from_json(const nlohmann::json& j) {
  try {
    if (j.at("format_version").get<int>() != kModelFormatVersion) fail(ErrorKind::ParseError, "unsupported model format version");
    const std::string kind = j.at("kind").get<std::string>();
    const auto features = j.at("features").get<std::vector<std::string>>();
    if (kind == "ols") {
      return OlsModel{features, j.at("intercept").get<double>(), j.at("coefficients").get<std::vector<double>>()};
    }
    if (kind == "gbm") {
      GbmModel m;
      m.features = features;
      m.base_score = j.at("base_score").get<double>();
      const auto& h = j.at("hyper");
      m.hyper = {h.at("learning_rate").get<double>(), h.at("n_estimators").get<int>(), h.at("l1_alpha").get<double>(),
                 h.at("l2_lambda").get<double>(),     h.at("max_depth").get<int>(),    h.at("min_samples_leaf").get<int>()};
      m.train_loss = j.at("train_loss").get<std::vector<double>>();
      for (const auto& t : j.at("trees")) {
        RegressionTree tree;
        for (const auto& n : t) {
          tree.nodes.push_back({n.at(0).get<int>(), n.at(1).get<double>(), n.at(2).get<int>(), n.at(3).get<int>(),
                                n.at(4).get<double>()});
        }
        m.trees.push_back(std::move(tree));
      }
      return m;
    }
    if (kind == "lmm") {
      LmmModel m;
      m.features = features;
      m.intercept = j.at("intercept").get<double>();
      m.beta = j.at("beta").get<std::vector<double>>();
      m.sigma_u2 = j.at("sigma_u2").get<double>();
      m.sigma_e2 = j.at("sigma_e2").get<double>();
      m.theta = j.at("theta").get<double>();
      m.reml = j.at("reml").get<bool>();
      m.objective = j.at("objective").get<double>();
      m.blup = j.at("blup").get<std::map<std::string, double>>();
      return m;
    }
    fail(ErrorKind::ParseError, "unknown model kind '" + kind + "'");
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::ParseError, std::string("malformed model document: ") + e.what());
  }
}

}  // namespace calfweight
