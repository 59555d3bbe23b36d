#pragma once

// Correlations, the Mantel permutation test, one-way ANOVA, Tukey HSD with
// letter displays, Bonferroni adjustment, and the F / t / studentized-range
// distribution functions behind them.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <boost/math/distributions/chi_squared.hpp>
#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "calfweight/bodymetrics.hpp"
#include "calfweight/error.hpp"
#include "calfweight/parallel.hpp"
#include "calfweight/rng.hpp"

namespace calfweight {

// ---------------------------------------------------------------------------
// Distributions

namespace dist_detail {

/// Continued fraction for the incomplete beta (modified Lentz).
inline double beta_cf(double a, double b, double x) {
  constexpr int kMaxIter = 20000;
  constexpr double kEps = 1e-16;
  constexpr double kTiny = 1e-300;
  const double qab = a + b, qap = a + 1.0, qam = a - 1.0;
  double c = 1.0;
  double d = 1.0 - qab * x / qap;
  if (std::fabs(d) < kTiny) d = kTiny;
  d = 1.0 / d;
  double h = d;
  for (int m = 1; m <= kMaxIter; ++m) {
    const double m2 = 2.0 * m;
    double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
    d = 1.0 + aa * d;
    if (std::fabs(d) < kTiny) d = kTiny;
    c = 1.0 + aa / c;
    if (std::fabs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    h *= d * c;
    aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
    d = 1.0 + aa * d;
    if (std::fabs(d) < kTiny) d = kTiny;
    c = 1.0 + aa / c;
    if (std::fabs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    const double del = d * c;
    h *= del;
    if (std::fabs(del - 1.0) < kEps) return h;
  }
  fail(ErrorKind::NumericalError, "incomplete beta continued fraction did not converge");
}

}  // namespace dist_detail

/// Regularized incomplete beta I_x(a, b).
inline double ibeta(double a, double b, double x) {
  if (!(a > 0) || !(b > 0) || std::isnan(x)) fail(ErrorKind::NumericalError, "ibeta needs a, b > 0");
  if (x <= 0.0) return 0.0;
  if (x >= 1.0) return 1.0;
  const double log_front = std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) + a * std::log(x) + b * std::log1p(-x);
  const double front = std::exp(log_front);
  if (x < (a + 1.0) / (a + b + 2.0)) return front * dist_detail::beta_cf(a, b, x) / a;
  return 1.0 - front * dist_detail::beta_cf(b, a, 1.0 - x) / b;
}

inline double f_cdf(double x, double d1, double d2) {
  if (!(d1 > 0) || !(d2 > 0)) fail(ErrorKind::NumericalError, "F degrees of freedom must be positive");
  if (x <= 0) return 0.0;
  if (std::isinf(x)) return 1.0;
  return ibeta(d1 / 2, d2 / 2, d1 * x / (d1 * x + d2));
}

/// Upper tail 1 − F_cdf, evaluated without cancellation.
inline double f_sf(double x, double d1, double d2) {
  if (!(d1 > 0) || !(d2 > 0)) fail(ErrorKind::NumericalError, "F degrees of freedom must be positive");
  if (x <= 0) return 1.0;
  if (std::isinf(x)) return 0.0;
  return ibeta(d2 / 2, d1 / 2, d2 / (d2 + d1 * x));
}

/// Two-sided Student-t tail probability P(|T| ≥ |t|).
inline double t_two_sided(double t, double df) {
  if (!(df > 0)) fail(ErrorKind::NumericalError, "t degrees of freedom must be positive");
  if (std::isinf(t)) return 0.0;
  return ibeta(df / 2, 0.5, df / (df + t * t));
}

inline double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::numbers::sqrt2); }

/// CDF of the range of k standard normals.
inline double normal_range_cdf(double w, int k) {
  if (w <= 0) return 0.0;
  if (k == 2) return 2.0 * normal_cdf(w / std::numbers::sqrt2) - 1.0;
  auto integrand = [&](double z) {
    const double phi = std::exp(-0.5 * z * z) / std::sqrt(2.0 * std::numbers::pi);
    const double band = normal_cdf(z) - normal_cdf(z - w);
    return phi * std::pow(std::max(0.0, band), k - 1);
  };
  double err = 0.0;
  const double v =
      k * boost::math::quadrature::gauss_kronrod<double, 31>::integrate(integrand, -9.0, 9.0 + w, 12, 1e-10, &err);
  return std::clamp(v, 0.0, 1.0);
}

/// Studentized-range CDF P(Q ≤ q) for k groups and df error degrees of freedom:
/// the range CDF at q·s integrated over the density of s = √(χ²_df / df).
inline double srd_cdf(double q, int k, double df) {
  if (k < 2 || !(df >= 1)) fail(ErrorKind::NumericalError, "studentized range needs k >= 2 and df >= 1");
  if (q <= 0) return 0.0;
  if (std::isinf(q)) return 1.0;
  const boost::math::chi_squared chi(df);
  const double s_lo = std::sqrt(boost::math::quantile(chi, 1e-13) / df);
  const double s_hi = std::sqrt(boost::math::quantile(boost::math::complement(chi, 1e-13)) / df);
  const double log_norm = (df / 2) * std::log(df) - std::lgamma(df / 2) - (df / 2 - 1) * std::log(2.0);
  auto density = [&](double s) {
    if (s <= 0) return 0.0;
    return std::exp(log_norm + (df - 1) * std::log(s) - df * s * s / 2);
  };
  double err = 0.0;
  const double v = boost::math::quadrature::gauss_kronrod<double, 31>::integrate(
      [&](double s) { return density(s) * normal_range_cdf(q * s, k); }, s_lo, s_hi, 15, 1e-9, &err);
  if (!std::isfinite(v) || err > 1e-5) fail(ErrorKind::NumericalError, "studentized range quadrature did not converge");
  return std::clamp(v, 0.0, 1.0);
}

// ---------------------------------------------------------------------------
// Correlation

inline double pearson(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) fail(ErrorKind::ShapeError, "pearson inputs differ in length");
  if (x.size() < 3) fail(ErrorKind::DegenerateInput, "pearson needs at least 3 pairs");
  const double n = static_cast<double>(x.size());
  const double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
  const double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
  double sxx = 0, syy = 0, sxy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double dx = x[i] - mx, dy = y[i] - my;
    sxx += dx * dx;
    syy += dy * dy;
    sxy += dx * dy;
  }
  if (sxx == 0) fail(ErrorKind::DegenerateInput, "zero variance", "x");
  if (syy == 0) fail(ErrorKind::DegenerateInput, "zero variance", "y");
  return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

struct CorrMatrix {
  std::vector<std::string> labels;
  std::vector<double> values;  ///< row-major n × n

  [[nodiscard]] std::size_t size() const noexcept { return labels.size(); }
  [[nodiscard]] double at(std::size_t i, std::size_t j) const { return values[i * labels.size() + j]; }
  double& at(std::size_t i, std::size_t j) { return values[i * labels.size() + j]; }

  friend bool operator==(const CorrMatrix&, const CorrMatrix&) = default;
};

/// Pearson matrix over named columns of equal length.
inline CorrMatrix corr_matrix(const std::vector<std::string>& labels, const std::vector<std::vector<double>>& columns) {
  if (labels.size() != columns.size()) fail(ErrorKind::ShapeError, "one label per column required");
  CorrMatrix m{labels, std::vector<double>(labels.size() * labels.size(), 0.0)};
  for (std::size_t i = 0; i < labels.size(); ++i) {
    m.at(i, i) = 1.0;
    for (std::size_t j = i + 1; j < labels.size(); ++j) {
      double r = 0;
      try {
        r = pearson(columns[i], columns[j]);
      } catch (const Error& e) {
        if (e.kind() != ErrorKind::DegenerateInput || e.subject().empty()) throw;
        fail(ErrorKind::DegenerateInput, "constant column", e.subject() == "x" ? labels[i] : labels[j]);
      }
      m.at(i, j) = m.at(j, i) = r;
    }
  }
  return m;
}

inline const std::vector<std::string>& metric_labels() {
  static const std::vector<std::string> labels{"width_px",      "length_px",     "contour_area_px2",
                                               "avg_height_mm", "volume_mm_px2", "body_weight_lb"};
  return labels;
}

/// The five metrics plus body weight, in metric_labels() order.
inline std::vector<std::vector<double>> metric_columns(const std::vector<MetricsRecord>& rows) {
  std::vector<std::vector<double>> cols(6);
  for (const auto& r : rows) {
    if (!r.body_weight_lb) fail(ErrorKind::MissingWeight, "row without body weight", r.calf_id + "@" + r.obs_date.iso());
    cols[0].push_back(r.metrics.width_px);
    cols[1].push_back(r.metrics.length_px);
    cols[2].push_back(r.metrics.contour_area_px2);
    cols[3].push_back(r.metrics.avg_height_mm);
    cols[4].push_back(r.metrics.volume_mm_px2);
    cols[5].push_back(*r.body_weight_lb);
  }
  return cols;
}

inline CorrMatrix corr_matrix(const std::vector<MetricsRecord>& rows) {
  return corr_matrix(metric_labels(), metric_columns(rows));
}

/// Sample quantile with linear interpolation between order statistics
/// (Hyndman-Fan type 7).
inline double quantile7(std::vector<double> v, double p) {
  if (v.empty()) fail(ErrorKind::DegenerateInput, "quantile of an empty sample");
  std::sort(v.begin(), v.end());
  const double h = (static_cast<double>(v.size()) - 1.0) * p;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const std::size_t hi = std::min(lo + 1, v.size() - 1);
  return v[lo] + (h - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

struct AgeQuartile {
  double age_lo = 0;  ///< smallest age in the group
  double age_hi = 0;
  std::size_t rows = 0;
  CorrMatrix matrix;
};

/// Groups: age ≤ q25, (q25, q50], (q50, q75], > q75.
inline std::vector<AgeQuartile> age_quartile_matrices(const std::vector<MetricsRecord>& rows) {
  std::vector<double> ages;
  for (const auto& r : rows) ages.push_back(r.age_days);
  if (ages.empty()) fail(ErrorKind::InsufficientRows, "no rows", "Q1");
  const double q[3] = {quantile7(ages, 0.25), quantile7(ages, 0.5), quantile7(ages, 0.75)};
  std::vector<std::vector<MetricsRecord>> groups(4);
  for (const auto& r : rows) {
    const double a = r.age_days;
    const std::size_t g = a <= q[0] ? 0 : a <= q[1] ? 1 : a <= q[2] ? 2 : 3;
    groups[g].push_back(r);
  }
  std::vector<AgeQuartile> out;
  for (std::size_t g = 0; g < 4; ++g) {
    const std::string name = "Q" + std::to_string(g + 1);
    if (groups[g].size() < 3) fail(ErrorKind::InsufficientRows, "quartile has fewer than 3 rows", name);
    AgeQuartile aq;
    aq.rows = groups[g].size();
    aq.age_lo = std::numeric_limits<double>::infinity();
    aq.age_hi = -aq.age_lo;
    for (const auto& r : groups[g]) {
      aq.age_lo = std::min<double>(aq.age_lo, r.age_days);
      aq.age_hi = std::max<double>(aq.age_hi, r.age_days);
    }
    aq.matrix = corr_matrix(groups[g]);
    out.push_back(std::move(aq));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Mantel test

struct MantelResult {
  double r = 0;
  double p = 1;
  std::size_t n_perm = 0;
};

namespace stats_detail {

inline std::vector<double> upper_triangle(const CorrMatrix& m, const std::vector<std::size_t>& order) {
  std::vector<double> v;
  for (std::size_t i = 0; i < order.size(); ++i)
    for (std::size_t j = i + 1; j < order.size(); ++j) v.push_back(m.at(order[i], order[j]));
  return v;
}

}  // namespace stats_detail

/// Both matrices are first put in sorted-label order, so the result does not
/// depend on how the caller ordered the variables. Identity relabelings are
/// redrawn; permutations are generated in fixed seeded chunks.
inline MantelResult mantel(const CorrMatrix& a, const CorrMatrix& b, std::size_t n_perm, std::uint64_t seed,
                           int jobs = 1) {
  if (a.labels != b.labels) fail(ErrorKind::LabelMismatch, "matrices have different labels or order");
  const std::size_t n = a.size();
  if (n < 3) fail(ErrorKind::DegenerateInput, "upper triangle needs at least 3 entries");
  if (n_perm < 99) fail(ErrorKind::InvalidParams, "n_perm must be >= 99");
  std::vector<std::size_t> canon(n);
  std::iota(canon.begin(), canon.end(), 0);
  std::sort(canon.begin(), canon.end(), [&](std::size_t i, std::size_t j) { return a.labels[i] < a.labels[j]; });
  for (std::size_t i = 1; i < n; ++i) {
    if (a.labels[canon[i]] == a.labels[canon[i - 1]]) fail(ErrorKind::DegenerateInput, "duplicate label", a.labels[canon[i]]);
  }
  const auto ua = stats_detail::upper_triangle(a, canon);
  const double r_obs = pearson(ua, stats_detail::upper_triangle(b, canon));
  constexpr std::size_t kChunk = 256;
  const std::size_t chunks = (n_perm + kChunk - 1) / kChunk;
  const auto tallies = parallel_map<std::size_t>(chunks, jobs, [&](std::size_t c) {
    Rng rng(stream_seed(seed, c));
    std::size_t hits = 0;
    const std::size_t count = std::min(kChunk, n_perm - c * kChunk);
    std::vector<std::size_t> order(n);
    for (std::size_t k = 0; k < count; ++k) {
      std::vector<std::size_t> perm;
      do {
        perm = rng.permutation(n);
      } while (std::is_sorted(perm.begin(), perm.end()));
      for (std::size_t i = 0; i < n; ++i) order[i] = canon[perm[i]];
      if (pearson(ua, stats_detail::upper_triangle(b, order)) >= r_obs) ++hits;
    }
    return hits;
  });
  const std::size_t hits = std::accumulate(tallies.begin(), tallies.end(), std::size_t{0});
  return {r_obs, static_cast<double>(1 + hits) / static_cast<double>(n_perm + 1), n_perm};
}

// ---------------------------------------------------------------------------
// ANOVA, Tukey, Bonferroni

struct AnovaResult {
  double f = 0;
  double df1 = 0;
  double df2 = 0;
  double p = 1;
  double eta2 = 0;
  double ss_between = 0;
  double ss_within = 0;
  [[nodiscard]] double mse() const { return ss_within / df2; }
};

inline double mean_of(std::span<const double> v) {
  return v.empty() ? std::numeric_limits<double>::quiet_NaN() : std::accumulate(v.begin(), v.end(), 0.0) / v.size();
}

/// Sample standard deviation (n − 1 denominator); 0 for a single value.
inline double sd_of(std::span<const double> v) {
  if (v.size() < 2) return 0.0;
  const double m = mean_of(v);
  double ss = 0;
  for (double x : v) ss += (x - m) * (x - m);
  return std::sqrt(ss / (v.size() - 1));
}

inline AnovaResult anova_oneway(const std::vector<std::vector<double>>& groups) {
  if (groups.size() < 2) fail(ErrorKind::InsufficientGroups, "ANOVA needs at least 2 groups");
  std::size_t n = 0;
  for (std::size_t g = 0; g < groups.size(); ++g) {
    if (groups[g].size() < 2) fail(ErrorKind::DegenerateInput, "group has fewer than 2 values", std::to_string(g));
    for (double v : groups[g]) {
      if (!std::isfinite(v)) fail(ErrorKind::DegenerateInput, "non-finite value", std::to_string(g));
    }
    n += groups[g].size();
  }
  AnovaResult r;
  std::vector<double> means;
  for (const auto& g : groups) {
    const double m = mean_of(g);
    means.push_back(m);
    for (double v : g) r.ss_within += (v - m) * (v - m);
  }
  // Pairwise form of the between-group sum of squares: exactly zero when all
  // group means are equal.
  for (std::size_t i = 0; i < groups.size(); ++i)
    for (std::size_t j = i + 1; j < groups.size(); ++j) {
      const double d = means[i] - means[j];
      r.ss_between += static_cast<double>(groups[i].size()) * static_cast<double>(groups[j].size()) * d * d;
    }
  r.ss_between /= static_cast<double>(n);
  const double sst = r.ss_between + r.ss_within;
  if (!(sst > 0)) fail(ErrorKind::DegenerateInput, "total variance is zero");
  r.df1 = static_cast<double>(groups.size() - 1);
  r.df2 = static_cast<double>(n - groups.size());
  r.eta2 = r.ss_between / sst;
  if (r.ss_within == 0) {
    r.f = std::numeric_limits<double>::infinity();
    r.p = 0;
  } else {
    r.f = (r.ss_between / r.df1) / (r.ss_within / r.df2);
    r.p = f_sf(r.f, r.df1, r.df2);
  }
  return r;
}

inline double bonferroni(double p, double m) {
  if (!(m >= 1)) fail(ErrorKind::InvalidParams, "Bonferroni family size must be >= 1");
  if (!(p >= 0 && p <= 1)) fail(ErrorKind::InvalidParams, "p must lie in [0, 1]");
  return std::min(1.0, m * p);
}

struct TukeyPair {
  std::size_t i = 0;
  std::size_t j = 0;
  double diff = 0;  ///< mean_i − mean_j
  double q = 0;
  double p_adj = 1;
  bool significant = false;
};

struct TukeyResult {
  std::vector<TukeyPair> pairs;
  std::vector<std::string> letters;  ///< per group
};

/// Insert-and-absorb compact letter display; 'a' marks the set holding the
/// highest mean.
inline std::vector<std::string> letter_display(const std::vector<double>& means, const std::vector<TukeyPair>& pairs) {
  const std::size_t k = means.size();
  std::vector<std::vector<bool>> sets{std::vector<bool>(k, true)};
  for (const auto& pr : pairs) {
    if (!pr.significant) continue;
    std::vector<std::vector<bool>> next;
    for (const auto& s : sets) {
      if (s[pr.i] && s[pr.j]) {
        auto a = s, b = s;
        a[pr.i] = false;
        b[pr.j] = false;
        next.push_back(std::move(a));
        next.push_back(std::move(b));
      } else {
        next.push_back(s);
      }
    }
    // Absorb: drop duplicates and sets contained in another set.
    std::vector<std::vector<bool>> kept;
    for (std::size_t x = 0; x < next.size(); ++x) {
      bool absorbed = false;
      for (std::size_t y = 0; y < next.size() && !absorbed; ++y) {
        if (x == y) continue;
        bool subset = true;
        for (std::size_t g = 0; g < k && subset; ++g) subset = !next[x][g] || next[y][g];
        absorbed = subset && (next[x] != next[y] || y < x);
      }
      if (!absorbed) kept.push_back(next[x]);
    }
    sets = std::move(kept);
  }
  std::vector<std::size_t> rank(k);
  std::iota(rank.begin(), rank.end(), 0);
  std::stable_sort(rank.begin(), rank.end(), [&](std::size_t a, std::size_t b) { return means[a] > means[b]; });
  auto lead = [&](const std::vector<bool>& s) {
    for (std::size_t r = 0; r < k; ++r)
      if (s[rank[r]]) return r;
    return k;
  };
  std::stable_sort(sets.begin(), sets.end(), [&](const auto& a, const auto& b) { return lead(a) < lead(b); });
  std::vector<std::string> letters(k);
  for (std::size_t s = 0; s < sets.size(); ++s) {
    const char c = s < 26 ? static_cast<char>('a' + s) : static_cast<char>('A' + (s - 26) % 26);
    for (std::size_t g = 0; g < k; ++g)
      if (sets[s][g]) letters[g] += c;
  }
  return letters;
}

/// Tukey-Kramer pairwise comparisons using the ANOVA error mean square.
inline TukeyResult tukey_hsd(const std::vector<std::vector<double>>& groups, double alpha = 0.05) {
  const AnovaResult a = anova_oneway(groups);
  const std::size_t k = groups.size();
  std::vector<double> means;
  for (const auto& g : groups) means.push_back(mean_of(g));
  TukeyResult out;
  for (std::size_t i = 0; i < k; ++i) {
    for (std::size_t j = i + 1; j < k; ++j) {
      TukeyPair pr{i, j, means[i] - means[j], 0, 1, false};
      const double se = std::sqrt(a.mse() / 2 * (1.0 / groups[i].size() + 1.0 / groups[j].size()));
      if (se == 0) {
        pr.q = pr.diff == 0 ? 0 : std::numeric_limits<double>::infinity();
      } else {
        pr.q = std::fabs(pr.diff) / se;
      }
      pr.p_adj = std::clamp(1.0 - srd_cdf(pr.q, static_cast<int>(k), a.df2), 0.0, 1.0);
      pr.significant = pr.p_adj <= alpha;
      out.pairs.push_back(pr);
    }
  }
  out.letters = letter_display(means, out.pairs);
  return out;
}

/// One-way comparison of several samples as reported in the tables. Samples
/// that are all one value give p = 1, eta² = 0 and a single shared letter;
/// a sample with fewer than 2 values leaves the statistics NaN and letters "-".
struct GroupComparison {
  std::optional<AnovaResult> anova;
  double p = std::numeric_limits<double>::quiet_NaN();
  double p_adj = std::numeric_limits<double>::quiet_NaN();
  double eta2 = std::numeric_limits<double>::quiet_NaN();
  std::vector<std::string> letters;
};

inline GroupComparison compare_groups(const std::vector<std::vector<double>>& groups, double alpha, double family) {
  if (groups.size() < 2) fail(ErrorKind::InsufficientGroups, "need at least 2 groups");
  GroupComparison c;
  bool small = false, constant = true;
  for (const auto& g : groups) {
    small = small || g.size() < 2;
    for (double v : g) constant = constant && !g.empty() && v == groups[0].front();
  }
  if (small) {
    c.letters.assign(groups.size(), "-");
    return c;
  }
  if (constant) {
    c.p = c.p_adj = 1.0;
    c.eta2 = 0.0;
    c.letters.assign(groups.size(), "a");
    return c;
  }
  c.anova = anova_oneway(groups);
  c.p = c.anova->p;
  c.p_adj = bonferroni(c.p, family);
  c.eta2 = c.anova->eta2;
  c.letters = tukey_hsd(groups, alpha).letters;
  return c;
}

}  // namespace calfweight
