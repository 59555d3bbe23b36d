// Acceptance suite: one PASS/FAIL line per criterion, exit status 1 if any
// criterion fails. Tolerances and budgets are pinned here.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "calfweight/bodymetrics.hpp"
#include "calfweight/cli.hpp"
#include "calfweight/evalharness.hpp"
#include "calfweight/models.hpp"
#include "calfweight/segeval.hpp"
#include "calfweight/segpipeline.hpp"
#include "calfweight/stats.hpp"
#include "calfweight/synthgen.hpp"
#include "support.hpp"

using namespace calfweight;
namespace fs = std::filesystem;

namespace {

class Check {
 public:
  void expect(bool ok, const std::string& what) {
    if (ok) return;
    ++failures_;
    if (notes_.size() < 5) notes_.push_back(what);
  }
  void near(double got, double want, double tol, const std::string& what) {
    std::ostringstream s;
    s.precision(12);
    s << what << ": got " << got << ", want " << want << " +- " << tol;
    expect(std::fabs(got - want) <= tol, s.str());
  }
  void summary(std::string s) { summary_ = std::move(s); }

  [[nodiscard]] bool ok() const { return failures_ == 0; }
  [[nodiscard]] const std::vector<std::string>& notes() const { return notes_; }
  [[nodiscard]] std::size_t failures() const { return failures_; }
  [[nodiscard]] const std::string& summary() const { return summary_; }

 private:
  std::size_t failures_ = 0;
  std::vector<std::string> notes_;
  std::string summary_;
};

struct Criterion {
  int id;
  std::string name;
  double time_limit_s;  ///< 0 when the criterion has no runtime bound
  std::function<void(Check&)> body;
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::string fmt(double v, int precision = 4) {
  std::ostringstream s;
  s.precision(precision);
  s << v;
  return s.str();
}

Design random_design(Rng& rng, int n, int p) {
  Design d;
  for (int j = 0; j < p; ++j) d.names.push_back("x" + std::to_string(j));
  d.x.resize(n, p);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < p; ++j) d.x(i, j) = rng.normal(10.0 * (j + 1), 1.0 + j);
  return d;
}

Design one_column(const std::vector<double>& v) {
  Design d{{"f"}, Eigen::MatrixXd(static_cast<Eigen::Index>(v.size()), 1)};
  for (std::size_t i = 0; i < v.size(); ++i) d.x(static_cast<Eigen::Index>(i), 0) = v[i];
  return d;
}

Eigen::VectorXd vec(const std::vector<double>& v) {
  return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

bool loss_monotone(const GbmModel& m) {
  double scale = 0;
  for (const auto& t : m.trees)
    for (const auto& n : t.nodes) scale += std::fabs(n.weight);
  scale = scale * m.hyper.learning_rate + std::fabs(m.base_score);
  for (std::size_t k = 1; k < m.train_loss.size(); ++k) {
    if (m.train_loss[k] > m.train_loss[k - 1] + gbm_detail::loss_slack(m.train_loss[k - 1], scale, static_cast<int>(k))) {
      return false;
    }
  }
  return m.train_loss.size() == static_cast<std::size_t>(m.hyper.n_estimators) + 1;
}

// ---------------------------------------------------------------------------

void mask_algebra(Check& c) {
  using calfweight::testing::filled_rect;
  const auto s = score_masks(filled_rect(8, 8, 0, 0, 4, 8), filled_rect(8, 8, 0, 0, 8, 4));
  c.expect(s.iou == 1.0 / 3, "8x8 example IoU " + fmt(s.iou, 17));
  c.expect(s.dice == 0.5, "8x8 example dice " + fmt(s.dice, 17));
  c.expect(s.pixel_accuracy == 0.5, "8x8 example accuracy " + fmt(s.pixel_accuracy, 17));
  Rng rng(2024);
  double worst = 0;
  for (int t = 0; t < 1000; ++t) {
    const int w = 8 + static_cast<int>(rng.below(56)), h = 8 + static_cast<int>(rng.below(56));
    const auto p = calfweight::testing::random_blobs(rng, w, h, 1 + static_cast<int>(rng.below(4)));
    const auto q = calfweight::testing::random_blobs(rng, w, h, 1 + static_cast<int>(rng.below(4)));
    const auto r = score_masks(p, q);
    worst = std::max(worst, std::fabs(r.dice - 2 * r.iou / (1 + r.iou)));
  }
  c.expect(worst <= 1e-12, "dice identity off by " + fmt(worst));
  c.summary("1000 pairs, max |dice - 2 IoU/(1+IoU)| = " + fmt(worst, 3));
}

void segmentation_round_trip(Check& c) {
  ThresholdParams p;
  p.template_mask = default_template();
  SynthConfig herd;
  herd.n_calves = 50;
  herd.obs_min = herd.obs_max = 10;
  herd.seed = 77;

  double min_iou = 1;
  {
    const auto plan = make_plan(herd);
    for (const auto& op : plan.observations)
      for (const auto& fp : op.frames) {
        const auto f = render_frame(plan, op, fp);
        const auto out = segment_threshold(f.frame, p);
        c.expect(out.success(), "clean frame " + fp.frame_id + " not segmented");
        if (out.success()) min_iou = std::min(min_iou, calfweight::testing::iou(*out.mask, *f.truth));
      }
  }
  c.expect(min_iou >= 0.99, "minimum IoU " + fmt(min_iou));

  herd.distractor_rate = 0.4;
  const auto t0 = Clock::now();
  const auto plan = make_plan(herd);
  std::vector<SegOutcome> outcomes;
  for (const auto& op : plan.observations)
    for (const auto& fp : op.frames) {
      const auto f = render_frame(plan, op, fp);
      outcomes.push_back(segment_threshold(f.frame, p));
      c.expect(outcomes.back().success() == f.truth.has_value(), "frame " + fp.frame_id + " misclassified");
    }
  const double elapsed = seconds_since(t0);
  c.expect(outcomes.size() == 500, "expected 500 frames, got " + std::to_string(outcomes.size()));
  c.expect(std::fabs(success_rate(outcomes) - 0.6) < 1e-15, "success rate " + fmt(success_rate(outcomes), 17));
  c.expect(elapsed < 60, "500 frames took " + fmt(elapsed) + " s");
  c.summary("min IoU " + fmt(min_iou) + " over 500 clean frames; success " + fmt(100 * success_rate(outcomes)) +
            "% at distractor rate 0.4; 500 frames in " + fmt(elapsed, 3) + " s");
}

void body_metrics(Check& c) {
  const auto mask = calfweight::testing::filled_rect(20, 10, 3, 2, 10, 4);
  const DepthGrid flat{20, 10, std::vector<float>(200, 1010.0f)};
  const auto m = extract_metrics(mask, flat, 1510);
  c.expect(m.contour_area_px2 == 40, "area " + fmt(m.contour_area_px2));
  c.expect(m.avg_height_mm == 500, "avg height " + fmt(m.avg_height_mm));
  c.expect(m.volume_mm_px2 == 20'000, "volume " + fmt(m.volume_mm_px2));
  c.expect(m.length_px == 10, "length " + fmt(m.length_px));
  c.expect(m.width_px == 4, "width " + fmt(m.width_px));
  auto holes = flat;
  for (int k = 0; k < 12; ++k) holes.at(3 + (k * 7) % 10, 2 + k % 4) = 0.0f;
  c.expect(extract_metrics(mask, holes, 1510) == m, "imputation changed uniform-depth metrics");
  c.summary("area 40, height 500, volume 20000, 10 x 4; 12 missing pixels imputed without change");
}

void ols_oracle(Check& c) {
  Rng rng(404);
  double worst_coef = 0, worst_shift = 0;
  for (int t = 0; t < 100; ++t) {
    const int p = 1 + static_cast<int>(rng.below(6));
    const int n = p + 2 + static_cast<int>(rng.below(60));
    const auto d = random_design(rng, n, p);
    Eigen::VectorXd beta(p);
    for (int j = 0; j < p; ++j) beta(j) = rng.uniform(-3, 3);
    const double b0 = rng.uniform(-100, 100);
    const Eigen::VectorXd y = (d.x * beta).array() + b0;
    const auto m = ols_fit(d, y);
    worst_coef = std::max(worst_coef, std::fabs(m.intercept - b0));
    for (int j = 0; j < p; ++j) worst_coef = std::max(worst_coef, std::fabs(m.coefficients[static_cast<std::size_t>(j)] - beta(j)));

    Eigen::VectorXd noisy = y;
    for (int i = 0; i < n; ++i) noisy(i) += rng.normal(0, 5);
    const double shift = rng.uniform(-1000, 1000);
    const auto a = ols_fit(d, noisy), b = ols_fit(d, (noisy.array() + shift).matrix());
    worst_shift = std::max(worst_shift, std::fabs(b.intercept - a.intercept - shift) / std::max(1.0, std::fabs(shift)));
    for (int j = 0; j < p; ++j) {
      worst_shift = std::max(worst_shift, std::fabs(b.coefficients[static_cast<std::size_t>(j)] - a.coefficients[static_cast<std::size_t>(j)]));
    }
  }
  c.expect(worst_coef < 1e-8, "exact recovery off by " + fmt(worst_coef));
  c.expect(worst_shift < 1e-8, "shift invariance off by " + fmt(worst_shift));
  c.summary("100 datasets; max |coef error| " + fmt(worst_coef, 3) + ", max shift deviation " + fmt(worst_shift, 3));
}

void gbm_properties(Check& c) {
  // Hand-traced stump: base 5, gradients ±5, G = ±10, H = 2, λ = 1 → w = ∓10/3.
  const auto x = one_column({1, 2, 3, 4});
  const auto stump = gbm_fit(x, vec({0, 0, 10, 10}), {0.5, 1, 0.0, 1.0, 1, 1});
  c.expect(stump.trees.size() == 1 && stump.trees[0].nodes.size() == 3, "stump structure");
  if (stump.trees.size() == 1 && stump.trees[0].nodes.size() == 3) {
    c.expect(stump.trees[0].nodes[0].feature == 0 && stump.trees[0].nodes[0].threshold == 2.5, "stump split");
    const auto p = predict(stump, x);
    const double lo = 5 + 0.5 * (-10.0 / 3), hi = 5 + 0.5 * (10.0 / 3);
    c.near(p(0), lo, 1e-12, "stump left");
    c.near(p(1), lo, 1e-12, "stump left");
    c.near(p(2), hi, 1e-12, "stump right");
    c.near(p(3), hi, 1e-12, "stump right");
  }

  Rng rng(505);
  std::size_t fits = 0;
  for (int t = 0; t < 20; ++t) {
    const int n = 2 + static_cast<int>(rng.below(99));
    const auto d = random_design(rng, n, 4);
    Eigen::VectorXd y(n);
    for (int i = 0; i < n; ++i) y(i) = rng.uniform(0, 1);
    const auto m = gbm_fit(d, y, {1.0, 10, 0.0, 1e6, 6, 1});
    ++fits;
    c.expect(loss_monotone(m), "training loss rose (lambda 1e6)");
    // every leaf: |w| = |G|/(H + λ) ≤ n·max|g|/λ, and max|g| ≤ 1 here
    for (const auto& tree : m.trees)
      for (const auto& node : tree.nodes) c.expect(std::fabs(node.weight) <= n / 1e6, "leaf weight beyond shrinkage bound");
    const double dev = (predict(m, d).array() - y.mean()).abs().maxCoeff();
    c.expect(dev <= 10.0 * n / 1e6, "prediction beyond shrinkage bound: " + fmt(dev));
  }

  // Tuned GBM against OLS on step-shaped weights: 40-calf herds, one held-out
  // grouped fold, 15 search draws per trial.
  int wins = 0;
  for (int t = 0; t < 100; ++t) {
    SynthConfig herd;
    herd.nonlinear = true;
    herd.n_calves = 40;
    herd.seed = 1000 + static_cast<std::uint64_t>(t);
    const auto data = dataset_of(generate_table(herd));
    const auto split = grouped_kfold(data.calf, 5, herd.seed)[0];
    const auto train = data.subset(split.train_idx), test = data.subset(split.test_idx);
    auto spec = model_spec(ModelKind::Gbm);
    spec.tuning = GbmTuning{};
    spec.tuning->iterations = 15;
    const auto tuned = resolve_tuning({spec}, train, herd.seed, 1);
    const auto gbm = gbm_fit(train.x, train.y, tuned[0].gbm);
    const auto ols = ols_fit(train.x, train.y);
    fits += 1;
    c.expect(loss_monotone(gbm), "training loss rose in trial " + std::to_string(t));
    wins += reg_metrics(test.y, predict(gbm, test.x)).rmse < reg_metrics(test.y, predict(ols, test.x)).rmse;
  }
  c.expect(wins >= 95, "tuned GBM won only " + std::to_string(wins) + "/100");
  c.summary("stump exact; shrinkage bound on 20 fits; loss monotone on " + std::to_string(fits) + " fits; GBM beat OLS in " +
            std::to_string(wins) + "/100 trials");
}

void lmm_oracle(Check& c) {
  Rng rng(606);
  double worst_var = 0, worst_blup = 0;
  int designs = 0;
  while (designs < 20) {
    const int J = 4 + static_cast<int>(rng.below(10)), n = 3 + static_cast<int>(rng.below(6));
    Eigen::VectorXd y(J * n);
    std::vector<std::string> ids;
    for (int j = 0; j < J; ++j) {
      const double u = rng.normal(0, 2);
      for (int k = 0; k < n; ++k) {
        y(j * n + k) = 80 + u + rng.normal(0, 1);
        ids.push_back("c" + std::to_string(j));
      }
    }
    std::vector<double> means(static_cast<std::size_t>(J));
    const double grand = y.mean();
    double ssw = 0, ssb = 0;
    for (int j = 0; j < J; ++j) {
      means[static_cast<std::size_t>(j)] = y.segment(j * n, n).mean();
      ssw += (y.segment(j * n, n).array() - means[static_cast<std::size_t>(j)]).square().sum();
      ssb += n * std::pow(means[static_cast<std::size_t>(j)] - grand, 2);
    }
    const double msw = ssw / (J * (n - 1)), msb = ssb / (J - 1);
    if (msb <= msw) continue;  // the closed-form estimator would be negative
    ++designs;
    const auto m = lmm_fit(Design{{}, Eigen::MatrixXd(J * n, 0)}, y, ids);
    const double su2 = (msb - msw) / n;
    worst_var = std::max({worst_var, std::fabs(m.sigma_e2 - msw), std::fabs(m.sigma_u2 - su2)});
    for (int j = 0; j < J; ++j) {
      const double shrunk = n * su2 / (n * su2 + msw) * (means[static_cast<std::size_t>(j)] - grand);
      worst_blup = std::max(worst_blup, std::fabs(m.blup.at("c" + std::to_string(j)) - shrunk));
    }
  }
  c.expect(worst_var <= 1e-6, "variance components off by " + fmt(worst_var));
  c.expect(worst_blup <= 1e-6, "BLUPs off by " + fmt(worst_blup));

  // 50 calves × 10 records, σ_u² = 4, σ_e² = 1, two covariates.
  const auto d = random_design(rng, 500, 2);
  Eigen::VectorXd y(500);
  std::vector<std::string> ids;
  for (int j = 0; j < 50; ++j) {
    const double u = rng.normal(0, 2);
    for (int k = 0; k < 10; ++k) {
      const int i = j * 10 + k;
      y(i) = 20 + 0.5 * d.x(i, 0) - 0.25 * d.x(i, 1) + u + rng.normal(0, 1);
      ids.push_back("c" + std::to_string(j));
    }
  }
  const auto sim = lmm_fit(d, y, ids);
  c.expect(std::fabs(sim.sigma_u2 - 4) <= 0.3 * 4, "sigma_u2 " + fmt(sim.sigma_u2));
  c.expect(std::fabs(sim.sigma_e2 - 1) <= 0.3 * 1, "sigma_e2 " + fmt(sim.sigma_e2));

  LmmOptions fixed;
  fixed.fixed_theta = 0.0;
  const auto flat = lmm_fit(d, y, ids, fixed);
  const auto ols = ols_fit(d, y);
  double worst_beta = std::fabs(flat.intercept - ols.intercept);
  for (std::size_t j = 0; j < 2; ++j) worst_beta = std::max(worst_beta, std::fabs(flat.beta[j] - ols.coefficients[j]));
  c.expect(worst_beta <= 1e-8, "theta = 0 beta off OLS by " + fmt(worst_beta));
  c.summary("20 balanced designs: variance error " + fmt(worst_var, 3) + ", BLUP error " + fmt(worst_blup, 3) +
            "; 50x10 recovers " + fmt(sim.sigma_u2) + "/" + fmt(sim.sigma_e2) + "; theta=0 beta error " + fmt(worst_beta, 3));
}

void harness_invariants(Check& c) {
  SynthConfig herd;
  herd.seed = 707;
  const auto data = dataset_of(generate_table(herd));
  std::set<std::string> all(data.calf.begin(), data.calf.end());
  c.expect(all.size() == 20, "default herd has " + std::to_string(all.size()) + " calves");
  std::size_t folds = 0;
  for (std::uint64_t r = 0; r < 100; ++r) {
    for (const auto& plan : grouped_kfold(data.calf, 5, herd.seed ^ r)) {
      ++folds;
      std::set<std::string> train, test;
      for (auto i : plan.train_idx) train.insert(data.calf[i]);
      for (auto i : plan.test_idx) test.insert(data.calf[i]);
      c.expect(test.size() == 4, "test fold with " + std::to_string(test.size()) + " calves");
      for (const auto& calf : test) c.expect(!train.count(calf), "calf " + calf + " on both sides");
      c.expect(plan.train_idx.size() + plan.test_idx.size() == data.size(), "fold does not cover every row");
    }
  }
  const auto series = eligible_series(data, 5);
  std::size_t plans = 0;
  for (std::size_t it = 0; it < 100; ++it) {
    const auto keep = jackknife_keep(series, herd.seed, it);
    for (int ratio : {90, 80, 70, 60, 50}) {
      const auto plan = longitudinal_split(data.calf, data.date, ratio, keep);
      ++plans;
      std::map<std::string, Date> last_train;
      for (auto i : plan.train_idx) {
        auto [pos, fresh] = last_train.emplace(data.calf[i], data.date[i]);
        if (!fresh) pos->second = std::max(pos->second, data.date[i]);
      }
      for (auto i : plan.test_idx) {
        const auto pos = last_train.find(data.calf[i]);
        c.expect(pos != last_train.end() && pos->second < data.date[i], "test record not after training span of " + data.calf[i]);
      }
    }
  }
  c.summary(std::to_string(folds) + " grouped folds disjoint with 4 test calves each; " + std::to_string(plans) +
            " longitudinal plans strictly ordered");
}

void model_ordering(Check& c) {
  SynthConfig herd;
  herd.seed = 808;
  const auto data = dataset_of(generate_table(herd));
  auto gbm = model_spec(ModelKind::Gbm);
  gbm.tuning = GbmTuning{};
  gbm.tuning->iterations = 50;
  LongitudinalOptions opt;
  opt.ratios = {90};
  opt.iterations = 100;
  opt.seed = herd.seed;
  const auto t = longitudinal_eval(data, {model_spec(ModelKind::Lmm), model_spec(ModelKind::Ols), gbm}, opt);
  const auto& r2 = t.at("r2", "90:10");
  c.expect(r2.mean[0] >= r2.mean[1], "LMM below OLS");
  c.expect(r2.mean[1] >= r2.mean[2], "OLS below GBM");
  c.expect(r2.cmp.anova.has_value() && r2.cmp.anova->p < 0.05, "ANOVA p " + fmt(r2.cmp.p));
  c.expect(r2.cmp.eta2 > 0.5, "eta2 " + fmt(r2.cmp.eta2));
  c.summary("R2 lmm " + fmt(r2.mean[0]) + " +- " + fmt(r2.sd[0], 2) + ", ols " + fmt(r2.mean[1]) + ", gbm " + fmt(r2.mean[2]) +
            "; p " + fmt(r2.cmp.p, 3) + ", eta2 " + fmt(r2.cmp.eta2));
}

void stats_kernel(Check& c) {
  double worst_f = 0;
  for (int d = 1; d <= 30; ++d) worst_f = std::max(worst_f, std::fabs(f_cdf(1.0, d, d) - 0.5));
  c.expect(worst_f <= 1e-12, "f_cdf(1, d, d) off by " + fmt(worst_f));

  Rng rng(909);
  std::size_t below = 0;
  constexpr std::size_t kDraws = 10'000'000;
  for (std::size_t n = 0; n < kDraws; ++n) {
    double lo = 1e300, hi = -1e300, chi = 0;
    for (int i = 0; i < 3; ++i) {
      const double z = rng.normal();
      lo = std::min(lo, z);
      hi = std::max(hi, z);
    }
    for (int i = 0; i < 10; ++i) {
      const double z = rng.normal();
      chi += z * z;
    }
    below += (hi - lo) <= 3.88 * std::sqrt(chi / 10);
  }
  const double mc = static_cast<double>(below) / kDraws, srd = srd_cdf(3.88, 3, 10);
  c.near(srd, 0.95, 1e-3, "srd_cdf(3.88; 3, 10)");
  c.near(srd, mc, 1e-3, "srd_cdf against simulation");

  std::vector<double> ps;
  for (int t = 0; t < 2000; ++t) {
    std::vector<std::vector<double>> groups(3, std::vector<double>(8));
    for (auto& g : groups)
      for (auto& v : g) v = rng.normal(50, 4);
    ps.push_back(anova_oneway(groups).p);
  }
  std::sort(ps.begin(), ps.end());
  double ks = 0;
  for (std::size_t i = 0; i < ps.size(); ++i) {
    const double n = static_cast<double>(ps.size());
    ks = std::max({ks, std::fabs(ps[i] - static_cast<double>(i) / n), std::fabs(ps[i] - static_cast<double>(i + 1) / n)});
  }
  c.expect(ks < 0.05, "KS statistic " + fmt(ks));

  std::vector<std::vector<double>> cols(6);
  for (int r = 0; r < 40; ++r) {
    const double common = rng.normal();
    for (std::size_t j = 0; j < cols.size(); ++j) cols[j].push_back(common * static_cast<double>(j % 3) + rng.normal());
  }
  const auto m = corr_matrix({"a", "b", "c", "d", "e", "f"}, cols);
  const auto same = mantel(m, m, 999, 3);
  c.near(same.r, 1.0, 1e-12, "Mantel r on identical matrices");
  c.expect(same.p == 1.0 / 1000, "Mantel p " + fmt(same.p, 17));
  c.summary("f_cdf error " + fmt(worst_f, 3) + "; srd_cdf " + fmt(srd, 6) + " vs simulated " + fmt(mc, 6) + "; KS " + fmt(ks, 3) +
            "; Mantel r " + fmt(same.r) + " p " + fmt(same.p));
}

// ---------------------------------------------------------------------------

std::map<std::string, std::string> snapshot(const fs::path& root) {
  std::map<std::string, std::string> files;
  if (!fs::exists(root)) return files;
  for (const auto& e : fs::recursive_directory_iterator(root)) {
    if (!e.is_regular_file()) continue;
    std::ifstream in(e.path(), std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    files[fs::relative(e.path(), root).string()] = s.str();
  }
  return files;
}

int invoke(const std::vector<std::string>& args) {
  std::vector<const char*> argv{"calfmetrics"};
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream sink;
  auto* saved = std::cout.rdbuf(sink.rdbuf());
  const int code = cli::run(static_cast<int>(argv.size()), argv.data());
  std::cout.rdbuf(saved);
  return code;
}

void determinism(Check& c) {
  const fs::path dir = fs::temp_directory_path() / ("calfweight_acceptance_" + std::to_string(::getpid()));
  fs::remove_all(dir);
  const fs::path home = fs::current_path();
  const std::vector<std::string> commands{"synth", "segment", "segment labels", "metrics", "segeval", "correlate", "cv", "longitudinal"};
  // Each run works in its own directory with identical relative paths, so
  // the argument strings (part of the config hash) match too.
  auto pipeline = [&](const std::string& tag, const std::string& jobs) {
    fs::create_directories(dir / tag);
    fs::current_path(dir / tag);
    std::ofstream("run.ini") << "seed = 21\n\n[paths]\ndata = bundle\nmasks = seg\n\n"
                                "[synth]\nn_calves = 8\nobs_min = 6\nobs_max = 7\ndistractor_rate = 0.1\n\n"
                                "[gbm]\nn_estimators = 20,150\nsearch_iterations = 4\n\n[cv]\nrepeats = 4\n\n"
                                "[longitudinal]\nratios = 90,70\niterations = 4\n";
    const std::vector<std::vector<std::string>> steps{
        {"synth", "--config", "run.ini", "--out", "bundle"},
        {"segment", "--config", "run.ini", "--out", "seg"},
        {"segment", "--config", "run.ini", "--method", "labels", "--labels", "bundle/model_labels.jsonl", "--out", "model"},
        {"metrics", "--config", "run.ini", "--out", "metrics"},
        {"segeval", "--config", "run.ini", "--truth", "bundle", "--pred", "threshold=seg", "--pred", "model=model", "--out", "segeval"},
        {"correlate", "--config", "run.ini", "--metrics", "metrics/metrics.csv", "--mantel", "--n-perm", "199", "--out", "corr"},
        {"cv", "--config", "run.ini", "--metrics", "metrics/metrics.csv", "--out", "cv"},
        {"longitudinal", "--config", "run.ini", "--metrics", "metrics/metrics.csv", "--out", "long"},
    };
    for (std::size_t i = 0; i < steps.size(); ++i) {
      auto args = steps[i];
      args.insert(args.end(), {"--jobs", jobs});
      const int code = invoke(args);
      c.expect(code == 0, commands[i] + " exited " + std::to_string(code) + " (" + tag + ")");
    }
    fs::current_path(home);
    return snapshot(dir / tag);
  };
  const auto first = pipeline("a", "1"), again = pipeline("b", "1"), wide = pipeline("c", "3");
  std::size_t reports = 0;
  for (const auto& [name, content] : first) {
    reports += name.size() > 4 && name.substr(name.size() - 4) == ".csv";
    c.expect(again.count(name) && again.at(name) == content, name + " differs on re-run");
    c.expect(wide.count(name) && wide.at(name) == content, name + " differs at --jobs 3");
  }
  c.expect(first.size() == again.size() && first.size() == wide.size(), "runs produced different file sets");
  for (const char* report : {"seg/segmentation.csv", "model/segmentation.csv", "metrics/metrics.csv", "segeval/segeval_report.csv",
                             "corr/corr_all.csv", "corr/mantel.csv", "cv/cv_report.csv", "long/longitudinal_report.csv"}) {
    c.expect(first.count(report), std::string("missing ") + report);
  }
  fs::remove_all(dir);
  c.summary(std::to_string(commands.size()) + " invocations, " + std::to_string(first.size()) + " files (" +
            std::to_string(reports) + " csv) identical across re-run and --jobs 1/3");
}

}  // namespace

int main() {
  const std::vector<Criterion> criteria{
      {1, "mask algebra", 5, mask_algebra},
      {2, "segmentation round trip", 0, segmentation_round_trip},
      {3, "body metrics on a uniform block", 0, body_metrics},
      {4, "OLS oracle", 0, ols_oracle},
      {5, "GBM properties and tuned GBM vs OLS", 180, gbm_properties},
      {6, "LMM oracle", 0, lmm_oracle},
      {7, "harness invariants", 0, harness_invariants},
      {8, "longitudinal model ordering", 600, model_ordering},
      {9, "stats kernel", 0, stats_kernel},
      {10, "determinism across runs and --jobs", 0, determinism},
  };
  int failed = 0;
  for (const auto& k : criteria) {
    Check check;
    const auto t0 = Clock::now();
    try {
      k.body(check);
    } catch (const std::exception& e) {
      check.expect(false, std::string("threw: ") + e.what());
    }
    const double elapsed = seconds_since(t0);
    if (k.time_limit_s > 0) check.expect(elapsed < k.time_limit_s, "runtime " + fmt(elapsed) + " s over " + fmt(k.time_limit_s) + " s");
    failed += !check.ok();
    std::cout << (check.ok() ? "PASS" : "FAIL") << "  criterion " << k.id << ": " << k.name << " [" << fmt(elapsed, 3) << " s] "
              << check.summary() << "\n";
    for (const auto& note : check.notes()) std::cout << "        " << note << "\n";
    if (check.failures() > check.notes().size()) std::cout << "        (" << check.failures() - check.notes().size() << " more)\n";
    std::cout.flush();
  }
  std::cout << (failed == 0 ? "all 10 criteria passed" : std::to_string(failed) + " of 10 criteria failed") << "\n";
  return failed == 0 ? 0 : 1;
}
