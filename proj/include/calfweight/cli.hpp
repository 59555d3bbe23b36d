#pragma once

// The calfmetrics command-line front end. Each subcommand reads its inputs,
// never modifies them, and writes CSV reports whose first line records the
// config hash and seed.

#include <CLI11.hpp>

#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "calfweight/bodymetrics.hpp"
#include "calfweight/error.hpp"
#include "calfweight/evalharness.hpp"
#include "calfweight/ingest.hpp"
#include "calfweight/models.hpp"
#include "calfweight/parallel.hpp"
#include "calfweight/png_io.hpp"
#include "calfweight/runconfig.hpp"
#include "calfweight/segeval.hpp"
#include "calfweight/segpipeline.hpp"
#include "calfweight/stats.hpp"
#include "calfweight/synthgen.hpp"

namespace calfweight::cli {

namespace fs = std::filesystem;

inline constexpr int kPaperSearchIterations = 1000;

struct Common {
  int jobs = 0;  ///< 0: all available cores
  std::optional<std::uint64_t> seed;
  std::string config;
  std::string out;
};

/// Order: --seed, then CALFMETRICS_SEED, then the config's top-level `seed`.
inline std::optional<std::uint64_t> resolve_seed(const Common& c, const RunConfig* cfg) {
  if (c.seed) return c.seed;
  if (const char* env = std::getenv("CALFMETRICS_SEED"); env && *env) {
    const auto v = text::parse_int(env);
    if (!v || *v < 0) fail(ErrorKind::ConfigError, "CALFMETRICS_SEED is not a non-negative integer", env);
    return static_cast<std::uint64_t>(*v);
  }
  if (cfg && cfg->has("seed")) {
    const auto v = cfg->integer("seed", 0);
    if (v < 0) fail(ErrorKind::ConfigError, "seed must be non-negative", cfg->origin());
    return static_cast<std::uint64_t>(v);
  }
  return std::nullopt;
}

inline std::uint64_t require_seed(const Common& c, const RunConfig* cfg) {
  const auto s = resolve_seed(c, cfg);
  if (!s) fail(ErrorKind::ConfigError, "a seed is required: pass --seed, set CALFMETRICS_SEED or add 'seed' to the config");
  return *s;
}

inline int jobs_of(const Common& c) { return c.jobs > 0 ? c.jobs : default_jobs(); }

inline RunConfig config_or_empty(const Common& c) { return c.config.empty() ? RunConfig{} : RunConfig::load(c.config); }

/// Hash input: the command, its effective options, the config entries and the
/// content of every input file. Output paths and --jobs are left out so that
/// reports compare byte for byte across them.
struct Settings {
  std::string text;

  Settings& add(const std::string& key, const std::string& value) {
    text += key + "=" + value + "\n";
    return *this;
  }
  Settings& add_file(const std::string& key, const fs::path& p) {
    return add(key, hex64(fnv1a64(text::read_file(p))));
  }
};

inline void write_report(const fs::path& path, const std::string& command, const Settings& s, std::uint64_t seed,
                         const std::string& body) {
  text::write_file(path, provenance_line(command, s.text, seed) + body);
}

inline fs::path bundle_of(const RunConfig& cfg) {
  const auto p = cfg.existing_path("paths.data");
  if (!p) fail(ErrorKind::ConfigError, "[paths] data (the dataset bundle) is required", cfg.origin());
  return *p;
}

inline std::vector<std::string> frame_ids_of(const std::vector<CalfObservation>& obs) {
  std::vector<std::string> ids;
  for (const auto& o : obs) ids.insert(ids.end(), o.frame_ids.begin(), o.frame_ids.end());
  return ids;
}

// ---------------------------------------------------------------------------

inline int cmd_synth(const Common& c) {
  const auto cfg = RunConfig::load(c.config);
  const auto seed = require_seed(c, &cfg);
  const auto sc = synth_config_from(cfg, seed);
  const auto summary = write_bundle(sc, c.out, jobs_of(c));
  std::cout << "frames=" << summary.frames << " calf_frames=" << summary.calf_frames
            << " observations=" << summary.observations << "\n";
  return 0;
}

struct SegmentArgs {
  std::string method = "threshold";
  std::string labels;
};

inline int cmd_segment(const Common& c, const SegmentArgs& a) {
  const auto cfg = RunConfig::load(c.config);
  const std::uint64_t seed = resolve_seed(c, &cfg).value_or(0);
  const DatasetLayout bundle{bundle_of(cfg)};
  const auto obs = load_manifest(bundle.manifest());
  const auto ids = frame_ids_of(obs);
  Settings s;
  s.add("command", "segment").add("method", a.method).add_file("manifest", bundle.manifest());
  s.text += cfg.canonical();

  std::vector<SegOutcome> outcomes;
  if (a.method == "threshold") {
    ThresholdParams p = threshold_params_from(cfg);
    const fs::path tpl = cfg.existing_path("paths.template").value_or(bundle.template_mask());
    p.template_mask = read_mask_png(tpl);
    p.validate();
    s.add_file("template", tpl);
    outcomes = parallel_map<SegOutcome>(ids.size(), jobs_of(c), [&](std::size_t i) {
      return segment_threshold(ids[i], read_png(bundle.frame_png(ids[i])), p);
    });
  } else if (a.method == "labels") {
    fs::path labels_path = bundle.labels();
    if (!a.labels.empty()) {
      labels_path = a.labels;
    } else if (const auto p = cfg.existing_path("paths.labels")) {
      labels_path = *p;
    }
    const auto labels = load_mask_labels(labels_path);
    s.add_file("labels", labels_path);
    outcomes = parallel_map<SegOutcome>(ids.size(), jobs_of(c), [&](std::size_t i) {
      const Raster8 frame = read_png(bundle.frame_png(ids[i]));
      return segment_from_labels(ids[i], labels, frame.width(), frame.height());
    });
  } else {
    fail(ErrorKind::UsageError, "--method must be threshold or labels", a.method);
  }

  const fs::path out(c.out);
  fs::create_directories(out / "masks");
  parallel_for(outcomes.size(), jobs_of(c), [&](std::size_t i) {
    if (outcomes[i].success()) write_mask_png(out / "masks" / (outcomes[i].frame_id + ".png"), *outcomes[i].mask);
  });
  write_report(out / "segmentation.csv", "segment", s, seed, format_segmentation_csv(outcomes));
  std::cout << "frames=" << outcomes.size() << " success_rate=" << text::format_double(success_rate(outcomes)) << "\n";
  return 0;
}

struct MetricsArgs {
  std::string masks;
};

inline int cmd_metrics(const Common& c, const MetricsArgs& a) {
  const auto cfg = RunConfig::load(c.config);
  const std::uint64_t seed = resolve_seed(c, &cfg).value_or(0);
  const DatasetLayout bundle{bundle_of(cfg)};
  fs::path masks;
  if (!a.masks.empty()) {
    masks = a.masks;
  } else if (const auto p = cfg.existing_path("paths.masks")) {
    masks = *p;
  } else {
    fail(ErrorKind::ConfigError, "a segmentation output directory is required: --masks or [paths] masks");
  }
  if (fs::is_directory(masks / "masks")) masks /= "masks";
  const auto mode = parse_volume_mode(cfg.text("metrics.volume_mode").value_or("height"));
  const double camera = cfg.number("metrics.camera_height_mm", 1510.0);
  if (!(camera > 0)) fail(ErrorKind::ConfigError, "camera_height_mm must be > 0", cfg.origin());
  const auto obs = load_manifest(bundle.manifest());

  struct Job {
    const CalfObservation* obs;
    std::string frame_id;
  };
  std::vector<Job> jobs;
  for (const auto& o : obs)
    for (const auto& id : o.frame_ids)
      if (fs::exists(masks / (id + ".png"))) jobs.push_back({&o, id});
  const auto per_frame = parallel_map<MetricsRecord>(jobs.size(), jobs_of(c), [&](std::size_t i) {
    const BinaryMask mask = read_mask_png(masks / (jobs[i].frame_id + ".png"));
    const DepthGrid depth = load_depth_csv(bundle.depth_csv(jobs[i].frame_id), mask.width(), mask.height());
    try {
      return MetricsRecord{jobs[i].obs->calf_id, jobs[i].obs->obs_date, jobs[i].obs->age_days, jobs[i].obs->body_weight_lb,
                           extract_metrics(mask, depth, camera, mode)};
    } catch (const Error& e) {
      throw e.with_context("frame " + jobs[i].frame_id);
    }
  });
  const auto rows = aggregate_median(per_frame);
  Settings s;
  s.add("command", "metrics").add("volume_mode", std::string(to_string(mode))).add("camera_height_mm", text::format_double(camera));
  s.add_file("manifest", bundle.manifest());
  for (const auto& j : jobs) s.add_file("mask." + j.frame_id, masks / (j.frame_id + ".png"));
  s.text += cfg.canonical();
  fs::create_directories(c.out);
  write_report(fs::path(c.out) / "metrics.csv", "metrics", s, seed, format_metrics_csv(rows));
  std::cout << "frames=" << per_frame.size() << " observations=" << rows.size() << "\n";
  return 0;
}

struct SegevalArgs {
  std::vector<std::string> pred;
  std::string truth;
  double alpha = 0.05;
};

/// (frame_id, success) rows of a segmentation.csv.
inline std::vector<std::pair<std::string, bool>> read_segmentation_csv(const fs::path& path) {
  const std::string content = text::read_file(path);
  std::vector<std::pair<std::string, bool>> out;
  bool header = false;
  std::size_t line_no = 0;
  for (auto line : text::lines(content)) {
    ++line_no;
    if (line.empty() || line.front() == '#') continue;
    const auto f = text::split(line, ',');
    if (!header) {
      if (f.size() < 2 || f[0] != "frame_id" || f[1] != "success") fail(ErrorKind::SchemaError, "not a segmentation report", path.string());
      header = true;
      continue;
    }
    if (f.size() < 2 || (f[1] != "0" && f[1] != "1")) fail(ErrorKind::ParseError, "bad segmentation row", text::locate(path, line_no));
    out.emplace_back(std::string(f[0]), f[1] == "1");
  }
  if (!header) fail(ErrorKind::SchemaError, "segmentation report has no header", path.string());
  return out;
}

inline int cmd_segeval(const Common& c, const SegevalArgs& a) {
  const auto cfg = config_or_empty(c);
  const std::uint64_t seed = resolve_seed(c, &cfg).value_or(0);
  fs::path truth_path(a.truth);
  if (fs::is_directory(truth_path)) truth_path /= "labels.jsonl";
  const auto truth = load_mask_labels(truth_path);
  std::map<std::string, const MaskLabel*> by_frame;
  for (const auto& l : truth)
    if (!by_frame.emplace(l.frame_id, &l).second) fail(ErrorKind::DuplicateLabel, "more than one truth label", l.frame_id);
  Settings s;
  s.add("command", "segeval").add("alpha", text::format_double(a.alpha)).add_file("truth", truth_path);

  std::vector<MethodScores> methods;
  for (const auto& spec : a.pred) {
    const auto eq = spec.find('=');
    const fs::path dir = eq == std::string::npos ? fs::path(spec) : fs::path(spec.substr(eq + 1));
    std::string name = eq == std::string::npos ? fs::absolute(dir).lexically_normal().filename().string() : spec.substr(0, eq);
    if (name.empty()) name = dir.string();
    const fs::path report = dir / "segmentation.csv";
    if (!fs::exists(report)) fail(ErrorKind::IoError, "no segmentation.csv in prediction directory", dir.string());
    const auto rows = read_segmentation_csv(report);
    s.add("method", name).add_file("pred." + name, report);
    std::vector<std::string> scored;
    for (const auto& [id, ok] : rows)
      if (ok) scored.push_back(id);
    MethodScores m{name, {}, rows.size()};
    m.scores = parallel_map<SegScores>(scored.size(), jobs_of(c), [&](std::size_t i) {
      const BinaryMask pred = read_mask_png(dir / "masks" / (scored[i] + ".png"));
      const auto it = by_frame.find(scored[i]);
      const BinaryMask gt = it == by_frame.end() ? BinaryMask(pred.width(), pred.height())
                                                 : rasterize_polygon(it->second->polygon, pred.width(), pred.height());
      return score_masks(pred, gt);
    });
    for (const auto& id : scored) s.add_file("mask." + name + "." + id, dir / "masks" / (id + ".png"));
    methods.push_back(std::move(m));
  }
  const auto cmp = compare_methods(methods, a.alpha);
  fs::create_directories(c.out);
  write_report(fs::path(c.out) / "segeval_report.csv", "segeval", s, seed, format_segeval_report(cmp));
  return 0;
}

struct CorrelateArgs {
  std::string metrics;
  bool quartiles = false;
  bool mantel = false;
  std::size_t n_perm = 999;
};

inline std::string format_corr_csv(const CorrMatrix& m) {
  std::string out = "variable";
  for (const auto& l : m.labels) out += "," + l;
  out += "\n";
  for (std::size_t i = 0; i < m.size(); ++i) {
    out += m.labels[i];
    for (std::size_t j = 0; j < m.size(); ++j) out += "," + text::format_double(m.at(i, j));
    out += "\n";
  }
  return out;
}

inline int cmd_correlate(const Common& c, const CorrelateArgs& a) {
  const auto rows = load_metrics_csv(a.metrics);
  const bool mantel = a.mantel;
  const bool quartiles = a.quartiles || mantel;
  const auto cfg = config_or_empty(c);
  const std::uint64_t seed = mantel ? require_seed(c, &cfg) : resolve_seed(c, &cfg).value_or(0);
  Settings s;
  s.add("command", "correlate").add_file("metrics", a.metrics);
  if (quartiles) s.add("quartiles", "1");
  if (mantel) s.add("mantel", "1").add("n_perm", std::to_string(a.n_perm));
  const fs::path out(c.out);
  fs::create_directories(out);
  write_report(out / "corr_all.csv", "correlate", s, seed, format_corr_csv(corr_matrix(rows)));
  if (!quartiles) return 0;
  const auto q = age_quartile_matrices(rows);
  std::string summary = "quartile,age_lo,age_hi,rows\n";
  for (std::size_t i = 0; i < q.size(); ++i) {
    const std::string name = "Q" + std::to_string(i + 1);
    summary += name + "," + text::format_double(q[i].age_lo) + "," + text::format_double(q[i].age_hi) + "," +
               std::to_string(q[i].rows) + "\n";
    write_report(out / ("corr_" + name + ".csv"), "correlate", s, seed, format_corr_csv(q[i].matrix));
  }
  write_report(out / "quartiles.csv", "correlate", s, seed, summary);
  if (!mantel) return 0;
  std::string body = "a,b,r,p,n_perm\n";
  std::size_t pair = 0;
  for (std::size_t i = 0; i < q.size(); ++i)
    for (std::size_t j = i + 1; j < q.size(); ++j, ++pair) {
      const auto r = calfweight::mantel(q[i].matrix, q[j].matrix, a.n_perm, stream_seed(seed, pair), jobs_of(c));
      body += "Q" + std::to_string(i + 1) + ",Q" + std::to_string(j + 1) + "," + text::format_double(r.r) + "," +
              text::format_double(r.p) + "," + std::to_string(r.n_perm) + "\n";
    }
  write_report(out / "mantel.csv", "correlate", s, seed, body);
  return 0;
}

struct EvalArgs {
  std::string metrics;
  std::string models;
  int k = 0;
  int repeats = 0;
  std::string ratios;
  int iterations = 0;
  int min_series = 0;
  int search_iterations = 0;
  bool paper_scale = false;
  bool search_per_repeat = false;
  bool per_fold = false;
  bool ml = false;
  bool kg = false;
};

inline std::vector<ModelSpec> model_specs(const std::string& list, const RunConfig& cfg, const EvalArgs& a, Settings& s) {
  int iterations = static_cast<int>(cfg.integer("gbm.search_iterations", 50));
  if (a.paper_scale) iterations = kPaperSearchIterations;
  if (a.search_iterations > 0) iterations = a.search_iterations;
  if (iterations < 1) fail(ErrorKind::ConfigError, "search_iterations must be >= 1");
  std::vector<ModelSpec> specs;
  for (auto name : text::split(list, ',')) {
    auto spec = model_spec(parse_model_kind(text::trim(name)));
    if (spec.kind == ModelKind::Gbm) {
      spec.tuning = GbmTuning{gbm_space_from(cfg), iterations, a.search_per_repeat};
      s.add("search_iterations", std::to_string(iterations)).add("search_per_repeat", a.search_per_repeat ? "1" : "0");
    }
    if (spec.kind == ModelKind::Lmm) {
      spec.lmm.reml = !a.ml;
      s.add("lmm", a.ml ? "ml" : "reml");
    }
    specs.push_back(std::move(spec));
  }
  s.add("models", list);
  return specs;
}

inline int cmd_cv(const Common& c, const EvalArgs& a) {
  const auto cfg = config_or_empty(c);
  const auto seed = require_seed(c, &cfg);
  Settings s;
  s.add("command", "cv").add_file("metrics", a.metrics);
  s.text += cfg.canonical();
  CvOptions opt;
  opt.seed = seed;
  opt.jobs = jobs_of(c);
  opt.k = a.k > 0 ? a.k : static_cast<int>(cfg.integer("cv.k", 5));
  opt.repeats = a.repeats > 0 ? a.repeats : static_cast<int>(cfg.integer("cv.repeats", 100));
  opt.per_fold = a.per_fold || cfg.flag("cv.per_fold", false);
  s.add("k", std::to_string(opt.k)).add("repeats", std::to_string(opt.repeats)).add("per_fold", opt.per_fold ? "1" : "0");
  s.add("kg", a.kg ? "1" : "0");
  const auto specs = model_specs(a.models.empty() ? "ols,gbm" : a.models, cfg, a, s);
  const auto data = dataset_of(load_metrics_csv(a.metrics));
  const auto table = repeated_cv(data, specs, opt);
  fs::create_directories(c.out);
  write_report(fs::path(c.out) / "cv_report.csv", "cv", s, seed, format_comparison_csv(table, a.kg));
  return 0;
}

inline int cmd_longitudinal(const Common& c, const EvalArgs& a) {
  const auto cfg = config_or_empty(c);
  const auto seed = require_seed(c, &cfg);
  Settings s;
  s.add("command", "longitudinal").add_file("metrics", a.metrics);
  s.text += cfg.canonical();
  LongitudinalOptions opt;
  opt.seed = seed;
  opt.jobs = jobs_of(c);
  opt.ratios = a.ratios.empty() ? cfg.int_list("longitudinal.ratios", opt.ratios) : RunConfig::parse_int_list(a.ratios, "--ratios");
  opt.iterations = a.iterations > 0 ? a.iterations : static_cast<int>(cfg.integer("longitudinal.iterations", 100));
  opt.min_series = static_cast<std::size_t>(a.min_series > 0 ? a.min_series : cfg.integer("longitudinal.min_series", 5));
  if (cfg.has("longitudinal.family")) opt.family = cfg.number("longitudinal.family", 3);
  std::string ratios;
  for (int r : opt.ratios) ratios += std::to_string(r) + ";";
  s.add("ratios", ratios).add("iterations", std::to_string(opt.iterations)).add("min_series", std::to_string(opt.min_series));
  s.add("kg", a.kg ? "1" : "0");
  const auto specs = model_specs(a.models.empty() ? "ols,gbm,lmm" : a.models, cfg, a, s);
  const auto data = dataset_of(load_metrics_csv(a.metrics));
  const auto table = longitudinal_eval(data, specs, opt);
  std::string excluded = "# excluded_calves=";
  for (std::size_t i = 0; i < table.excluded_calves.size(); ++i) excluded += (i ? ";" : "") + table.excluded_calves[i];
  fs::create_directories(c.out);
  write_report(fs::path(c.out) / "longitudinal_report.csv", "longitudinal", s, seed,
               excluded + "\n" + format_comparison_csv(table, a.kg));
  return 0;
}

// ---------------------------------------------------------------------------

/// `error kind=<Kind> code=<exit> subject="<...>" message="<...>"`
inline std::string error_record(std::string_view kind, int code, std::string_view subject, std::string_view message) {
  auto quote = [](std::string_view v) {
    std::string q = "\"";
    for (char ch : v) {
      if (ch == '"' || ch == '\\') q += '\\';
      q += ch == '\n' ? ' ' : ch;
    }
    return q + "\"";
  };
  return "error kind=" + std::string(kind) + " code=" + std::to_string(code) + " subject=" + quote(subject) +
         " message=" + quote(message);
}

inline int run(int argc, const char* const* argv) {
  CLI::App app{"Calf body-weight estimation from depth images: synthetic data, segmentation, body metrics and model evaluation",
               "calfmetrics"};
  app.require_subcommand(1);
  Common common;
  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--jobs", common.jobs, "Worker threads (default: all cores)")->check(CLI::NonNegativeNumber);
    sub->add_option("--seed", common.seed, "Random seed (overrides CALFMETRICS_SEED and the config)");
    sub->add_option("--out", common.out, "Output directory")->required();
  };

  auto* synth = app.add_subcommand("synth", "Generate a synthetic dataset bundle");
  add_common(synth);
  synth->add_option("--config", common.config, "INI config file")->required();

  SegmentArgs seg;
  auto* segment = app.add_subcommand("segment", "Segment every frame of a bundle");
  add_common(segment);
  segment->add_option("--config", common.config, "INI config file")->required();
  segment->add_option("--method", seg.method, "threshold or labels")->check(CLI::IsMember({"threshold", "labels"}));
  segment->add_option("--labels", seg.labels, "Polygon labels for --method labels (default: the bundle's labels.jsonl)");

  MetricsArgs met;
  auto* metrics = app.add_subcommand("metrics", "Extract body metrics and aggregate per calf and date");
  add_common(metrics);
  metrics->add_option("--config", common.config, "INI config file")->required();
  metrics->add_option("--masks", met.masks, "Segmentation output directory (overrides [paths] masks)");

  SegevalArgs sev;
  auto* segeval = app.add_subcommand("segeval", "Score segmentation methods against ground truth");
  add_common(segeval);
  segeval->add_option("--pred", sev.pred, "Segmentation output directory, optionally name=dir; repeat per method")->required();
  segeval->add_option("--truth", sev.truth, "Ground-truth labels.jsonl or a bundle directory")->required();
  segeval->add_option("--alpha", sev.alpha, "Tukey significance level");
  segeval->add_option("--config", common.config, "INI config file (seed only)");

  CorrelateArgs cor;
  auto* correlate = app.add_subcommand("correlate", "Correlation matrices of body metrics and weight");
  add_common(correlate);
  correlate->add_option("--metrics", cor.metrics, "metrics.csv")->required();
  correlate->add_flag("--quartiles", cor.quartiles, "Also per age quartile");
  correlate->add_flag("--mantel", cor.mantel, "Mantel tests between quartile matrices (implies --quartiles)");
  correlate->add_option("--n-perm", cor.n_perm, "Mantel permutations")->check(CLI::Range(99, 100'000'000));
  correlate->add_option("--config", common.config, "INI config file (seed only)");

  EvalArgs ev;
  auto add_eval = [&](CLI::App* sub) {
    add_common(sub);
    sub->add_option("--config", common.config, "INI config file ([gbm], [cv], [longitudinal] sections)");
    sub->add_option("--metrics", ev.metrics, "metrics.csv")->required();
    sub->add_option("--models", ev.models, "Comma-separated subset of ols,gbm,lmm");
    sub->add_option("--search-iterations", ev.search_iterations, "Randomized-search draws for gbm (default 50)");
    sub->add_flag("--paper-scale", ev.paper_scale, "Use 1000 search draws");
    sub->add_flag("--search-per-repeat", ev.search_per_repeat, "Search inside every training split");
    sub->add_flag("--kg", ev.kg, "Report errors in kilograms");
  };
  auto* cv = app.add_subcommand("cv", "Repeated calf-grouped k-fold cross-validation");
  add_eval(cv);
  cv->add_option("--k", ev.k, "Folds (default 5)");
  cv->add_option("--repeats", ev.repeats, "Repeats (default 100)");
  cv->add_flag("--per-fold", ev.per_fold, "Average fold scores instead of pooling predictions");

  auto* lon = app.add_subcommand("longitudinal", "Per-calf chronological train/test evaluation");
  add_eval(lon);
  lon->add_option("--ratios", ev.ratios, "Train percentages (default 90,80,70,60,50)");
  lon->add_option("--iterations", ev.iterations, "Jackknife iterations (default 100)");
  lon->add_option("--min-series", ev.min_series, "Minimum observations per calf (default 5)");
  lon->add_flag("--ml", ev.ml, "Fit the mixed model by ML instead of REML");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << app.help() << "\n" << error_record("UsageError", 1, "", e.what()) << "\n";
    return 1;
  }

  try {
    if (*synth) return cmd_synth(common);
    if (*segment) return cmd_segment(common, seg);
    if (*metrics) return cmd_metrics(common, met);
    if (*segeval) return cmd_segeval(common, sev);
    if (*correlate) return cmd_correlate(common, cor);
    if (*cv) return cmd_cv(common, ev);
    if (*lon) return cmd_longitudinal(common, ev);
  } catch (const Error& e) {
    const int code = static_cast<int>(category(e.kind()));
    std::cerr << error_record(to_string(e.kind()), code, e.subject(), e.detail()) << "\n";
    return code;
  } catch (const std::filesystem::filesystem_error& e) {
    std::cerr << error_record("IoError", 2, e.path1().string(), e.what()) << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << error_record("Internal", 3, "", e.what()) << "\n";
    return 3;
  }
  return 1;
}

}  // namespace calfweight::cli
