#pragma once

// Seeded synthetic dorsal-view depth scenes with calf-like blobs of known
// geometry, ground-truth masks and labels, and body weights from a linear law
// (optionally with a step in volume).

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

#include "calfweight/bodymetrics.hpp"
#include "calfweight/error.hpp"
#include "calfweight/imgcore.hpp"
#include "calfweight/ingest.hpp"
#include "calfweight/parallel.hpp"
#include "calfweight/png_io.hpp"
#include "calfweight/rng.hpp"

namespace calfweight {

struct Interval {
  double lo = 0.0;
  double hi = 0.0;
  [[nodiscard]] double at(double f) const noexcept { return lo + f * (hi - lo); }
};

struct SynthConfig {
  int n_calves = 20;
  int obs_min = 8;  ///< observations per calf, drawn uniformly in [obs_min, obs_max]
  int obs_max = 12;
  int frames_per_obs = 1;
  int image_width = 1280;
  int image_height = 720;
  double camera_height_mm = 1510.0;
  Interval blob_length_px{480.0, 620.0};  ///< full long axis; grows with the calf
  Interval blob_width_px{330.0, 400.0};
  Interval peak_height_mm{700.0, 950.0};
  double calf_height_jitter_mm = 20.0;
  double dome = 0.12;  ///< height falls by this fraction from spine to outline
  Interval first_age_days{21.0, 30.0};
  int visit_gap_min = 2;
  int visit_gap_max = 4;
  std::string start_date = "2023-01-09";
  double missing_rate = 0.01;  ///< dropped depth inside the inner body

  // weight = c0 + c1·volume + c2·age + u_calf + e  (+ step when nonlinear)
  double c0 = 0.0;
  double c1 = 1.0e-6;
  double c2 = 0.6;
  double sigma_u = 6.0;
  double sigma_e = 1.5;
  bool nonlinear = false;
  double step_lb = 30.0;
  double step_volume = 1.25e8;

  double distractor_rate = 0.0;  ///< fraction of frames holding only an out-of-range blob
  int fence_bars = 2;            ///< thin above-threshold bars beside the calf
  std::uint64_t seed = 1;

  void validate() const {
    auto range_ok = [](const Interval& r) { return std::isfinite(r.lo) && std::isfinite(r.hi) && r.lo > 0 && r.lo <= r.hi; };
    if (n_calves < 1) fail(ErrorKind::ConfigError, "n_calves must be >= 1");
    if (obs_min < 1 || obs_min > obs_max) fail(ErrorKind::ConfigError, "need 1 <= obs_min <= obs_max");
    if (frames_per_obs < 1) fail(ErrorKind::ConfigError, "frames_per_obs must be >= 1");
    if (image_width < 1 || image_height < 1) fail(ErrorKind::ConfigError, "image size must be positive");
    if (!(camera_height_mm > 0)) fail(ErrorKind::ConfigError, "camera_height_mm must be > 0");
    if (!range_ok(blob_length_px) || !range_ok(blob_width_px) || !range_ok(peak_height_mm) || !range_ok(first_age_days)) {
      fail(ErrorKind::ConfigError, "ranges must be finite, positive and non-empty");
    }
    if (blob_width_px.hi > blob_length_px.lo) fail(ErrorKind::ConfigError, "blob width must not exceed blob length");
    if (visit_gap_min < 1 || visit_gap_min > visit_gap_max) fail(ErrorKind::ConfigError, "need 1 <= visit_gap_min <= visit_gap_max");
    if (!Date::parse(start_date)) fail(ErrorKind::ConfigError, "start_date is not an ISO date");
    if (dome < 0 || dome >= 1) fail(ErrorKind::ConfigError, "dome must lie in [0, 1)");
    if (peak_height_mm.hi + calf_height_jitter_mm >= camera_height_mm) {
      fail(ErrorKind::ConfigError, "blob height reaches the camera");
    }
    if (missing_rate < 0 || missing_rate >= 1) fail(ErrorKind::ConfigError, "missing_rate must lie in [0, 1)");
    if (sigma_u < 0 || sigma_e < 0) fail(ErrorKind::ConfigError, "noise scales must be >= 0");
    if (distractor_rate < 0 || distractor_rate > 1) fail(ErrorKind::ConfigError, "distractor_rate must lie in [0, 1]");
    if (fence_bars < 0) fail(ErrorKind::ConfigError, "fence_bars must be >= 0");
    if (blob_length_px.hi + 2 * kMargin > image_width || blob_width_px.hi + 2 * kMargin > image_height) {
      fail(ErrorKind::ConfigError, "blob cannot fit the image");
    }
    if (distractor_rate > 0 && (kCrossArm + 2 * kMargin > image_height || kCrossArm + 2 * kMargin > image_width)) {
      fail(ErrorKind::ConfigError, "distractor blobs cannot fit the image");
    }
  }

  static constexpr int kMargin = 8;
  static constexpr int kCrossArm = 650;
  static constexpr int kCrossThickness = 75;
};

/// Which single selection criterion a distractor violates.
enum class Distractor { None, Area, Extent, Shape };

struct FramePlan {
  std::string frame_id;
  std::size_t index = 0;  ///< position in the frame sequence
  Distractor distractor = Distractor::None;
};

struct ObservationPlan {
  CalfObservation obs;
  double length_px = 0.0;
  double width_px = 0.0;
  double peak_mm = 0.0;
  double law_volume = 0.0;  ///< continuous volume of the dome, drives the weight law
  double calf_effect = 0.0;
  std::vector<FramePlan> frames;
};

struct SynthPlan {
  SynthConfig config;
  std::vector<ObservationPlan> observations;
  std::size_t frame_count = 0;
};

namespace synth_detail {

inline constexpr std::uint64_t kFrameStream = 0x5EED0F4A3EULL;
inline constexpr std::uint64_t kDistractorStream = 0xD157A11ULL;

inline std::string calf_name(int c, int n) {
  const int digits = n < 100 ? 2 : (n < 1000 ? 3 : 4);
  std::string s = std::to_string(c + 1);
  return "calf" + std::string(static_cast<std::size_t>(std::max(0, digits - static_cast<int>(s.size()))), '0') + s;
}

inline std::string compact_date(const Date& d) {
  std::string s = d.iso();
  s.erase(std::remove(s.begin(), s.end(), '-'), s.end());
  return s;
}

}  // namespace synth_detail

/// Volume of a dome h(r) = peak·(1 − dome·r²) over an ellipse with the given
/// full axes.
inline double dome_volume(double length, double width, double peak, double dome) {
  return std::numbers::pi * (length / 2) * (width / 2) * peak * (1.0 - dome / 2.0);
}

inline double law_weight(const SynthConfig& c, double volume, int age_days, double calf_effect, double noise) {
  double w = c.c0 + c.c1 * volume + c.c2 * age_days + calf_effect + noise;
  if (c.nonlinear && volume > c.step_volume) w += c.step_lb;
  return w;
}

/// All per-calf and per-observation sampling; frames are rendered lazily.
inline SynthPlan make_plan(const SynthConfig& config) {
  config.validate();
  SynthPlan plan;
  plan.config = config;
  const Date start = *Date::parse(config.start_date);
  for (int c = 0; c < config.n_calves; ++c) {
    Rng rng(stream_seed(config.seed, static_cast<std::uint64_t>(c)));
    const std::string calf = synth_detail::calf_name(c, config.n_calves);
    const int n_obs = static_cast<int>(rng.between(config.obs_min, config.obs_max));
    const int age0 = static_cast<int>(std::lround(rng.uniform(config.first_age_days.lo, config.first_age_days.hi)));
    Date date = start.plus_days(static_cast<int>(rng.below(7)));
    std::vector<int> offsets{0};
    for (int k = 1; k < n_obs; ++k) {
      offsets.push_back(offsets.back() + static_cast<int>(rng.between(config.visit_gap_min, config.visit_gap_max)));
    }
    const double growth = rng.uniform(0.45, 0.65);
    const double f0 = rng.uniform(0.0, 1.0 - growth);
    const double span = std::max(1, offsets.back());
    const double jitter = rng.uniform(-config.calf_height_jitter_mm, config.calf_height_jitter_mm);
    const double effect = config.sigma_u * rng.normal();
    for (int k = 0; k < n_obs; ++k) {
      ObservationPlan op;
      const double f = f0 + growth * offsets[static_cast<std::size_t>(k)] / span;
      op.length_px = config.blob_length_px.at(f);
      op.width_px = config.blob_width_px.at(f);
      op.peak_mm = config.peak_height_mm.at(f) + jitter;
      op.law_volume = dome_volume(op.length_px, op.width_px, op.peak_mm, config.dome);
      op.calf_effect = effect;
      op.obs.calf_id = calf;
      op.obs.obs_date = date.plus_days(offsets[static_cast<std::size_t>(k)]);
      op.obs.age_days = age0 + offsets[static_cast<std::size_t>(k)];
      op.obs.body_weight_lb = law_weight(config, op.law_volume, op.obs.age_days, effect, config.sigma_e * rng.normal());
      for (int j = 0; j < config.frames_per_obs; ++j) {
        FramePlan fp;
        fp.frame_id = calf + "_" + synth_detail::compact_date(op.obs.obs_date) + "_" + std::to_string(j);
        fp.index = plan.frame_count++;
        op.obs.frame_ids.push_back(fp.frame_id);
        op.frames.push_back(std::move(fp));
      }
      plan.observations.push_back(std::move(op));
    }
  }
  const auto n_distract = static_cast<std::size_t>(std::llround(config.distractor_rate * static_cast<double>(plan.frame_count)));
  if (n_distract > 0) {
    Rng rng(stream_seed(config.seed, synth_detail::kDistractorStream));
    const auto order = rng.permutation(plan.frame_count);
    std::vector<Distractor> kind(plan.frame_count, Distractor::None);
    constexpr Distractor cycle[3] = {Distractor::Area, Distractor::Extent, Distractor::Shape};
    for (std::size_t k = 0; k < n_distract; ++k) kind[order[k]] = cycle[k % 3];
    for (auto& op : plan.observations) {
      for (auto& fp : op.frames) fp.distractor = kind[fp.index];
    }
  }
  return plan;
}

/// HSV (full saturation and value) to RGB for a hue on the halved 0..179 scale.
inline std::array<std::uint8_t, 3> hue_to_rgb(double hue_half) {
  const double deg = std::fmod(std::max(0.0, hue_half) * 2.0, 360.0);
  const int sector = static_cast<int>(deg / 60.0);
  const double frac = deg / 60.0 - sector;
  const auto up = static_cast<std::uint8_t>(std::lround(255.0 * frac));
  const auto down = static_cast<std::uint8_t>(std::lround(255.0 * (1.0 - frac)));
  switch (sector) {
    case 0: return {255, up, 0};
    case 1: return {down, 255, 0};
    case 2: return {0, 255, up};
    case 3: return {0, down, 255};
    case 4: return {up, 0, 255};
    default: return {255, 0, down};
  }
}

inline constexpr double kBackgroundHue = 10.0;

/// Exactly symmetric ellipse on an integer centre; ships as template.png.
inline BinaryMask default_template() {
  constexpr int w = 600, h = 420, cx = 300, cy = 210;
  constexpr double a = 275.0, b = 180.0;
  BinaryMask m(w, h);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const double u = (x - cx) / a, v = (y - cy) / b;
      if (u * u + v * v <= 1.0) m.set(x, y);
    }
  }
  return m;
}

struct SynthFrame {
  DepthFrame frame;
  std::optional<BinaryMask> truth;  ///< calf pixels, absent for distractor-only frames
  std::optional<BodyMetrics> truth_metrics;
  Distractor distractor = Distractor::None;
};

namespace synth_detail {

struct Canvas {
  Raster8 color;
  DepthGrid depth;
  double camera;

  void paint(int x, int y, double height_mm, const std::array<std::uint8_t, 3>& rgb) {
    depth.at(x, y) = static_cast<float>(camera - height_mm);
    for (int ch = 0; ch < 3; ++ch) color.at(x, y, ch) = rgb[static_cast<std::size_t>(ch)];
  }
  void drop(int x, int y) {
    depth.at(x, y) = 0.0f;
    for (int ch = 0; ch < 3; ++ch) color.at(x, y, ch) = 0;
  }
};

struct Ellipse {
  double cx, cy, a, b;
};

struct HueScale {
  double lo, hi;
  [[nodiscard]] double operator()(double h) const {
    return std::clamp(80.0 + 70.0 * (h - lo) / (hi - lo), 80.0, 150.0);
  }
};

inline HueScale hue_scale(const SynthConfig& c) {
  return {c.peak_height_mm.lo * (1.0 - c.dome) - c.calf_height_jitter_mm, c.peak_height_mm.hi + c.calf_height_jitter_mm};
}

inline Ellipse place(Rng& rng, const SynthConfig& c, double length, double width) {
  const double a = length / 2, b = width / 2;
  const double m = SynthConfig::kMargin;
  return {rng.uniform(a + m, c.image_width - a - m), rng.uniform(b + m, c.image_height - b - m), a, b};
}

/// Visits ellipse pixels with their integer dome height and squared radius.
template <typename Fn>
void for_each_dome_pixel(const Ellipse& e, double peak, double dome, int w, int h, Fn&& fn) {
  const int y0 = std::max(0, static_cast<int>(std::floor(e.cy - e.b)));
  const int y1 = std::min(h - 1, static_cast<int>(std::ceil(e.cy + e.b)));
  const int x0 = std::max(0, static_cast<int>(std::floor(e.cx - e.a)));
  const int x1 = std::min(w - 1, static_cast<int>(std::ceil(e.cx + e.a)));
  for (int y = y0; y <= y1; ++y) {
    for (int x = x0; x <= x1; ++x) {
      const double u = (x - e.cx) / e.a, v = (y - e.cy) / e.b;
      const double r2 = u * u + v * v;
      if (r2 > 1.0) continue;
      fn(x, y, std::round(peak * (1.0 - dome * r2)), r2);
    }
  }
}

inline void paint_distractor(Canvas& canvas, Rng& rng, const SynthConfig& c, Distractor kind) {
  const HueScale hue = hue_scale(c);
  const double peak = c.peak_height_mm.at(0.5);
  if (kind == Distractor::Shape) {
    const int arm = SynthConfig::kCrossArm, t = SynthConfig::kCrossThickness;
    const int m = SynthConfig::kMargin;
    const int x0 = static_cast<int>(rng.between(m, c.image_width - arm - m));
    const int y0 = static_cast<int>(rng.between(m, c.image_height - arm - m));
    const int mid = (arm - t) / 2;
    const auto rgb = hue_to_rgb(hue(peak));
    for (int y = 0; y < arm; ++y) {
      for (int x = 0; x < arm; ++x) {
        const bool bar = (y >= mid && y < mid + t) || (x >= mid && x < mid + t);
        if (bar) canvas.paint(x0 + x, y0 + y, peak, rgb);
      }
    }
    return;
  }
  // Area: round and too small. Extent: large enough but too thin.
  const double length = kind == Distractor::Area ? 320.0 : 460.0;
  const double width = kind == Distractor::Area ? 304.0 : 270.0;
  const Ellipse e = place(rng, c, length, width);
  for_each_dome_pixel(e, peak, c.dome, c.image_width, c.image_height,
                      [&](int x, int y, double h, double) { canvas.paint(x, y, h, hue_to_rgb(hue(h))); });
}

inline void paint_fence(Canvas& canvas, const SynthConfig& c, const Ellipse& calf) {
  constexpr int bar_w = 20;
  const auto rgb = hue_to_rgb(100.0);
  const double fence_mm = 1000.0;
  for (int k = 0; k < c.fence_bars; ++k) {
    const int x0 = (k + 1) * c.image_width / (c.fence_bars + 1) - bar_w / 2;
    if (x0 + bar_w + 6 > calf.cx - calf.a && x0 - 6 < calf.cx + calf.a) continue;
    for (int y = 0; y < c.image_height; ++y) {
      for (int x = std::max(0, x0); x < std::min(c.image_width, x0 + bar_w); ++x) canvas.paint(x, y, fence_mm, rgb);
    }
  }
}

}  // namespace synth_detail

inline SynthFrame render_frame(const SynthPlan& plan, const ObservationPlan& op, const FramePlan& fp) {
  using namespace synth_detail;
  const SynthConfig& c = plan.config;
  Rng rng(stream_seed(c.seed ^ kFrameStream, fp.index));
  Canvas canvas{Raster8(c.image_width, c.image_height, 3),
                DepthGrid{c.image_width, c.image_height,
                          std::vector<float>(static_cast<std::size_t>(c.image_width) * static_cast<std::size_t>(c.image_height),
                                             static_cast<float>(c.camera_height_mm))},
                c.camera_height_mm};
  const auto bg = hue_to_rgb(kBackgroundHue);
  for (int y = 0; y < c.image_height; ++y) {
    for (int x = 0; x < c.image_width; ++x) {
      for (int ch = 0; ch < 3; ++ch) canvas.color.at(x, y, ch) = bg[static_cast<std::size_t>(ch)];
    }
  }
  SynthFrame out{DepthFrame{fp.frame_id, Raster8(1, 1, 3), DepthGrid{}, c.camera_height_mm}, std::nullopt, std::nullopt,
                 fp.distractor};
  if (fp.distractor != Distractor::None) {
    paint_distractor(canvas, rng, c, fp.distractor);
  } else {
    const Ellipse e = place(rng, c, op.length_px, op.width_px);
    paint_fence(canvas, c, e);
    const HueScale hue = hue_scale(c);
    BinaryMask truth(c.image_width, c.image_height);
    double volume = 0.0;
    std::size_t area = 0;
    for_each_dome_pixel(e, op.peak_mm, c.dome, c.image_width, c.image_height, [&](int x, int y, double h, double r2) {
      truth.set(x, y);
      volume += h;
      ++area;
      if (c.missing_rate > 0 && r2 < 0.81 && rng.uniform() < c.missing_rate) {
        canvas.drop(x, y);
      } else {
        canvas.paint(x, y, h, hue_to_rgb(hue(h)));
      }
    });
    const Rect box = mask_bounds(truth);
    BodyMetrics m;
    m.width_px = std::min(box.width, box.height);
    m.length_px = std::max(box.width, box.height);
    m.contour_area_px2 = static_cast<double>(area);
    m.volume_mm_px2 = volume;
    m.avg_height_mm = volume / static_cast<double>(area);
    out.truth = std::move(truth);
    out.truth_metrics = m;
  }
  out.frame = make_depth_frame(fp.frame_id, std::move(canvas.color), std::move(canvas.depth), c.camera_height_mm);
  return out;
}

/// Ground-truth metrics of every calf frame, without rasterising colour or
/// depth. Identical to the truth_metrics that render_frame reports.
inline std::optional<BodyMetrics> truth_metrics(const SynthPlan& plan, const ObservationPlan& op, const FramePlan& fp) {
  using namespace synth_detail;
  if (fp.distractor != Distractor::None) return std::nullopt;
  const SynthConfig& c = plan.config;
  Rng rng(stream_seed(c.seed ^ kFrameStream, fp.index));
  const Ellipse e = place(rng, c, op.length_px, op.width_px);
  double volume = 0.0;
  std::size_t area = 0;
  int x0 = c.image_width, y0 = c.image_height, x1 = -1, y1 = -1;
  for_each_dome_pixel(e, op.peak_mm, c.dome, c.image_width, c.image_height, [&](int x, int y, double h, double) {
    volume += h;
    ++area;
    x0 = std::min(x0, x);
    x1 = std::max(x1, x);
    y0 = std::min(y0, y);
    y1 = std::max(y1, y);
  });
  BodyMetrics m;
  m.width_px = std::min(x1 - x0 + 1, y1 - y0 + 1);
  m.length_px = std::max(x1 - x0 + 1, y1 - y0 + 1);
  m.contour_area_px2 = static_cast<double>(area);
  m.volume_mm_px2 = volume;
  m.avg_height_mm = volume / static_cast<double>(area);
  return m;
}

/// Observation table from ground-truth metrics (per-observation median over
/// calf frames); observations whose frames are all distractors are dropped.
inline std::vector<MetricsRecord> generate_table(const SynthConfig& config) {
  const SynthPlan plan = make_plan(config);
  std::vector<MetricsRecord> rows;
  for (const auto& op : plan.observations) {
    for (const auto& fp : op.frames) {
      if (auto m = truth_metrics(plan, op, fp)) {
        rows.push_back({op.obs.calf_id, op.obs.obs_date, op.obs.age_days, op.obs.body_weight_lb, *m});
      }
    }
  }
  return aggregate_median(rows);
}

/// Polygon label through the traced outline of a truth mask.
inline MaskLabel truth_label(const std::string& frame_id, const BinaryMask& truth) {
  const auto contours = trace_contours(truth);
  if (contours.empty()) fail(ErrorKind::EmptyMask, "truth mask is empty", frame_id);
  return MaskLabel{frame_id, to_polygon(contours.front())};
}

/// Imitates an external segmentation model: a sparse, jittered outline.
inline MaskLabel model_label(const MaskLabel& truth, std::uint64_t seed, std::size_t index, double jitter_px = 2.0,
                             std::size_t stride = 8) {
  Rng rng(stream_seed(seed ^ 0x3D1AB3L, index));
  MaskLabel out{truth.frame_id, {}};
  for (std::size_t i = 0; i < truth.polygon.size(); i += stride) {
    const auto p = truth.polygon[i];
    out.polygon.push_back({std::round(p.x + rng.uniform(-jitter_px, jitter_px)),
                           std::round(p.y + rng.uniform(-jitter_px, jitter_px))});
  }
  if (out.polygon.size() < 3) out.polygon = truth.polygon;
  return out;
}

struct BundleSummary {
  std::size_t frames = 0;
  std::size_t calf_frames = 0;
  std::size_t observations = 0;
};

/// Writes manifest.csv, labels.jsonl (truth), model_labels.jsonl, template.png,
/// truth.csv (ground-truth metrics table), frames/ and depth/.
inline BundleSummary write_bundle(const SynthConfig& config, const std::filesystem::path& dir, int jobs = 1) {
  const SynthPlan plan = make_plan(config);
  const DatasetLayout layout{dir};
  std::vector<std::pair<const ObservationPlan*, const FramePlan*>> frames;
  for (const auto& op : plan.observations) {
    for (const auto& fp : op.frames) frames.emplace_back(&op, &fp);
  }
  std::filesystem::create_directories(dir / "frames");
  std::filesystem::create_directories(dir / "depth");
  auto labels = parallel_map<std::optional<MaskLabel>>(frames.size(), jobs, [&](std::size_t i) {
    const auto& [op, fp] = frames[i];
    SynthFrame f = render_frame(plan, *op, *fp);
    write_png(layout.frame_png(fp->frame_id), f.frame.color);
    write_depth_csv(layout.depth_csv(fp->frame_id), f.frame.depth);
    std::optional<MaskLabel> label;
    if (f.truth) label = truth_label(fp->frame_id, *f.truth);
    return label;
  });
  std::vector<MaskLabel> truth, model;
  std::vector<CalfObservation> manifest;
  for (const auto& op : plan.observations) manifest.push_back(op.obs);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (!labels[i]) continue;
    model.push_back(model_label(*labels[i], config.seed, i));
    truth.push_back(std::move(*labels[i]));
  }
  write_manifest(layout.manifest(), manifest);
  write_mask_labels(layout.labels(), truth);
  write_mask_labels(dir / "model_labels.jsonl", model);
  write_mask_png(layout.template_mask(), default_template());
  text::write_file(dir / "truth.csv", format_metrics_csv(generate_table(config)));
  return {frames.size(), truth.size(), manifest.size()};
}

}  // namespace calfweight
