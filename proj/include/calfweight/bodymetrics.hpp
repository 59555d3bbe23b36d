#pragma once

// Body metrics from a region mask and its depth map, plus per calf-date
// median aggregation and the metrics.csv exchange format.

#include <algorithm>
#include <array>
#include <cmath>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "calfweight/error.hpp"
#include "calfweight/imgcore.hpp"
#include "calfweight/ingest.hpp"

namespace calfweight {

/// How per-pixel values are formed before summing into volume.
enum class VolumeMode {
  Height,       ///< camera height minus depth, clamped at 0
  RawDepthSum,  ///< the depth sample itself
};

constexpr std::string_view to_string(VolumeMode m) noexcept {
  return m == VolumeMode::Height ? "height" : "raw_depth_sum";
}

inline VolumeMode parse_volume_mode(std::string_view s) {
  if (s == "height") return VolumeMode::Height;
  if (s == "raw_depth_sum") return VolumeMode::RawDepthSum;
  fail(ErrorKind::ConfigError, "unknown volume mode '" + std::string(s) + "'");
}

struct BodyMetrics {
  double width_px = 0.0;          ///< short side of the region's bounding box
  double length_px = 0.0;         ///< long side of the region's bounding box
  double contour_area_px2 = 0.0;  ///< region pixel count
  double avg_height_mm = 0.0;
  double volume_mm_px2 = 0.0;     ///< sum of per-pixel heights after imputation

  friend bool operator==(const BodyMetrics&, const BodyMetrics&) = default;
};

/// Missing depth (0) inside the mask is imputed with the mean of the valid
/// in-mask heights.
inline BodyMetrics extract_metrics(const BinaryMask& mask, const DepthGrid& depth, double camera_height_mm,
                                   VolumeMode mode = VolumeMode::Height) {
  if (depth.width != mask.width() || depth.height != mask.height()) {
    fail(ErrorKind::PairMismatch, "mask and depth map sizes differ");
  }
  const Rect box = mask_bounds(mask);
  if (box.width == 0) fail(ErrorKind::EmptyMask, "metrics of an empty mask");
  double valid_sum = 0.0;
  std::size_t valid = 0;
  std::size_t missing = 0;
  for (int y = box.y; y < box.y + box.height; ++y) {
    for (int x = box.x; x < box.x + box.width; ++x) {
      if (!mask.test(x, y)) continue;
      const double d = depth.at(x, y);
      if (d <= 0.0) {
        ++missing;
        continue;
      }
      valid_sum += mode == VolumeMode::Height ? std::max(0.0, camera_height_mm - d) : d;
      ++valid;
    }
  }
  if (valid == 0) fail(ErrorKind::NoValidDepth, "every in-mask depth sample is missing");
  BodyMetrics m;
  m.avg_height_mm = valid_sum / static_cast<double>(valid);
  m.volume_mm_px2 = valid_sum + static_cast<double>(missing) * m.avg_height_mm;
  m.contour_area_px2 = static_cast<double>(valid + missing);
  m.width_px = std::min(box.width, box.height);
  m.length_px = std::max(box.width, box.height);
  return m;
}

/// One row of the observation table: identity, target and metrics.
struct MetricsRecord {
  std::string calf_id;
  Date obs_date;
  int age_days = 0;
  std::optional<double> body_weight_lb;
  BodyMetrics metrics;

  friend bool operator==(const MetricsRecord&, const MetricsRecord&) = default;
};

namespace detail {

inline double median_of(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

}  // namespace detail

/// Component-wise median per (calf_id, obs_date); groups keep first-appearance
/// order and take age and weight from their first row.
inline std::vector<MetricsRecord> aggregate_median(const std::vector<MetricsRecord>& rows) {
  std::vector<std::pair<std::string, Date>> order;
  std::map<std::pair<std::string, Date>, std::vector<const MetricsRecord*>> groups;
  for (const auto& r : rows) {
    auto key = std::make_pair(r.calf_id, r.obs_date);
    auto& g = groups[key];
    if (g.empty()) order.push_back(key);
    g.push_back(&r);
  }
  std::vector<MetricsRecord> out;
  out.reserve(order.size());
  for (const auto& key : order) {
    const auto& g = groups[key];
    MetricsRecord agg = *g.front();
    auto med = [&](double BodyMetrics::*field) {
      std::vector<double> v;
      v.reserve(g.size());
      for (const auto* r : g) v.push_back(r->metrics.*field);
      return detail::median_of(std::move(v));
    };
    agg.metrics.width_px = med(&BodyMetrics::width_px);
    agg.metrics.length_px = med(&BodyMetrics::length_px);
    agg.metrics.contour_area_px2 = med(&BodyMetrics::contour_area_px2);
    agg.metrics.avg_height_mm = med(&BodyMetrics::avg_height_mm);
    agg.metrics.volume_mm_px2 = med(&BodyMetrics::volume_mm_px2);
    out.push_back(std::move(agg));
  }
  return out;
}

inline constexpr std::string_view kMetricsHeader =
    "calf_id,obs_date,age_days,width_px,length_px,contour_area_px2,avg_height_mm,volume_mm_px2,body_weight_lb";

inline std::string format_metrics_csv(const std::vector<MetricsRecord>& rows) {
  std::string out(kMetricsHeader);
  out += '\n';
  for (const auto& r : rows) {
    const auto& m = r.metrics;
    out += r.calf_id + ',' + r.obs_date.iso() + ',' + std::to_string(r.age_days) + ',' +
           text::format_double(m.width_px) + ',' + text::format_double(m.length_px) + ',' +
           text::format_double(m.contour_area_px2) + ',' + text::format_double(m.avg_height_mm) + ',' +
           text::format_double(m.volume_mm_px2) + ',';
    if (r.body_weight_lb) out += text::format_double(*r.body_weight_lb);
    out += '\n';
  }
  return out;
}

/// Lines starting with '#' are metadata and skipped.
inline std::vector<MetricsRecord> parse_metrics_csv(std::string_view content, const std::string& origin = "metrics") {
  auto rows = text::lines(content);
  std::size_t first = 0;
  while (first < rows.size() && (rows[first].empty() || rows[first].front() == '#')) ++first;
  if (first == rows.size()) fail(ErrorKind::SchemaError, "missing header row", origin);
  const auto header = text::split(rows[first], ',');
  const std::array<std::string_view, 9> names{"calf_id",       "obs_date",         "age_days",
                                              "width_px",      "length_px",        "contour_area_px2",
                                              "avg_height_mm", "volume_mm_px2",    "body_weight_lb"};
  std::array<std::size_t, 9> col{};
  for (std::size_t k = 0; k < names.size(); ++k) {
    const auto it = std::find_if(header.begin(), header.end(), [&](std::string_view h) { return text::trim(h) == names[k]; });
    if (it == header.end()) fail(ErrorKind::SchemaError, "missing column", std::string(names[k]));
    col[k] = static_cast<std::size_t>(it - header.begin());
  }
  std::vector<MetricsRecord> out;
  for (std::size_t ln = first + 1; ln < rows.size(); ++ln) {
    if (text::trim(rows[ln]).empty() || rows[ln].front() == '#') continue;
    const std::string where = origin + ":" + std::to_string(ln + 1);
    const auto f = text::split(rows[ln], ',');
    if (f.size() != header.size()) fail(ErrorKind::ParseError, "wrong field count", where);
    MetricsRecord r;
    r.calf_id = std::string(text::trim(f[col[0]]));
    const auto date = Date::parse(f[col[1]]);
    const auto age = text::parse_int(f[col[2]]);
    if (r.calf_id.empty() || !date || !age || *age < 0) fail(ErrorKind::ParseError, "bad identity fields", where);
    r.obs_date = *date;
    r.age_days = static_cast<int>(*age);
    double* targets[5] = {&r.metrics.width_px, &r.metrics.length_px, &r.metrics.contour_area_px2,
                          &r.metrics.avg_height_mm, &r.metrics.volume_mm_px2};
    for (int k = 0; k < 5; ++k) {
      const auto v = text::parse_double(f[col[3 + k]]);
      if (!v) fail(ErrorKind::ParseError, "bad value for " + std::string(names[3 + k]), where);
      *targets[k] = *v;
    }
    if (!text::trim(f[col[8]]).empty()) {
      const auto w = text::parse_double(f[col[8]]);
      if (!w || *w <= 0.0) fail(ErrorKind::ParseError, "bad body_weight_lb", where);
      r.body_weight_lb = *w;
    }
    out.push_back(std::move(r));
  }
  return out;
}

inline std::vector<MetricsRecord> load_metrics_csv(const std::filesystem::path& path) {
  return parse_metrics_csv(text::read_file(path), path.string());
}

}  // namespace calfweight
