#pragma once

// Threshold segmentation of a colourised depth frame and the label-file path
// that stands in for externally produced (deep-learning) masks.

#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "calfweight/error.hpp"
#include "calfweight/imgcore.hpp"
#include "calfweight/ingest.hpp"

namespace calfweight {

struct ThresholdParams {
  int hue_threshold = 60;
  double shape_match_max = 0.8;
  double area_min = 80'000.0;
  double area_max = 200'000.0;
  int extent_min = 300;
  int extent_max = 900;
  int kernel_radius = 1;
  std::optional<BinaryMask> template_mask;

  void validate() const {
    if (hue_threshold < 0 || hue_threshold > 255) fail(ErrorKind::InvalidParams, "hue_threshold outside 0..255");
    if (!(shape_match_max > 0.0)) fail(ErrorKind::InvalidParams, "shape_match_max must be > 0");
    if (!(area_min < area_max)) fail(ErrorKind::InvalidParams, "area_min must be < area_max");
    if (!(extent_min < extent_max)) fail(ErrorKind::InvalidParams, "extent_min must be < extent_max");
    if (kernel_radius < 1) fail(ErrorKind::InvalidParams, "kernel_radius must be >= 1");
    if (!template_mask || template_mask->empty()) fail(ErrorKind::InvalidParams, "template mask is empty");
  }
};

enum class Rejection { ShapeMismatch, AreaOutOfRange, ExtentOutOfRange };

constexpr std::string_view to_string(Rejection r) noexcept {
  switch (r) {
    case Rejection::ShapeMismatch: return "ShapeMismatch";
    case Rejection::AreaOutOfRange: return "AreaOutOfRange";
    case Rejection::ExtentOutOfRange: return "ExtentOutOfRange";
  }
  return "?";
}

/// All three selection criteria evaluated for one candidate contour.
struct CandidateCheck {
  double match_distance = 0.0;
  double area = 0.0;
  Rect rect;
  bool shape_ok = false;
  bool area_ok = false;
  bool extent_ok = false;

  [[nodiscard]] bool passes() const noexcept { return shape_ok && area_ok && extent_ok; }

  /// First failing criterion in the order shape, area, extent.
  [[nodiscard]] std::optional<Rejection> first_failure() const noexcept {
    if (!shape_ok) return Rejection::ShapeMismatch;
    if (!area_ok) return Rejection::AreaOutOfRange;
    if (!extent_ok) return Rejection::ExtentOutOfRange;
    return std::nullopt;
  }
};

struct SegOutcome {
  std::string frame_id;
  std::optional<BinaryMask> mask;
  std::optional<Contour> contour;
  std::vector<std::pair<std::size_t, Rejection>> rejection_log;
  double area = 0.0;
  Rect rect;
  double match_distance = std::numeric_limits<double>::quiet_NaN();

  [[nodiscard]] bool success() const noexcept { return mask.has_value(); }
  /// Field-wise; an absent (NaN) match distance equals another absent one.
  friend bool operator==(const SegOutcome& a, const SegOutcome& b) {
    const bool same_distance =
        (std::isnan(a.match_distance) && std::isnan(b.match_distance)) || a.match_distance == b.match_distance;
    return same_distance && a.frame_id == b.frame_id && a.mask == b.mask && a.contour == b.contour &&
           a.rejection_log == b.rejection_log && a.area == b.area && a.rect == b.rect;
  }
};

inline CandidateCheck check_candidate(const Contour& c, const BinaryMask& region, const HuMoments& template_hu,
                                      const ThresholdParams& p) {
  CandidateCheck out;
  out.match_distance = match_hu(hu_moments(region), template_hu);
  out.area = contour_area(c);
  out.rect = bounding_rect(c);
  out.shape_ok = out.match_distance <= p.shape_match_max;
  out.area_ok = out.area >= p.area_min && out.area <= p.area_max;
  auto in_extent = [&](int v) { return v >= p.extent_min && v <= p.extent_max; };
  out.extent_ok = in_extent(out.rect.width) && in_extent(out.rect.height);
  return out;
}

/// Binary mask after hue thresholding, hole filling and opening; the stage at
/// which contours are traced.
inline BinaryMask threshold_foreground(const Raster8& color, const ThresholdParams& p) {
  const Raster8 hue = rgb_to_hue(color);
  BinaryMask m = binary_threshold(hue, p.hue_threshold);
  m = fill_holes(m);
  return morphology(m, MorphOp::Open, StructuringElement{p.kernel_radius});
}

/// Segments one colour frame. Each candidate is rejected at its first failing
/// criterion; among survivors the largest area wins, then the lowest match
/// distance, then the lowest contour index.
inline SegOutcome segment_threshold(const std::string& frame_id, const Raster8& color, const ThresholdParams& p) {
  p.validate();
  const HuMoments template_hu = hu_moments(*p.template_mask);
  const BinaryMask fg = threshold_foreground(color, p);
  const auto contours = trace_contours(fg);

  SegOutcome out;
  out.frame_id = frame_id;
  std::optional<std::size_t> best;
  CandidateCheck best_check;
  BinaryMask best_region(1, 1);
  for (std::size_t i = 0; i < contours.size(); ++i) {
    BinaryMask region = fill_contour(contours[i], fg.width(), fg.height());
    const CandidateCheck check = check_candidate(contours[i], region, template_hu, p);
    if (const auto why = check.first_failure()) {
      out.rejection_log.emplace_back(i, *why);
      continue;
    }
    const bool better = !best || check.area > best_check.area ||
                        (check.area == best_check.area && check.match_distance < best_check.match_distance);
    if (better) {
      best = i;
      best_check = check;
      best_region = std::move(region);
    }
  }
  if (best) {
    out.mask = std::move(best_region);
    out.contour = contours[*best];
    out.area = best_check.area;
    out.rect = best_check.rect;
    out.match_distance = best_check.match_distance;
  }
  return out;
}

inline SegOutcome segment_threshold(const DepthFrame& frame, const ThresholdParams& p) {
  return segment_threshold(frame.frame_id, frame.color, p);
}

/// Mask for `frame_id` from externally produced polygon labels.
inline SegOutcome segment_from_labels(const std::string& frame_id, const std::vector<MaskLabel>& labels, int width,
                                      int height) {
  const MaskLabel* match = nullptr;
  for (const auto& l : labels) {
    if (l.frame_id != frame_id) continue;
    if (match) fail(ErrorKind::DuplicateLabel, "more than one label for frame", frame_id);
    match = &l;
  }
  SegOutcome out;
  out.frame_id = frame_id;
  if (!match) return out;
  BinaryMask mask = rasterize_polygon(match->polygon, width, height);
  if (mask.empty()) return out;
  auto contours = trace_contours(mask);
  std::size_t pick = 0;
  double pick_area = -1.0;
  for (std::size_t i = 0; i < contours.size(); ++i) {
    const double a = contour_area(contours[i]);
    if (a > pick_area) {
      pick = i;
      pick_area = a;
    }
  }
  out.area = static_cast<double>(mask.count());
  out.rect = mask_bounds(mask);
  out.contour = std::move(contours[pick]);
  out.mask = std::move(mask);
  return out;
}

/// Body of segmentation.csv (the caller prepends the provenance line).
inline std::string format_segmentation_csv(const std::vector<SegOutcome>& outcomes) {
  std::string out = "frame_id,success,area,bbox_x,bbox_y,bbox_w,bbox_h,match_distance,rejections\n";
  for (const auto& o : outcomes) {
    out += o.frame_id + ',' + (o.success() ? "1" : "0") + ',';
    if (o.success()) {
      out += text::format_double(o.area) + ',' + std::to_string(o.rect.x) + ',' + std::to_string(o.rect.y) + ',' +
             std::to_string(o.rect.width) + ',' + std::to_string(o.rect.height) + ',';
      out += std::isnan(o.match_distance) ? std::string("NA") : text::format_double(o.match_distance);
    } else {
      out += "NA,NA,NA,NA,NA,NA";
    }
    out += ',';
    for (std::size_t k = 0; k < o.rejection_log.size(); ++k) {
      if (k) out += ';';
      out += std::to_string(o.rejection_log[k].first) + ':' + std::string(to_string(o.rejection_log[k].second));
    }
    out += '\n';
  }
  return out;
}

/// Fraction of outcomes with a mask.
inline double success_rate(const std::vector<SegOutcome>& outcomes) {
  if (outcomes.empty()) return 0.0;
  std::size_t ok = 0;
  for (const auto& o : outcomes) ok += o.success() ? 1 : 0;
  return static_cast<double>(ok) / static_cast<double>(outcomes.size());
}

}  // namespace calfweight
