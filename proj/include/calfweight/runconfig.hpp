#pragma once

// Run configuration for the command-line workflows: an INI file read with
// Boost.PropertyTree, strict key checking, typed accessors, and the
// config hash stamped into every report.

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "calfweight/bodymetrics.hpp"
#include "calfweight/error.hpp"
#include "calfweight/ingest.hpp"
#include "calfweight/models.hpp"
#include "calfweight/segpipeline.hpp"
#include "calfweight/synthgen.hpp"

namespace calfweight {

inline std::uint64_t fnv1a64(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

inline std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

/// First line of every report: `# calfmetrics <command> config_hash=<hex> seed=<n>`.
inline std::string provenance_line(std::string_view command, std::string_view settings, std::uint64_t seed) {
  return "# calfmetrics " + std::string(command) + " config_hash=" + hex64(fnv1a64(settings)) +
         " seed=" + std::to_string(seed) + "\n";
}

class RunConfig {
 public:
  RunConfig() = default;

  static RunConfig parse(const std::string& text, std::filesystem::path base_dir = ".", std::string origin = "config") {
    RunConfig c;
    c.base_ = std::move(base_dir);
    c.origin_ = std::move(origin);
    std::istringstream in(text);
    try {
      boost::property_tree::ini_parser::read_ini(in, c.tree_);
    } catch (const boost::property_tree::ini_parser_error& e) {
      fail(ErrorKind::ConfigError, std::string("malformed config: ") + e.message() + " at line " + std::to_string(e.line()),
           c.origin_);
    }
    c.check_keys();
    return c;
  }

  static RunConfig load(const std::filesystem::path& path) {
    if (!std::filesystem::is_regular_file(path)) fail(ErrorKind::ConfigError, "config file not found", path.string());
    return parse(text::read_file(path), path.parent_path().empty() ? std::filesystem::path(".") : path.parent_path(),
                 path.string());
  }

  [[nodiscard]] bool has(const std::string& key) const { return tree_.get_child_optional(key).has_value(); }

  [[nodiscard]] std::optional<std::string> text(const std::string& key) const {
    const auto v = tree_.get_optional<std::string>(key);
    if (!v) return std::nullopt;
    return std::string(text::trim(*v));
  }

  [[nodiscard]] double number(const std::string& key, double fallback) const {
    const auto v = text(key);
    if (!v) return fallback;
    const auto d = text::parse_double(*v);
    if (!d) fail(ErrorKind::ConfigError, "'" + key + "' is not a number: " + *v, origin_);
    return *d;
  }

  [[nodiscard]] long long integer(const std::string& key, long long fallback) const {
    const auto v = text(key);
    if (!v) return fallback;
    const auto d = text::parse_int(*v);
    if (!d) fail(ErrorKind::ConfigError, "'" + key + "' is not an integer: " + *v, origin_);
    return *d;
  }

  [[nodiscard]] bool flag(const std::string& key, bool fallback) const {
    const auto v = text(key);
    if (!v) return fallback;
    if (*v == "true" || *v == "1" || *v == "yes") return true;
    if (*v == "false" || *v == "0" || *v == "no") return false;
    fail(ErrorKind::ConfigError, "'" + key + "' is not a boolean: " + *v, origin_);
  }

  /// "lo,hi" pair.
  [[nodiscard]] Interval interval(const std::string& key, Interval fallback) const {
    const auto v = text(key);
    if (!v) return fallback;
    const auto parts = text::split(*v, ',');
    if (parts.size() != 2) fail(ErrorKind::ConfigError, "'" + key + "' must be 'lo,hi'", origin_);
    const auto lo = text::parse_double(parts[0]), hi = text::parse_double(parts[1]);
    if (!lo || !hi) fail(ErrorKind::ConfigError, "'" + key + "' must be 'lo,hi'", origin_);
    return {*lo, *hi};
  }

  [[nodiscard]] std::vector<int> int_list(const std::string& key, std::vector<int> fallback) const {
    const auto v = text(key);
    if (!v) return fallback;
    return parse_int_list(*v, key);
  }

  /// Relative paths resolve against the config file's directory; the path
  /// must exist.
  [[nodiscard]] std::optional<std::filesystem::path> existing_path(const std::string& key) const {
    const auto v = text(key);
    if (!v) return std::nullopt;
    std::filesystem::path p(*v);
    if (p.is_relative()) p = base_ / p;
    if (!std::filesystem::exists(p)) fail(ErrorKind::ConfigError, "'" + key + "' does not exist: " + p.string(), origin_);
    return p;
  }

  /// Sorted `key=value` lines of every entry; input to the config hash.
  [[nodiscard]] std::string canonical() const {
    std::map<std::string, std::string> flat;
    for (const auto& [section, child] : tree_) {
      if (child.empty()) {
        flat[section] = std::string(text::trim(child.data()));
        continue;
      }
      for (const auto& [key, v] : child) flat[section + "." + key] = std::string(text::trim(v.data()));
    }
    std::string out;
    for (const auto& [k, v] : flat) out += k + "=" + v + "\n";
    return out;
  }

  [[nodiscard]] const std::string& origin() const { return origin_; }

  static std::vector<int> parse_int_list(std::string_view v, const std::string& what) {
    std::vector<int> out;
    for (auto part : text::split(v, ',')) {
      const auto d = text::parse_int(part);
      if (!d) fail(ErrorKind::ConfigError, "'" + what + "' must be a comma-separated integer list");
      out.push_back(static_cast<int>(*d));
    }
    return out;
  }

 private:
  void check_keys() const {
    static const std::map<std::string, std::set<std::string>> known{
        {"", {"seed"}},
        {"paths", {"data", "masks", "labels", "template"}},
        {"synth",
         {"n_calves", "obs_min", "obs_max", "frames_per_obs", "image_width", "image_height", "camera_height_mm",
          "blob_length_px", "blob_width_px", "peak_height_mm", "calf_height_jitter_mm", "dome", "first_age_days",
          "visit_gap_min", "visit_gap_max", "start_date", "missing_rate", "c0", "c1", "c2", "sigma_u", "sigma_e",
          "nonlinear", "step_lb", "step_volume", "distractor_rate", "fence_bars"}},
        {"threshold",
         {"hue_threshold", "shape_match_max", "area_min", "area_max", "extent_min", "extent_max", "kernel_radius"}},
        {"metrics", {"volume_mode", "camera_height_mm"}},
        {"gbm",
         {"learning_rate", "n_estimators", "l1_alpha", "l2_lambda", "max_depth", "min_samples_leaf", "search_iterations"}},
        {"cv", {"k", "repeats", "per_fold"}},
        {"longitudinal", {"ratios", "iterations", "min_series", "family"}},
    };
    for (const auto& [section, child] : tree_) {
      if (child.empty() && child.data().empty() && known.count(section) && !section.empty()) continue;  // empty section
      if (child.empty()) {
        if (!known.at("").count(section)) fail(ErrorKind::ConfigError, "unknown top-level key '" + section + "'", origin_);
        continue;
      }
      const auto it = known.find(section);
      if (it == known.end() || section.empty()) fail(ErrorKind::ConfigError, "unknown section [" + section + "]", origin_);
      for (const auto& [key, v] : child) {
        if (!it->second.count(key)) fail(ErrorKind::ConfigError, "unknown key '" + key + "' in [" + section + "]", origin_);
      }
    }
  }

  boost::property_tree::ptree tree_;
  std::filesystem::path base_ = ".";
  std::string origin_ = "config";
};

inline SynthConfig synth_config_from(const RunConfig& c, std::uint64_t seed) {
  SynthConfig s;
  auto i = [&](const char* key, int& v) { v = static_cast<int>(c.integer(std::string("synth.") + key, v)); };
  auto d = [&](const char* key, double& v) { v = c.number(std::string("synth.") + key, v); };
  auto r = [&](const char* key, Interval& v) { v = c.interval(std::string("synth.") + key, v); };
  i("n_calves", s.n_calves);
  i("obs_min", s.obs_min);
  i("obs_max", s.obs_max);
  i("frames_per_obs", s.frames_per_obs);
  i("image_width", s.image_width);
  i("image_height", s.image_height);
  d("camera_height_mm", s.camera_height_mm);
  r("blob_length_px", s.blob_length_px);
  r("blob_width_px", s.blob_width_px);
  r("peak_height_mm", s.peak_height_mm);
  d("calf_height_jitter_mm", s.calf_height_jitter_mm);
  d("dome", s.dome);
  r("first_age_days", s.first_age_days);
  i("visit_gap_min", s.visit_gap_min);
  i("visit_gap_max", s.visit_gap_max);
  s.start_date = c.text("synth.start_date").value_or(s.start_date);
  d("missing_rate", s.missing_rate);
  d("c0", s.c0);
  d("c1", s.c1);
  d("c2", s.c2);
  d("sigma_u", s.sigma_u);
  d("sigma_e", s.sigma_e);
  s.nonlinear = c.flag("synth.nonlinear", s.nonlinear);
  d("step_lb", s.step_lb);
  d("step_volume", s.step_volume);
  d("distractor_rate", s.distractor_rate);
  i("fence_bars", s.fence_bars);
  s.seed = seed;
  s.validate();
  return s;
}

/// Threshold settings; the template mask is loaded by the caller.
inline ThresholdParams threshold_params_from(const RunConfig& c) {
  ThresholdParams p;
  p.hue_threshold = static_cast<int>(c.integer("threshold.hue_threshold", p.hue_threshold));
  p.shape_match_max = c.number("threshold.shape_match_max", p.shape_match_max);
  p.area_min = c.number("threshold.area_min", p.area_min);
  p.area_max = c.number("threshold.area_max", p.area_max);
  p.extent_min = static_cast<int>(c.integer("threshold.extent_min", p.extent_min));
  p.extent_max = static_cast<int>(c.integer("threshold.extent_max", p.extent_max));
  p.kernel_radius = static_cast<int>(c.integer("threshold.kernel_radius", p.kernel_radius));
  return p;
}

/// `[gbm]` ranges are "lo,hi" pairs for the randomized search.
inline GbmSearchSpace gbm_space_from(const RunConfig& c) {
  GbmSearchSpace s;
  const auto lr = c.interval("gbm.learning_rate", {s.learning_rate_lo, s.learning_rate_hi});
  const auto ne = c.interval("gbm.n_estimators", {static_cast<double>(s.n_estimators_lo), static_cast<double>(s.n_estimators_hi)});
  const auto a = c.interval("gbm.l1_alpha", {s.alpha_lo, s.alpha_hi});
  const auto l = c.interval("gbm.l2_lambda", {s.lambda_lo, s.lambda_hi});
  s.learning_rate_lo = lr.lo;
  s.learning_rate_hi = lr.hi;
  s.n_estimators_lo = static_cast<int>(ne.lo);
  s.n_estimators_hi = static_cast<int>(ne.hi);
  s.alpha_lo = a.lo;
  s.alpha_hi = a.hi;
  s.lambda_lo = l.lo;
  s.lambda_hi = l.hi;
  s.max_depth = static_cast<int>(c.integer("gbm.max_depth", s.max_depth));
  s.min_samples_leaf = static_cast<int>(c.integer("gbm.min_samples_leaf", s.min_samples_leaf));
  try {
    s.validate();
  } catch (const Error& e) {
    fail(ErrorKind::ConfigError, "[gbm] " + e.detail(), c.origin());
  }
  return s;
}

}  // namespace calfweight
