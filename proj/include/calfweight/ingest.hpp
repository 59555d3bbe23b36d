#pragma once

// Dataset loaders and writers: observation manifest, depth-map CSVs and
// polygon label files. Loaders never repair input; every defect is raised as
// a typed error naming the file and line or record.

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <system_error>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "calfweight/error.hpp"
#include "calfweight/imgcore.hpp"

namespace calfweight {

// ---------------------------------------------------------------------------
// Text helpers shared by the CSV readers and writers

namespace text {

inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::IoError, "cannot open file for reading", path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void write_file(const std::filesystem::path& path, std::string_view content) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(ErrorKind::IoError, "cannot open file for writing", path.string());
  out.write(content.data(), static_cast<std::streamsize>(content.size()));
  if (!out) fail(ErrorKind::IoError, "write failed", path.string());
}

/// Splits on LF, dropping a trailing CR from each line.
inline std::vector<std::string_view> lines(std::string_view s) {
  std::vector<std::string_view> out;
  std::size_t pos = 0;
  while (pos < s.size()) {
    std::size_t end = s.find('\n', pos);
    if (end == std::string_view::npos) end = s.size();
    std::string_view line = s.substr(pos, end - pos);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    out.push_back(line);
    pos = end + 1;
  }
  return out;
}

inline std::vector<std::string_view> split(std::string_view s, char sep) {
  std::vector<std::string_view> out;
  std::size_t pos = 0;
  for (;;) {
    const std::size_t end = s.find(sep, pos);
    if (end == std::string_view::npos) {
      out.push_back(s.substr(pos));
      return out;
    }
    out.push_back(s.substr(pos, end - pos));
    pos = end + 1;
  }
}

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t')) s.remove_suffix(1);
  return s;
}

inline std::optional<double> parse_double(std::string_view s) {
  s = trim(s);
  if (s.empty()) return std::nullopt;
  if (s.front() == '+') s.remove_prefix(1);
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || ptr != s.data() + s.size() || !std::isfinite(v)) return std::nullopt;
  return v;
}

inline std::optional<long long> parse_int(std::string_view s) {
  s = trim(s);
  if (s.empty()) return std::nullopt;
  long long v = 0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || ptr != s.data() + s.size()) return std::nullopt;
  return v;
}

/// Shortest decimal text that parses back to the same double.
inline std::string format_double(double v) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  if (ec != std::errc{}) return "nan";
  return std::string(buf, ptr);
}

inline std::string locate(const std::filesystem::path& path, std::size_t line) {
  return path.string() + ":" + std::to_string(line);
}

}  // namespace text

// ---------------------------------------------------------------------------
// Dates

/// Calendar date in ISO-8601 (YYYY-MM-DD) form.
class Date {
 public:
  Date() = default;
  explicit Date(std::chrono::sys_days days) : days_(days) {}

  static std::optional<Date> parse(std::string_view s) {
    s = text::trim(s);
    if (s.size() != 10 || s[4] != '-' || s[7] != '-') return std::nullopt;
    const auto y = text::parse_int(s.substr(0, 4));
    const auto m = text::parse_int(s.substr(5, 2));
    const auto d = text::parse_int(s.substr(8, 2));
    if (!y || !m || !d) return std::nullopt;
    const std::chrono::year_month_day ymd{std::chrono::year(static_cast<int>(*y)),
                                          std::chrono::month(static_cast<unsigned>(*m)),
                                          std::chrono::day(static_cast<unsigned>(*d))};
    if (!ymd.ok()) return std::nullopt;
    return Date(std::chrono::sys_days(ymd));
  }

  [[nodiscard]] std::string iso() const {
    const std::chrono::year_month_day ymd(days_);
    char buf[16];
    std::snprintf(buf, sizeof(buf), "%04d-%02u-%02u", static_cast<int>(ymd.year()),
                  static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()));
    return buf;
  }

  [[nodiscard]] Date plus_days(int n) const { return Date(days_ + std::chrono::days(n)); }
  [[nodiscard]] long days_since_epoch() const { return days_.time_since_epoch().count(); }

  friend auto operator<=>(const Date&, const Date&) = default;

 private:
  std::chrono::sys_days days_{};
};

// ---------------------------------------------------------------------------
// Manifest

struct CalfObservation {
  std::string calf_id;
  Date obs_date;
  int age_days = 0;
  std::optional<double> body_weight_lb;
  std::vector<std::string> frame_ids;

  friend bool operator==(const CalfObservation&, const CalfObservation&) = default;
};

inline constexpr std::string_view kManifestHeader = "calf_id,obs_date,age_days,body_weight_lb,frame_id";

/// Parses manifest text (one row per frame) into observations grouped by
/// (calf, date). Calves keep their first-appearance order; each calf's
/// observations are sorted by date and must have strictly increasing age.
inline std::vector<CalfObservation> parse_manifest(std::string_view content, const std::string& origin = "manifest") {
  const auto rows = text::lines(content);
  if (rows.empty() || text::trim(rows[0]).empty()) fail(ErrorKind::SchemaError, "missing header row", origin);
  const auto header = text::split(rows[0], ',');
  const std::vector<std::string_view> required{"calf_id", "obs_date", "age_days", "body_weight_lb", "frame_id"};
  std::vector<std::size_t> col(required.size());
  for (std::size_t r = 0; r < required.size(); ++r) {
    const auto it = std::find_if(header.begin(), header.end(),
                                 [&](std::string_view h) { return text::trim(h) == required[r]; });
    if (it == header.end()) fail(ErrorKind::SchemaError, "missing column", std::string(required[r]));
    col[r] = static_cast<std::size_t>(it - header.begin());
  }

  struct Group {
    CalfObservation obs;
    std::size_t first_line;
  };
  std::vector<std::string> calf_order;
  std::map<std::string, std::map<Date, Group>> by_calf;
  std::set<std::tuple<std::string, Date, std::string>> seen;

  for (std::size_t ln = 1; ln < rows.size(); ++ln) {
    const std::string_view row = rows[ln];
    if (text::trim(row).empty()) continue;
    const std::string where = origin + ":" + std::to_string(ln + 1);
    const auto fields = text::split(row, ',');
    if (fields.size() != header.size()) fail(ErrorKind::ParseError, "wrong field count", where);
    const std::string calf(text::trim(fields[col[0]]));
    const std::string frame(text::trim(fields[col[4]]));
    if (calf.empty()) fail(ErrorKind::ParseError, "empty calf_id", where);
    if (frame.empty()) fail(ErrorKind::ParseError, "empty frame_id", where);
    const auto date = Date::parse(fields[col[1]]);
    if (!date) fail(ErrorKind::ParseError, "bad obs_date", where);
    const auto age = text::parse_int(fields[col[2]]);
    if (!age || *age < 0) fail(ErrorKind::ParseError, "bad age_days", where);
    std::optional<double> weight;
    if (!text::trim(fields[col[3]]).empty()) {
      weight = text::parse_double(fields[col[3]]);
      if (!weight || *weight <= 0.0) fail(ErrorKind::ParseError, "bad body_weight_lb", where);
    }
    if (!seen.emplace(calf, *date, frame).second) {
      fail(ErrorKind::DuplicateRecord, "duplicate (calf_id, obs_date, frame_id)", where);
    }
    if (!by_calf.count(calf)) calf_order.push_back(calf);
    auto& dates = by_calf[calf];
    auto it = dates.find(*date);
    if (it == dates.end()) {
      CalfObservation obs{calf, *date, static_cast<int>(*age), weight, {frame}};
      dates.emplace(*date, Group{std::move(obs), ln + 1});
    } else {
      auto& obs = it->second.obs;
      if (obs.age_days != *age || obs.body_weight_lb != weight) {
        fail(ErrorKind::ConsistencyError, "rows of one observation disagree on age or weight (" + where + ")", calf);
      }
      obs.frame_ids.push_back(frame);
    }
  }

  std::vector<CalfObservation> out;
  for (const auto& calf : calf_order) {
    int prev_age = -1;
    for (auto& [date, group] : by_calf[calf]) {
      if (group.obs.age_days <= prev_age) {
        fail(ErrorKind::ConsistencyError, "age does not increase with obs_date at " + date.iso(), calf);
      }
      prev_age = group.obs.age_days;
      out.push_back(std::move(group.obs));
    }
  }
  return out;
}

inline std::vector<CalfObservation> load_manifest(const std::filesystem::path& path) {
  return parse_manifest(text::read_file(path), path.string());
}

inline std::string format_manifest(const std::vector<CalfObservation>& observations) {
  std::string out(kManifestHeader);
  out += '\n';
  for (const auto& o : observations) {
    for (const auto& f : o.frame_ids) {
      out += o.calf_id + ',' + o.obs_date.iso() + ',' + std::to_string(o.age_days) + ',';
      if (o.body_weight_lb) out += text::format_double(*o.body_weight_lb);
      out += ',' + f + '\n';
    }
  }
  return out;
}

inline void write_manifest(const std::filesystem::path& path, const std::vector<CalfObservation>& observations) {
  text::write_file(path, format_manifest(observations));
}

// ---------------------------------------------------------------------------
// Depth maps

/// Row-major depth in millimetres; 0 marks a missing sample.
struct DepthGrid {
  int width = 0;
  int height = 0;
  std::vector<float> mm;

  [[nodiscard]] float at(int x, int y) const noexcept {
    return mm[static_cast<std::size_t>(y) * static_cast<std::size_t>(width) + static_cast<std::size_t>(x)];
  }
  float& at(int x, int y) noexcept {
    return mm[static_cast<std::size_t>(y) * static_cast<std::size_t>(width) + static_cast<std::size_t>(x)];
  }

  friend bool operator==(const DepthGrid&, const DepthGrid&) = default;
};

inline DepthGrid parse_depth_csv(std::string_view content, int expected_w, int expected_h,
                                 const std::string& origin = "depth") {
  DepthGrid grid;
  grid.width = -1;
  auto rows = text::lines(content);
  while (!rows.empty() && text::trim(rows.back()).empty()) rows.pop_back();
  for (std::size_t r = 0; r < rows.size(); ++r) {
    const std::string where = origin + ":" + std::to_string(r + 1);
    const auto fields = text::split(rows[r], ',');
    if (grid.width < 0) {
      grid.width = static_cast<int>(fields.size());
      grid.mm.reserve(static_cast<std::size_t>(std::max(expected_w, 1)) * static_cast<std::size_t>(std::max(expected_h, 1)));
    } else if (static_cast<int>(fields.size()) != grid.width) {
      fail(ErrorKind::ShapeError, "ragged row", where);
    }
    for (const auto f : fields) {
      const auto v = text::parse_double(f);
      if (!v || *v < 0.0) fail(ErrorKind::ParseError, "bad depth value", where);
      grid.mm.push_back(static_cast<float>(*v));
    }
  }
  grid.height = static_cast<int>(rows.size());
  if (grid.width < 0) grid.width = 0;
  if (grid.width != expected_w || grid.height != expected_h) {
    fail(ErrorKind::PairMismatch,
         "depth map is " + std::to_string(grid.width) + "x" + std::to_string(grid.height) + ", expected " +
             std::to_string(expected_w) + "x" + std::to_string(expected_h),
         origin);
  }
  return grid;
}

inline DepthGrid load_depth_csv(const std::filesystem::path& path, int expected_w, int expected_h) {
  return parse_depth_csv(text::read_file(path), expected_w, expected_h, path.string());
}

inline std::string format_depth_csv(const DepthGrid& grid) {
  std::string out;
  out.reserve(grid.mm.size() * 5);
  char buf[32];
  for (int y = 0; y < grid.height; ++y) {
    for (int x = 0; x < grid.width; ++x) {
      if (x) out += ',';
      const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), grid.at(x, y));
      out.append(buf, ptr);
    }
    out += '\n';
  }
  return out;
}

inline void write_depth_csv(const std::filesystem::path& path, const DepthGrid& grid) {
  text::write_file(path, format_depth_csv(grid));
}

/// Colour frame paired with its depth map.
struct DepthFrame {
  std::string frame_id;
  Raster8 color;
  DepthGrid depth;
  double camera_height_mm = 1510.0;
};

inline DepthFrame make_depth_frame(std::string frame_id, Raster8 color, DepthGrid depth, double camera_height_mm) {
  if (color.channels() != 3) fail(ErrorKind::ChannelMismatch, "colour frame must be RGB", frame_id);
  if (depth.width != color.width() || depth.height != color.height()) {
    fail(ErrorKind::PairMismatch, "depth map and colour frame sizes differ", frame_id);
  }
  if (!(camera_height_mm > 0.0)) fail(ErrorKind::InvalidParams, "camera height must be positive", frame_id);
  return DepthFrame{std::move(frame_id), std::move(color), std::move(depth), camera_height_mm};
}

// ---------------------------------------------------------------------------
// Polygon labels (JSON lines)

struct MaskLabel {
  std::string frame_id;
  std::vector<Point2d> polygon;

  friend bool operator==(const MaskLabel&, const MaskLabel&) = default;
};

inline std::vector<MaskLabel> parse_mask_labels(std::string_view content, const std::string& origin = "labels") {
  std::vector<MaskLabel> out;
  const auto rows = text::lines(content);
  for (std::size_t ln = 0; ln < rows.size(); ++ln) {
    if (text::trim(rows[ln]).empty()) continue;
    const std::string where = origin + ":" + std::to_string(ln + 1);
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(rows[ln]);
    } catch (const nlohmann::json::parse_error&) {
      fail(ErrorKind::ParseError, "invalid JSON", where);
    }
    if (!j.is_object() || !j.contains("frame_id") || !j["frame_id"].is_string() || !j.contains("polygon") ||
        !j["polygon"].is_array()) {
      fail(ErrorKind::ParseError, "record needs string frame_id and array polygon", where);
    }
    MaskLabel label;
    label.frame_id = j["frame_id"].get<std::string>();
    const auto& coords = j["polygon"];
    if (coords.size() % 2 != 0) fail(ErrorKind::ParseError, "odd coordinate count", where);
    for (std::size_t i = 0; i < coords.size(); i += 2) {
      if (!coords[i].is_number() || !coords[i + 1].is_number()) {
        fail(ErrorKind::ParseError, "non-numeric coordinate", where);
      }
      const double x = coords[i].get<double>();
      const double y = coords[i + 1].get<double>();
      if (!std::isfinite(x) || !std::isfinite(y)) fail(ErrorKind::ParseError, "non-finite coordinate", where);
      label.polygon.push_back({x, y});
    }
    if (label.polygon.size() < 3) fail(ErrorKind::DegeneratePolygon, "polygon needs >= 3 vertices", label.frame_id);
    out.push_back(std::move(label));
  }
  return out;
}

inline std::vector<MaskLabel> load_mask_labels(const std::filesystem::path& path) {
  return parse_mask_labels(text::read_file(path), path.string());
}

inline std::string format_mask_labels(const std::vector<MaskLabel>& labels) {
  std::string out;
  for (const auto& l : labels) {
    nlohmann::json coords = nlohmann::json::array();
    for (const auto& p : l.polygon) {
      coords.push_back(p.x);
      coords.push_back(p.y);
    }
    nlohmann::json rec;
    rec["frame_id"] = l.frame_id;
    rec["polygon"] = std::move(coords);
    out += rec.dump() + '\n';
  }
  return out;
}

inline void write_mask_labels(const std::filesystem::path& path, const std::vector<MaskLabel>& labels) {
  text::write_file(path, format_mask_labels(labels));
}

// ---------------------------------------------------------------------------
// Bundle layout

/// On-disk layout of a dataset bundle.
struct DatasetLayout {
  std::filesystem::path root;

  [[nodiscard]] std::filesystem::path manifest() const { return root / "manifest.csv"; }
  [[nodiscard]] std::filesystem::path labels() const { return root / "labels.jsonl"; }
  [[nodiscard]] std::filesystem::path template_mask() const { return root / "template.png"; }
  [[nodiscard]] std::filesystem::path frame_png(const std::string& id) const { return root / "frames" / (id + ".png"); }
  [[nodiscard]] std::filesystem::path depth_csv(const std::string& id) const { return root / "depth" / (id + ".csv"); }
};

}  // namespace calfweight
