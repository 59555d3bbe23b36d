#pragma once

// Raster and geometry primitives used by the threshold segmentation path:
// hue extraction, thresholding, square-kernel morphology, border flood-fill
// hole filling, Moore boundary tracing, pixel-exact moments and polygon fill.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <deque>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "calfweight/error.hpp"

namespace calfweight {

struct Point {
  int x = 0;
  int y = 0;
  friend constexpr bool operator==(const Point&, const Point&) = default;
};

struct Point2d {
  double x = 0.0;
  double y = 0.0;
  friend constexpr bool operator==(const Point2d&, const Point2d&) = default;
};

struct Rect {
  int x = 0;
  int y = 0;
  int width = 0;
  int height = 0;
  friend constexpr bool operator==(const Rect&, const Rect&) = default;
};

/// Row-major 8-bit raster with one or three interleaved channels.
class Raster8 {
 public:
  Raster8(int width, int height, int channels)
      : Raster8(width, height, channels,
                std::vector<std::uint8_t>(checked_size(width, height, channels), 0)) {}

  Raster8(int width, int height, int channels, std::vector<std::uint8_t> data)
      : width_(width), height_(height), channels_(channels), data_(std::move(data)) {
    if (data_.size() != checked_size(width, height, channels)) {
      fail(ErrorKind::ShapeError, "raster data length does not match dimensions");
    }
  }

  [[nodiscard]] int width() const noexcept { return width_; }
  [[nodiscard]] int height() const noexcept { return height_; }
  [[nodiscard]] int channels() const noexcept { return channels_; }

  [[nodiscard]] std::uint8_t at(int x, int y, int c = 0) const noexcept {
    return data_[index(x, y, c)];
  }
  std::uint8_t& at(int x, int y, int c = 0) noexcept { return data_[index(x, y, c)]; }

  [[nodiscard]] std::span<const std::uint8_t> data() const noexcept { return data_; }
  [[nodiscard]] std::span<std::uint8_t> data() noexcept { return data_; }

  friend bool operator==(const Raster8&, const Raster8&) = default;

 private:
  static std::size_t checked_size(int w, int h, int c) {
    if (w < 1 || h < 1) fail(ErrorKind::ShapeError, "raster dimensions must be >= 1");
    if (c != 1 && c != 3) fail(ErrorKind::ChannelMismatch, "raster must have 1 or 3 channels");
    return static_cast<std::size_t>(w) * static_cast<std::size_t>(h) * static_cast<std::size_t>(c);
  }

  [[nodiscard]] std::size_t index(int x, int y, int c) const noexcept {
    return (static_cast<std::size_t>(y) * static_cast<std::size_t>(width_) + static_cast<std::size_t>(x)) *
               static_cast<std::size_t>(channels_) +
           static_cast<std::size_t>(c);
  }

  int width_;
  int height_;
  int channels_;
  std::vector<std::uint8_t> data_;
};

/// Row-major boolean grid; one byte per pixel (0 or 1).
class BinaryMask {
 public:
  BinaryMask(int width, int height) : width_(width), height_(height) {
    if (width < 1 || height < 1) fail(ErrorKind::ShapeError, "mask dimensions must be >= 1");
    bits_.assign(static_cast<std::size_t>(width) * static_cast<std::size_t>(height), 0);
  }

  BinaryMask(int width, int height, std::vector<std::uint8_t> bits) : BinaryMask(width, height) {
    if (bits.size() != bits_.size()) fail(ErrorKind::ShapeError, "mask bit count does not match dimensions");
    for (std::size_t i = 0; i < bits.size(); ++i) bits_[i] = bits[i] ? 1 : 0;
  }

  [[nodiscard]] int width() const noexcept { return width_; }
  [[nodiscard]] int height() const noexcept { return height_; }
  [[nodiscard]] std::size_t size() const noexcept { return bits_.size(); }

  [[nodiscard]] bool inside(int x, int y) const noexcept {
    return x >= 0 && y >= 0 && x < width_ && y < height_;
  }
  [[nodiscard]] bool test(int x, int y) const noexcept { return bits_[index(x, y)] != 0; }
  /// Out-of-bounds reads as clear.
  [[nodiscard]] bool test_or_clear(int x, int y) const noexcept { return inside(x, y) && test(x, y); }
  void set(int x, int y, bool value = true) noexcept { bits_[index(x, y)] = value ? 1 : 0; }

  [[nodiscard]] std::span<const std::uint8_t> bits() const noexcept { return bits_; }
  [[nodiscard]] std::span<std::uint8_t> bits() noexcept { return bits_; }

  [[nodiscard]] std::size_t count() const noexcept {
    return static_cast<std::size_t>(std::count(bits_.begin(), bits_.end(), std::uint8_t{1}));
  }
  [[nodiscard]] bool empty() const noexcept {
    return std::find(bits_.begin(), bits_.end(), std::uint8_t{1}) == bits_.end();
  }

  friend bool operator==(const BinaryMask&, const BinaryMask&) = default;

 private:
  [[nodiscard]] std::size_t index(int x, int y) const noexcept {
    return static_cast<std::size_t>(y) * static_cast<std::size_t>(width_) + static_cast<std::size_t>(x);
  }

  int width_;
  int height_;
  std::vector<std::uint8_t> bits_;
};

/// Ordered outer-border pixels of one 8-connected component.
struct Contour {
  std::vector<Point> points;
  friend bool operator==(const Contour&, const Contour&) = default;
};

/// Square kernel of side 2 * radius + 1.
struct StructuringElement {
  int radius = 1;

  [[nodiscard]] int side() const noexcept { return 2 * radius + 1; }
  void validate() const {
    if (radius < 1) fail(ErrorKind::InvalidParams, "structuring element radius must be >= 1");
  }
};

enum class MorphOp { Erode, Dilate, Open, Close };

// ---------------------------------------------------------------------------
// Set algebra helpers

inline void require_same_shape(const BinaryMask& a, const BinaryMask& b) {
  if (a.width() != b.width() || a.height() != b.height()) {
    fail(ErrorKind::ShapeError, "mask dimensions differ");
  }
}

inline BinaryMask complement(const BinaryMask& m) {
  BinaryMask out(m.width(), m.height());
  auto src = m.bits();
  auto dst = out.bits();
  for (std::size_t i = 0; i < src.size(); ++i) dst[i] = src[i] ? 0 : 1;
  return out;
}

inline std::size_t intersection_count(const BinaryMask& a, const BinaryMask& b) {
  require_same_shape(a, b);
  std::size_t n = 0;
  auto pa = a.bits();
  auto pb = b.bits();
  for (std::size_t i = 0; i < pa.size(); ++i) n += static_cast<std::size_t>(pa[i] & pb[i]);
  return n;
}

/// True when every set pixel of `inner` is also set in `outer`.
inline bool is_subset(const BinaryMask& inner, const BinaryMask& outer) {
  require_same_shape(inner, outer);
  auto pi = inner.bits();
  auto po = outer.bits();
  for (std::size_t i = 0; i < pi.size(); ++i) {
    if (pi[i] && !po[i]) return false;
  }
  return true;
}

/// Tight box around the set pixels; zero-sized when the mask is empty.
inline Rect mask_bounds(const BinaryMask& m) {
  int x0 = m.width();
  int y0 = m.height();
  int x1 = -1;
  int y1 = -1;
  for (int y = 0; y < m.height(); ++y) {
    for (int x = 0; x < m.width(); ++x) {
      if (!m.test(x, y)) continue;
      x0 = std::min(x0, x);
      x1 = std::max(x1, x);
      y0 = std::min(y0, y);
      y1 = std::max(y1, y);
    }
  }
  if (x1 < 0) return {};
  return {x0, y0, x1 - x0 + 1, y1 - y0 + 1};
}

// ---------------------------------------------------------------------------
// Color and thresholding

/// Hue on the halved 8-bit scale [0, 179]; achromatic pixels map to 0.
inline std::uint8_t hue_of(std::uint8_t r, std::uint8_t g, std::uint8_t b) noexcept {
  const int mx = std::max({r, g, b});
  const int mn = std::min({r, g, b});
  if (mx == mn) return 0;
  const double diff = mx - mn;
  double deg = 0.0;
  if (mx == r) {
    deg = 60.0 * (g - b) / diff;
  } else if (mx == g) {
    deg = 120.0 + 60.0 * (b - r) / diff;
  } else {
    deg = 240.0 + 60.0 * (r - g) / diff;
  }
  if (deg < 0.0) deg += 360.0;
  const int halved = static_cast<int>(std::lround(deg / 2.0));
  return static_cast<std::uint8_t>(halved % 180);
}

inline Raster8 rgb_to_hue(const Raster8& img) {
  if (img.channels() != 3) fail(ErrorKind::ChannelMismatch, "hue extraction needs a 3-channel image");
  Raster8 out(img.width(), img.height(), 1);
  auto src = img.data();
  auto dst = out.data();
  for (std::size_t i = 0; i < dst.size(); ++i) {
    dst[i] = hue_of(src[3 * i], src[3 * i + 1], src[3 * i + 2]);
  }
  return out;
}

/// Bit set iff sample > threshold.
inline BinaryMask binary_threshold(const Raster8& channel, int threshold) {
  if (channel.channels() != 1) fail(ErrorKind::ChannelMismatch, "thresholding needs a single channel");
  BinaryMask out(channel.width(), channel.height());
  auto src = channel.data();
  auto dst = out.bits();
  for (std::size_t i = 0; i < dst.size(); ++i) dst[i] = src[i] > threshold ? 1 : 0;
  return out;
}

// ---------------------------------------------------------------------------
// Morphology

namespace detail {

// out[p] = 1 iff some in-bounds pixel within the square window around p
// equals `target`. Separable: rows first, then columns, using running counts.
inline std::vector<std::uint8_t> window_any(std::span<const std::uint8_t> src, int w, int h, int r,
                                            std::uint8_t target) {
  std::vector<std::uint8_t> rows(src.size(), 0);
  std::vector<int> prefix(static_cast<std::size_t>(std::max(w, h)) + 1, 0);
  for (int y = 0; y < h; ++y) {
    const std::size_t base = static_cast<std::size_t>(y) * static_cast<std::size_t>(w);
    for (int x = 0; x < w; ++x) prefix[x + 1] = prefix[x] + (src[base + x] == target ? 1 : 0);
    for (int x = 0; x < w; ++x) {
      const int lo = std::max(0, x - r);
      const int hi = std::min(w - 1, x + r);
      rows[base + x] = prefix[hi + 1] - prefix[lo] > 0 ? 1 : 0;
    }
  }
  std::vector<std::uint8_t> out(src.size(), 0);
  for (int x = 0; x < w; ++x) {
    for (int y = 0; y < h; ++y) {
      prefix[y + 1] = prefix[y] + rows[static_cast<std::size_t>(y) * w + x];
    }
    for (int y = 0; y < h; ++y) {
      const int lo = std::max(0, y - r);
      const int hi = std::min(h - 1, y + r);
      out[static_cast<std::size_t>(y) * w + x] = prefix[hi + 1] - prefix[lo] > 0 ? 1 : 0;
    }
  }
  return out;
}

}  // namespace detail

/// Out-of-raster pixels count as background for dilation and foreground for
/// erosion, which makes dilate(m) == complement(erode(complement(m))) exact.
inline BinaryMask dilate(const BinaryMask& m, const StructuringElement& se) {
  se.validate();
  return BinaryMask(m.width(), m.height(), detail::window_any(m.bits(), m.width(), m.height(), se.radius, 1));
}

inline BinaryMask erode(const BinaryMask& m, const StructuringElement& se) {
  se.validate();
  auto hit_background = detail::window_any(m.bits(), m.width(), m.height(), se.radius, 0);
  for (auto& v : hit_background) v = v ? 0 : 1;
  return BinaryMask(m.width(), m.height(), std::move(hit_background));
}

inline BinaryMask morphology(const BinaryMask& m, MorphOp op, const StructuringElement& se) {
  switch (op) {
    case MorphOp::Erode: return erode(m, se);
    case MorphOp::Dilate: return dilate(m, se);
    case MorphOp::Open: return dilate(erode(m, se), se);
    case MorphOp::Close: return erode(dilate(m, se), se);
  }
  return m;
}

/// Sets every background pixel not 4-connected to the raster border.
inline BinaryMask fill_holes(const BinaryMask& m) {
  const int w = m.width();
  const int h = m.height();
  std::vector<std::uint8_t> reached(m.size(), 0);
  std::vector<int> stack;
  auto seed = [&](int x, int y) {
    const std::size_t i = static_cast<std::size_t>(y) * w + x;
    if (!m.test(x, y) && !reached[i]) {
      reached[i] = 1;
      stack.push_back(static_cast<int>(i));
    }
  };
  for (int x = 0; x < w; ++x) {
    seed(x, 0);
    seed(x, h - 1);
  }
  for (int y = 0; y < h; ++y) {
    seed(0, y);
    seed(w - 1, y);
  }
  while (!stack.empty()) {
    const int i = stack.back();
    stack.pop_back();
    const int x = i % w;
    const int y = i / w;
    if (x > 0) seed(x - 1, y);
    if (x + 1 < w) seed(x + 1, y);
    if (y > 0) seed(x, y - 1);
    if (y + 1 < h) seed(x, y + 1);
  }
  BinaryMask out(w, h);
  auto dst = out.bits();
  for (std::size_t i = 0; i < dst.size(); ++i) dst[i] = reached[i] ? 0 : 1;
  return out;
}

// ---------------------------------------------------------------------------
// Contours

namespace detail {

// Clockwise on screen (y grows downward): E, SE, S, SW, W, NW, N, NE.
inline constexpr std::array<Point, 8> kMooreDirs{{{1, 0}, {1, 1}, {0, 1}, {-1, 1}, {-1, 0}, {-1, -1}, {0, -1}, {1, -1}}};

inline int direction_of(int dx, int dy) noexcept {
  for (int d = 0; d < 8; ++d) {
    if (kMooreDirs[d].x == dx && kMooreDirs[d].y == dy) return d;
  }
  return -1;
}

// Moore neighbour tracing from the topmost-leftmost pixel of a component.
// Stops when the walk is about to repeat its first move from the start.
inline Contour trace_from(const BinaryMask& m, Point start) {
  Contour c;
  c.points.push_back(start);
  Point cur = start;
  int back = 4;  // west of the start pixel is background by construction
  bool have_first = false;
  Point first{};
  for (;;) {
    int found = -1;
    Point next{};
    for (int i = 1; i <= 8; ++i) {
      const int d = (back + i) % 8;
      const Point cand{cur.x + kMooreDirs[d].x, cur.y + kMooreDirs[d].y};
      if (m.test_or_clear(cand.x, cand.y)) {
        found = d;
        next = cand;
        break;
      }
    }
    if (found < 0) break;  // isolated pixel
    if (have_first && cur == start && next == first) break;
    if (!have_first) {
      have_first = true;
      first = next;
    }
    const Point prev{cur.x + kMooreDirs[(found + 7) % 8].x, cur.y + kMooreDirs[(found + 7) % 8].y};
    back = direction_of(prev.x - next.x, prev.y - next.y);
    c.points.push_back(next);
    cur = next;
  }
  if (c.points.size() > 1 && c.points.back() == start) c.points.pop_back();
  return c;
}

}  // namespace detail

/// One outer contour per 8-connected component, in scanline discovery order.
inline std::vector<Contour> trace_contours(const BinaryMask& m) {
  const int w = m.width();
  std::vector<Contour> out;
  std::vector<std::uint8_t> seen(m.size(), 0);
  std::vector<int> stack;
  for (int y = 0; y < m.height(); ++y) {
    for (int x = 0; x < w; ++x) {
      const std::size_t i0 = static_cast<std::size_t>(y) * w + x;
      if (!m.test(x, y) || seen[i0]) continue;
      out.push_back(detail::trace_from(m, {x, y}));
      seen[i0] = 1;
      stack.push_back(static_cast<int>(i0));
      while (!stack.empty()) {
        const int i = stack.back();
        stack.pop_back();
        const int cx = i % w;
        const int cy = i / w;
        for (const auto& d : detail::kMooreDirs) {
          const int nx = cx + d.x;
          const int ny = cy + d.y;
          if (!m.test_or_clear(nx, ny)) continue;
          const std::size_t j = static_cast<std::size_t>(ny) * w + nx;
          if (!seen[j]) {
            seen[j] = 1;
            stack.push_back(static_cast<int>(j));
          }
        }
      }
    }
  }
  return out;
}

/// Region area in pixels: shoelace over the closed pixel-centre polygon plus
/// half the boundary step count plus one, so it equals the pixel count of a
/// hole-free component.
inline double contour_area(const Contour& c) {
  const auto& p = c.points;
  if (p.empty()) fail(ErrorKind::EmptyContour, "contour has no points");
  if (p.size() == 1) return 1.0;
  long long twice = 0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    const Point& a = p[i];
    const Point& b = p[(i + 1) % p.size()];
    twice += static_cast<long long>(a.x) * b.y - static_cast<long long>(b.x) * a.y;
  }
  return std::abs(static_cast<double>(twice)) / 2.0 + static_cast<double>(p.size()) / 2.0 + 1.0;
}

inline Rect bounding_rect(const Contour& c) {
  if (c.points.empty()) fail(ErrorKind::EmptyContour, "contour has no points");
  int x0 = std::numeric_limits<int>::max();
  int y0 = x0;
  int x1 = std::numeric_limits<int>::min();
  int y1 = x1;
  for (const auto& q : c.points) {
    x0 = std::min(x0, q.x);
    y0 = std::min(y0, q.y);
    x1 = std::max(x1, q.x);
    y1 = std::max(y1, q.y);
  }
  return {x0, y0, x1 - x0 + 1, y1 - y0 + 1};
}

// ---------------------------------------------------------------------------
// Moments and shape matching

using HuMoments = std::array<double, 7>;

/// Hu invariants of the region, each pixel treated as a unit square.
/// Raw sums are accumulated in integers relative to the region's bounding box
/// and central-moment numerators are formed exactly before the single
/// conversion to floating point, so translated copies give identical bits and
/// symmetric shapes give exact zeros for odd-order terms.
inline HuMoments hu_moments(const BinaryMask& m) {
  const Rect box = mask_bounds(m);
  if (box.width == 0) fail(ErrorKind::EmptyMask, "moments of an empty mask");
  using I = __int128;
  I s00 = 0, s10 = 0, s01 = 0, s20 = 0, s11 = 0, s02 = 0, s30 = 0, s21 = 0, s12 = 0, s03 = 0;
  for (int y = box.y; y < box.y + box.height; ++y) {
    const I ry = y - box.y;
    for (int x = box.x; x < box.x + box.width; ++x) {
      if (!m.test(x, y)) continue;
      const I rx = x - box.x;
      s00 += 1;
      s10 += rx;
      s01 += ry;
      s20 += rx * rx;
      s11 += rx * ry;
      s02 += ry * ry;
      s30 += rx * rx * rx;
      s21 += rx * rx * ry;
      s12 += rx * ry * ry;
      s03 += ry * ry * ry;
    }
  }
  const I n = s00;
  // N * mu_pq for second order, N^2 * mu_pq for third order.
  const I c20 = n * s20 - s10 * s10;
  const I c11 = n * s11 - s10 * s01;
  const I c02 = n * s02 - s01 * s01;
  const I c30 = n * n * s30 - 3 * n * s10 * s20 + 2 * s10 * s10 * s10;
  const I c03 = n * n * s03 - 3 * n * s01 * s02 + 2 * s01 * s01 * s01;
  const I c21 = n * n * s21 - n * s01 * s20 - 2 * n * s10 * s11 + 2 * s10 * s10 * s01;
  const I c12 = n * n * s12 - n * s10 * s02 - 2 * n * s01 * s11 + 2 * s01 * s01 * s10;

  const double nd = static_cast<double>(n);
  const double area2 = nd * nd;
  const double area25 = area2 * std::sqrt(nd);
  const double mu20 = static_cast<double>(c20) / nd + nd / 12.0;
  const double mu02 = static_cast<double>(c02) / nd + nd / 12.0;
  const double mu11 = static_cast<double>(c11) / nd;

  const double n20 = mu20 / area2;
  const double n02 = mu02 / area2;
  const double n11 = mu11 / area2;
  const double n30 = static_cast<double>(c30) / area2 / area25;
  const double n03 = static_cast<double>(c03) / area2 / area25;
  const double n21 = static_cast<double>(c21) / area2 / area25;
  const double n12 = static_cast<double>(c12) / area2 / area25;

  const double a = n30 + n12;
  const double b = n21 + n03;
  const double p = n30 - 3.0 * n12;
  const double q = 3.0 * n21 - n03;
  HuMoments h{};
  h[0] = n20 + n02;
  h[1] = (n20 - n02) * (n20 - n02) + 4.0 * n11 * n11;
  h[2] = p * p + q * q;
  h[3] = a * a + b * b;
  h[4] = p * a * (a * a - 3.0 * b * b) + q * b * (3.0 * a * a - b * b);
  h[5] = (n20 - n02) * (a * a - b * b) + 4.0 * n11 * a * b;
  h[6] = q * a * (a * a - 3.0 * b * b) - p * b * (3.0 * a * a - b * b);
  return h;
}

/// I1 distance between Hu signatures: sum |1/m_a - 1/m_b| with
/// m = sign(h) * log10|h|. Near-zero invariants are skipped.
inline double match_hu(const HuMoments& ha, const HuMoments& hb) {
  constexpr double kTiny = 1e-30;
  double dist = 0.0;
  for (std::size_t i = 0; i < ha.size(); ++i) {
    const double a = std::abs(ha[i]);
    const double b = std::abs(hb[i]);
    if (a < kTiny || b < kTiny) continue;
    const double ma = std::copysign(std::log10(a), ha[i]);
    const double mb = std::copysign(std::log10(b), hb[i]);
    if (ma == 0.0 || mb == 0.0) continue;
    dist += std::abs(1.0 / ma - 1.0 / mb);
  }
  return dist;
}

inline double match_shapes(const BinaryMask& a, const BinaryMask& b) {
  return match_hu(hu_moments(a), hu_moments(b));
}

// ---------------------------------------------------------------------------
// Polygon rasterization

namespace detail {

inline void draw_segment(BinaryMask& m, Point a, Point b) {
  int dx = std::abs(b.x - a.x);
  int dy = -std::abs(b.y - a.y);
  const int sx = a.x < b.x ? 1 : -1;
  const int sy = a.y < b.y ? 1 : -1;
  int err = dx + dy;
  for (;;) {
    if (m.inside(a.x, a.y)) m.set(a.x, a.y);
    if (a == b) break;
    const int e2 = 2 * err;
    if (e2 >= dy) {
      err += dy;
      a.x += sx;
    }
    if (e2 <= dx) {
      err += dx;
      a.y += sy;
    }
  }
}

inline Point rounded(const Point2d& p) {
  return {static_cast<int>(std::lround(p.x)), static_cast<int>(std::lround(p.y))};
}

}  // namespace detail

/// Even-odd scanline fill with pixel centres at integer coordinates; pixels on
/// the boundary are included. Output is clipped to the raster.
inline BinaryMask rasterize_polygon(std::span<const Point2d> pts, int width, int height) {
  if (pts.size() < 3) fail(ErrorKind::DegeneratePolygon, "polygon needs at least 3 vertices");
  BinaryMask out(width, height);
  double ymin = pts[0].y;
  double ymax = pts[0].y;
  for (const auto& p : pts) {
    if (!std::isfinite(p.x) || !std::isfinite(p.y)) {
      fail(ErrorKind::DegeneratePolygon, "polygon has a non-finite vertex");
    }
    ymin = std::min(ymin, p.y);
    ymax = std::max(ymax, p.y);
  }
  constexpr double kEps = 1e-9;
  const int row0 = std::max(0, static_cast<int>(std::ceil(ymin - kEps)));
  const int row1 = std::min(height - 1, static_cast<int>(std::floor(ymax + kEps)));
  std::vector<double> xs;
  for (int y = row0; y <= row1; ++y) {
    xs.clear();
    for (std::size_t i = 0; i < pts.size(); ++i) {
      const Point2d& a = pts[i];
      const Point2d& b = pts[(i + 1) % pts.size()];
      if ((a.y <= y && y < b.y) || (b.y <= y && y < a.y)) {
        xs.push_back(a.x + (y - a.y) * (b.x - a.x) / (b.y - a.y));
      }
    }
    std::sort(xs.begin(), xs.end());
    for (std::size_t k = 0; k + 1 < xs.size(); k += 2) {
      const int x0 = std::max(0, static_cast<int>(std::ceil(xs[k] - kEps)));
      const int x1 = std::min(width - 1, static_cast<int>(std::floor(xs[k + 1] + kEps)));
      for (int x = x0; x <= x1; ++x) out.set(x, y);
    }
  }
  for (std::size_t i = 0; i < pts.size(); ++i) {
    detail::draw_segment(out, detail::rounded(pts[i]), detail::rounded(pts[(i + 1) % pts.size()]));
  }
  return out;
}

inline std::vector<Point2d> to_polygon(const Contour& c) {
  std::vector<Point2d> poly;
  poly.reserve(c.points.size());
  for (const auto& p : c.points) poly.push_back({static_cast<double>(p.x), static_cast<double>(p.y)});
  return poly;
}

/// Filled region of a traced contour. Contours of one or two pixels are not
/// polygons; their pixels are set directly.
inline BinaryMask fill_contour(const Contour& c, int width, int height) {
  if (c.points.empty()) fail(ErrorKind::EmptyContour, "contour has no points");
  if (c.points.size() >= 3) {
    const auto poly = to_polygon(c);
    return rasterize_polygon(poly, width, height);
  }
  BinaryMask out(width, height);
  for (const auto& p : c.points) {
    if (out.inside(p.x, p.y)) out.set(p.x, p.y);
  }
  return out;
}

}  // namespace calfweight
