#pragma once

// Shared helpers for the test suites: random masks and brute-force oracles
// that deliberately avoid the library's own code paths.

#include <cstdint>
#include <optional>
#include <vector>

#include "calfweight/error.hpp"
#include "calfweight/imgcore.hpp"
#include "calfweight/rng.hpp"

namespace calfweight::testing {

inline BinaryMask random_mask(Rng& rng, int w, int h, double density) {
  BinaryMask m(w, h);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      if (rng.uniform() < density) m.set(x, y);
  return m;
}

/// Random blobby mask: union of a few random filled rectangles and discs.
inline BinaryMask random_blobs(Rng& rng, int w, int h, int count) {
  BinaryMask m(w, h);
  for (int k = 0; k < count; ++k) {
    const int cx = static_cast<int>(rng.below(static_cast<std::uint64_t>(w)));
    const int cy = static_cast<int>(rng.below(static_cast<std::uint64_t>(h)));
    const int r = 1 + static_cast<int>(rng.below(static_cast<std::uint64_t>(std::max(2, w / 6))));
    const bool disc = rng.uniform() < 0.5;
    for (int y = cy - r; y <= cy + r; ++y)
      for (int x = cx - r; x <= cx + r; ++x) {
        if (!m.inside(x, y)) continue;
        if (disc && (x - cx) * (x - cx) + (y - cy) * (y - cy) > r * r) continue;
        m.set(x, y);
      }
  }
  return m;
}

/// Flood-fill component labels with 8-connectivity, recursive-free BFS
/// written independently of the library.
inline std::vector<std::vector<Point>> brute_components(const BinaryMask& m) {
  const int w = m.width();
  const int h = m.height();
  std::vector<int> lab(static_cast<std::size_t>(w) * h, -1);
  std::vector<std::vector<Point>> comps;
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      if (!m.test(x, y) || lab[y * w + x] >= 0) continue;
      const int id = static_cast<int>(comps.size());
      comps.emplace_back();
      std::vector<Point> queue{{x, y}};
      lab[y * w + x] = id;
      for (std::size_t q = 0; q < queue.size(); ++q) {
        const Point p = queue[q];
        comps[id].push_back(p);
        for (int dy = -1; dy <= 1; ++dy)
          for (int dx = -1; dx <= 1; ++dx) {
            const int nx = p.x + dx;
            const int ny = p.y + dy;
            if (nx < 0 || ny < 0 || nx >= w || ny >= h) continue;
            if (!m.test(nx, ny) || lab[ny * w + nx] >= 0) continue;
            lab[ny * w + nx] = id;
            queue.push_back({nx, ny});
          }
      }
    }
  return comps;
}

inline BinaryMask filled_rect(int w, int h, int x0, int y0, int rw, int rh) {
  BinaryMask m(w, h);
  for (int y = y0; y < y0 + rh; ++y)
    for (int x = x0; x < x0 + rw; ++x)
      if (m.inside(x, y)) m.set(x, y);
  return m;
}

inline BinaryMask filled_ellipse(int w, int h, double cx, double cy, double ax, double ay) {
  BinaryMask m(w, h);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      const double u = (x - cx) / ax;
      const double v = (y - cy) / ay;
      if (u * u + v * v <= 1.0) m.set(x, y);
    }
  return m;
}

inline double iou(const BinaryMask& a, const BinaryMask& b) {
  std::size_t inter = 0;
  std::size_t uni = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    inter += (a.bits()[i] && b.bits()[i]) ? 1 : 0;
    uni += (a.bits()[i] || b.bits()[i]) ? 1 : 0;
  }
  return uni == 0 ? 1.0 : static_cast<double>(inter) / static_cast<double>(uni);
}

/// The Error thrown by f, if any.
template <typename F>
std::optional<Error> error_of(F&& f) {
  try {
    f();
  } catch (const Error& e) {
    return e;
  }
  return std::nullopt;
}

template <typename F>
std::optional<ErrorKind> kind_of(F&& f) {
  const auto e = error_of(std::forward<F>(f));
  return e ? std::optional<ErrorKind>(e->kind()) : std::nullopt;
}

}  // namespace calfweight::testing
