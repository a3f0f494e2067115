#pragma once

// Binary edge masks and the small set of morphology helpers the pipeline
// shares (square dilation, 8-connected components).

#include <algorithm>
#include <cstdint>
#include <vector>

#include "geo/raster.hpp"
#include "geo/render.hpp"

namespace geo {

constexpr std::uint8_t kDefaultEdgeThreshold = 200;

class EdgeMap {
public:
  EdgeMap() = default;
  EdgeMap(int width, int height, std::uint8_t threshold = kDefaultEdgeThreshold)
      : width_(width), height_(height), threshold_(threshold),
        mask_(static_cast<std::size_t>(width) * height, 0) {}

  static EdgeMap from_points(int width, int height, const std::vector<PixelCoord>& pts) {
    EdgeMap e(width, height);
    for (const auto& p : pts)
      if (e.in_bounds(p.x, p.y)) e.set(p.x, p.y, true);
    return e;
  }

  int width() const noexcept { return width_; }
  int height() const noexcept { return height_; }
  std::uint8_t threshold() const noexcept { return threshold_; }

  bool in_bounds(int x, int y) const noexcept {
    return x >= 0 && y >= 0 && x < width_ && y < height_;
  }
  bool at(int x, int y) const { return mask_[idx(x, y)] != 0; }
  // Out-of-bounds reads as background.
  bool get(int x, int y) const { return in_bounds(x, y) && mask_[idx(x, y)] != 0; }
  void set(int x, int y, bool v) { mask_[idx(x, y)] = v ? 1 : 0; }

  const std::vector<std::uint8_t>& mask() const noexcept { return mask_; }
  std::vector<std::uint8_t>& mask() noexcept { return mask_; }

  std::size_t count() const {
    return static_cast<std::size_t>(std::count(mask_.begin(), mask_.end(), std::uint8_t{1}));
  }
  bool empty() const { return count() == 0; }

  // Edge pixels in (y, x) order.
  std::vector<PixelCoord> points() const {
    std::vector<PixelCoord> out;
    for (int y = 0; y < height_; ++y)
      for (int x = 0; x < width_; ++x)
        if (mask_[idx(x, y)]) out.push_back({x, y});
    return out;
  }

  friend bool operator==(const EdgeMap&, const EdgeMap&) = default;

private:
  std::size_t idx(int x, int y) const {
    return static_cast<std::size_t>(y) * static_cast<std::size_t>(width_) + static_cast<std::size_t>(x);
  }

  int width_ = 0;
  int height_ = 0;
  std::uint8_t threshold_ = kDefaultEdgeThreshold;
  std::vector<std::uint8_t> mask_;
};

// Ink-on-white convention: edge iff luma < threshold.
inline EdgeMap extract_edge_map(const Raster& r, std::uint8_t threshold = kDefaultEdgeThreshold) {
  EdgeMap e(r.width(), r.height(), threshold);
  auto& m = e.mask();
  const auto& b = r.bytes();
  for (std::size_t i = 0, p = 0; p < m.size(); ++p, i += 3) {
    const unsigned l = (299u * b[i] + 587u * b[i + 1] + 114u * b[i + 2] + 500u) / 1000u;
    m[p] = l < threshold ? 1 : 0;
  }
  return e;
}

// Square (Chebyshev) dilation by `radius` pixels, separable.
inline EdgeMap dilate_square(const EdgeMap& e, int radius) {
  if (radius <= 0) return e;
  const int w = e.width(), h = e.height();
  std::vector<std::uint8_t> tmp(e.mask().size(), 0);
  const auto& src = e.mask();
  for (int y = 0; y < h; ++y) {
    int last = -radius - 1;  // last set column seen
    const std::size_t row = static_cast<std::size_t>(y) * w;
    // forward: within radius of a set pixel to the left (inclusive)
    for (int x = 0; x < w; ++x) {
      if (src[row + x]) last = x;
      if (x - last <= radius) tmp[row + x] = 1;
    }
    int next = w + radius + 1;
    for (int x = w - 1; x >= 0; --x) {
      if (src[row + x]) next = x;
      if (next - x <= radius) tmp[row + x] = 1;
    }
  }
  EdgeMap out(w, h, e.threshold());
  auto& dst = out.mask();
  for (int x = 0; x < w; ++x) {
    int last = -radius - 1;
    for (int y = 0; y < h; ++y) {
      if (tmp[static_cast<std::size_t>(y) * w + x]) last = y;
      if (y - last <= radius) dst[static_cast<std::size_t>(y) * w + x] = 1;
    }
    int next = h + radius + 1;
    for (int y = h - 1; y >= 0; --y) {
      if (tmp[static_cast<std::size_t>(y) * w + x]) next = y;
      if (next - y <= radius) dst[static_cast<std::size_t>(y) * w + x] = 1;
    }
  }
  return out;
}

// a AND NOT b.
inline EdgeMap subtract(const EdgeMap& a, const EdgeMap& b) {
  EdgeMap out(a.width(), a.height(), a.threshold());
  for (std::size_t i = 0; i < out.mask().size(); ++i)
    out.mask()[i] = (a.mask()[i] && !b.mask()[i]) ? 1 : 0;
  return out;
}

inline EdgeMap intersect(const EdgeMap& a, const EdgeMap& b) {
  EdgeMap out(a.width(), a.height(), a.threshold());
  for (std::size_t i = 0; i < out.mask().size(); ++i)
    out.mask()[i] = (a.mask()[i] && b.mask()[i]) ? 1 : 0;
  return out;
}

// 8-connected components; each component's pixels sorted by (y, x) and the
// components ordered by their first pixel.
inline std::vector<std::vector<PixelCoord>> connected_components(const EdgeMap& e) {
  const int w = e.width(), h = e.height();
  std::vector<std::uint8_t> seen(e.mask().size(), 0);
  std::vector<std::vector<PixelCoord>> comps;
  std::vector<PixelCoord> stack;
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      const std::size_t i = static_cast<std::size_t>(y) * w + x;
      if (!e.mask()[i] || seen[i]) continue;
      std::vector<PixelCoord> comp;
      seen[i] = 1;
      stack.push_back({x, y});
      while (!stack.empty()) {
        const auto p = stack.back();
        stack.pop_back();
        comp.push_back(p);
        for (int dy = -1; dy <= 1; ++dy)
          for (int dx = -1; dx <= 1; ++dx) {
            const int nx = p.x + dx, ny = p.y + dy;
            if ((dx || dy) && e.in_bounds(nx, ny)) {
              const std::size_t j = static_cast<std::size_t>(ny) * w + nx;
              if (e.mask()[j] && !seen[j]) {
                seen[j] = 1;
                stack.push_back({nx, ny});
              }
            }
          }
      }
      std::sort(comp.begin(), comp.end());
      comps.push_back(std::move(comp));
    }
  return comps;
}

}  // namespace geo
