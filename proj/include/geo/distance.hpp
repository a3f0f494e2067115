#pragma once

// Exact Euclidean distance transform (lower envelope of parabolas, separable)
// and nearest-neighbour distances between pixel sets built on it.

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "geo/render.hpp"

namespace geo {

namespace edt_detail {

constexpr double kInf = 1e20;

// In-place 1D squared distance transform of f (length n).
inline void transform_1d(std::vector<double>& f, int n, std::vector<double>& d, std::vector<int>& v,
                         std::vector<double>& z) {
  int k = 0;
  v[0] = 0;
  z[0] = -kInf;
  z[1] = kInf;
  auto intersect = [&](int q, int p) {
    return ((f[q] + static_cast<double>(q) * q) - (f[p] + static_cast<double>(p) * p)) /
           (2.0 * (q - p));
  };
  for (int q = 1; q < n; ++q) {
    double s = intersect(q, v[k]);
    while (s <= z[k]) {
      --k;
      s = intersect(q, v[k]);
    }
    ++k;
    v[k] = q;
    z[k] = s;
    z[k + 1] = kInf;
  }
  k = 0;
  for (int q = 0; q < n; ++q) {
    while (z[k + 1] < q) ++k;
    const double diff = q - v[k];
    d[q] = diff * diff + f[v[k]];
  }
  for (int q = 0; q < n; ++q) f[q] = d[q];
}

}  // namespace edt_detail

// Squared distance from every cell of a w x h grid to the nearest seed cell
// (seed[i] != 0). Cells are infinitely far (>= 1e20) when there are no seeds.
inline std::vector<double> squared_distance_transform(const std::vector<std::uint8_t>& seed, int w, int h) {
  using edt_detail::kInf;
  std::vector<double> g(static_cast<std::size_t>(w) * h);
  for (std::size_t i = 0; i < g.size(); ++i) g[i] = seed[i] ? 0.0 : kInf;
  const int n = std::max(w, h);
  std::vector<double> f(n), d(n), z(n + 1);
  std::vector<int> v(n);
  for (int x = 0; x < w; ++x) {
    for (int y = 0; y < h; ++y) f[y] = g[static_cast<std::size_t>(y) * w + x];
    edt_detail::transform_1d(f, h, d, v, z);
    for (int y = 0; y < h; ++y) g[static_cast<std::size_t>(y) * w + x] = f[y];
  }
  for (int y = 0; y < h; ++y) {
    double* row = &g[static_cast<std::size_t>(y) * w];
    std::copy(row, row + w, f.begin());
    edt_detail::transform_1d(f, w, d, v, z);
    std::copy(f.begin(), f.begin() + w, row);
  }
  return g;
}

// For every point of `from`, the Euclidean distance to the nearest point of
// `to` (which must be nonempty). Uses one distance transform over the joint
// bounding box, or brute force when either set is small.
inline std::vector<double> nearest_distances(const std::vector<PixelCoord>& from,
                                             const std::vector<PixelCoord>& to) {
  std::vector<double> out(from.size());
  if (from.empty() || to.empty()) return out;
  constexpr std::size_t kBruteForceBelow = 64;
  if (from.size() < kBruteForceBelow || to.size() < kBruteForceBelow) {
    for (std::size_t i = 0; i < from.size(); ++i) {
      long long best = std::numeric_limits<long long>::max();
      for (const auto& q : to) {
        const long long dx = from[i].x - q.x, dy = from[i].y - q.y;
        best = std::min(best, dx * dx + dy * dy);
      }
      out[i] = std::sqrt(static_cast<double>(best));
    }
    return out;
  }
  int x0 = to[0].x, x1 = to[0].x, y0 = to[0].y, y1 = to[0].y;
  for (const auto* set : {&from, &to})
    for (const auto& p : *set) {
      x0 = std::min(x0, p.x);
      x1 = std::max(x1, p.x);
      y0 = std::min(y0, p.y);
      y1 = std::max(y1, p.y);
    }
  const int w = x1 - x0 + 1, h = y1 - y0 + 1;
  std::vector<std::uint8_t> seed(static_cast<std::size_t>(w) * h, 0);
  for (const auto& q : to) seed[static_cast<std::size_t>(q.y - y0) * w + (q.x - x0)] = 1;
  const auto dt = squared_distance_transform(seed, w, h);
  for (std::size_t i = 0; i < from.size(); ++i)
    out[i] = std::sqrt(dt[static_cast<std::size_t>(from[i].y - y0) * w + (from[i].x - x0)]);
  return out;
}

}  // namespace geo
