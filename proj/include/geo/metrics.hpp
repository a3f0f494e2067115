#pragma once

// Edge-alignment metrics (Chamfer, Hausdorff) and windowed SSIM.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <utility>
#include <vector>

#include "geo/distance.hpp"
#include "geo/edge_map.hpp"
#include "geo/error.hpp"
#include "geo/raster.hpp"

namespace geo {

struct MetricBundle {
  double cd = 0.0;
  double hd = 0.0;
  double ssim = 1.0;
  std::size_t rec_edges = 0;  // |Edge(I_rec)|
  std::size_t obs_edges = 0;  // |Edge(I_obs)|
  bool empty_edges = false;   // cd/hd replaced by the canvas diagonal

  friend bool operator==(const MetricBundle&, const MetricBundle&) = default;
};

// Mean and max of the two directed nearest-neighbour distance sets.
struct DirectedStats {
  double mean_ab = 0.0, mean_ba = 0.0;
  double max_ab = 0.0, max_ba = 0.0;
};

inline DirectedStats directed_stats(const std::vector<PixelCoord>& a, const std::vector<PixelCoord>& b) {
  if (a.empty()) throw EmptyEdgeSet(EmptyEdgeSet::Side::First);
  if (b.empty()) throw EmptyEdgeSet(EmptyEdgeSet::Side::Second);
  const auto dab = nearest_distances(a, b);
  const auto dba = nearest_distances(b, a);
  DirectedStats s;
  s.mean_ab = std::accumulate(dab.begin(), dab.end(), 0.0) / static_cast<double>(dab.size());
  s.mean_ba = std::accumulate(dba.begin(), dba.end(), 0.0) / static_cast<double>(dba.size());
  s.max_ab = *std::max_element(dab.begin(), dab.end());
  s.max_ba = *std::max_element(dba.begin(), dba.end());
  return s;
}

// Symmetric mean nearest-neighbour distance, in pixels.
inline double chamfer_distance(const EdgeMap& a, const EdgeMap& b) {
  const auto s = directed_stats(a.points(), b.points());
  return 0.5 * (s.mean_ab + s.mean_ba);
}

inline double hausdorff_distance(const EdgeMap& a, const EdgeMap& b) {
  const auto s = directed_stats(a.points(), b.points());
  return std::max(s.max_ab, s.max_ba);
}

inline double chamfer_distance(const std::vector<PixelCoord>& a, const std::vector<PixelCoord>& b) {
  const auto s = directed_stats(a, b);
  return 0.5 * (s.mean_ab + s.mean_ba);
}

inline double hausdorff_distance(const std::vector<PixelCoord>& a, const std::vector<PixelCoord>& b) {
  const auto s = directed_stats(a, b);
  return std::max(s.max_ab, s.max_ba);
}

struct SsimConfig {
  int window = 8;
  int stride = 4;
  double k1 = 0.01;
  double k2 = 0.03;
};

// Mean local SSIM over window x window blocks at the given stride on the luma
// channel. Window sums come from exact integer summed-area tables.
inline double ssim(const Raster& a, const Raster& b, const SsimConfig& cfg = {}) {
  if (a.width() != b.width() || a.height() != b.height())
    throw DimensionMismatch(a.width(), a.height(), b.width(), b.height());
  const int w = a.width(), h = a.height();
  const int win_x = std::min(cfg.window, w), win_y = std::min(cfg.window, h);
  const double c1 = (cfg.k1 * 255.0) * (cfg.k1 * 255.0);
  const double c2 = (cfg.k2 * 255.0) * (cfg.k2 * 255.0);

  // luma scaled by 1000 so every product stays integral
  const std::size_t W = static_cast<std::size_t>(w) + 1;
  std::vector<std::int64_t> sa(W * (h + 1), 0), sb(sa), saa(sa), sbb(sa), sab(sa);
  const auto& pa = a.bytes();
  const auto& pb = b.bytes();
  for (int y = 0; y < h; ++y) {
    std::int64_t ra = 0, rb = 0, raa = 0, rbb = 0, rab = 0;
    for (int x = 0; x < w; ++x) {
      const std::size_t i = (static_cast<std::size_t>(y) * w + x) * 3;
      const std::int64_t la = 299 * pa[i] + 587 * pa[i + 1] + 114 * pa[i + 2];
      const std::int64_t lb = 299 * pb[i] + 587 * pb[i + 1] + 114 * pb[i + 2];
      ra += la;
      rb += lb;
      raa += la * la;
      rbb += lb * lb;
      rab += la * lb;
      const std::size_t o = (y + 1) * W + (x + 1), up = y * W + (x + 1);
      sa[o] = sa[up] + ra;
      sb[o] = sb[up] + rb;
      saa[o] = saa[up] + raa;
      sbb[o] = sbb[up] + rbb;
      sab[o] = sab[up] + rab;
    }
  }
  auto box = [&](const std::vector<std::int64_t>& s, int x, int y) {
    const std::size_t x0 = x, y0 = y, x1 = x + win_x, y1 = y + win_y;
    return s[y1 * W + x1] - s[y0 * W + x1] - s[y1 * W + x0] + s[y0 * W + x0];
  };

  const double n = static_cast<double>(win_x) * win_y;
  double total = 0.0;
  std::size_t windows = 0;
  for (int y = 0; y + win_y <= h; y += cfg.stride)
    for (int x = 0; x + win_x <= w; x += cfg.stride) {
      const double mu_a = box(sa, x, y) / 1000.0 / n;
      const double mu_b = box(sb, x, y) / 1000.0 / n;
      const double var_a = box(saa, x, y) / 1e6 / n - mu_a * mu_a;
      const double var_b = box(sbb, x, y) / 1e6 / n - mu_b * mu_b;
      const double cov = box(sab, x, y) / 1e6 / n - mu_a * mu_b;
      total += ((2 * mu_a * mu_b + c1) * (2 * cov + c2)) /
               ((mu_a * mu_a + mu_b * mu_b + c1) * (var_a + var_b + c2));
      ++windows;
    }
  return total / static_cast<double>(windows);
}

inline double canvas_diagonal(int w, int h) { return std::hypot(static_cast<double>(w), static_cast<double>(h)); }

// CD/HD on edge maps plus SSIM on the rasters. An empty edge set on either
// side is maximal error: cd = hd = canvas diagonal.
inline MetricBundle measure(const Raster& rec, const Raster& obs, const EdgeMap& rec_edges,
                            const EdgeMap& obs_edges, bool with_ssim = true) {
  if (rec.width() != obs.width() || rec.height() != obs.height())
    throw DimensionMismatch(rec.width(), rec.height(), obs.width(), obs.height());
  MetricBundle m;
  const auto a = rec_edges.points();
  const auto b = obs_edges.points();
  m.rec_edges = a.size();
  m.obs_edges = b.size();
  if (a.empty() || b.empty()) {
    m.cd = m.hd = canvas_diagonal(rec.width(), rec.height());
    m.empty_edges = true;
  } else {
    const auto s = directed_stats(a, b);
    m.cd = 0.5 * (s.mean_ab + s.mean_ba);
    m.hd = std::max(s.max_ab, s.max_ba);
  }
  m.ssim = with_ssim ? ssim(rec, obs) : 0.0;
  return m;
}

inline MetricBundle measure(const Raster& rec, const Raster& obs,
                            std::uint8_t threshold = kDefaultEdgeThreshold) {
  if (rec.width() != obs.width() || rec.height() != obs.height())
    throw DimensionMismatch(rec.width(), rec.height(), obs.width(), obs.height());
  return measure(rec, obs, extract_edge_map(rec, threshold), extract_edge_map(obs, threshold));
}

}  // namespace geo
