#pragma once

// Independent reference computations and fixture builders shared by the
// unit and acceptance tests. Nothing here calls into the code under test
// except to build inputs.

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "geo/geo.hpp"

namespace geo::test {

// O(n*m) chamfer (symmetric mean) and Hausdorff distance.
inline std::pair<double, double> brute_cd_hd(const std::vector<PixelCoord>& a, const std::vector<PixelCoord>& b) {
  auto directed = [](const std::vector<PixelCoord>& from, const std::vector<PixelCoord>& to) {
    double sum = 0.0, worst = 0.0;
    for (const auto& p : from) {
      double best = std::numeric_limits<double>::infinity();
      for (const auto& q : to) {
        const double dx = p.x - q.x, dy = p.y - q.y;
        best = std::min(best, std::sqrt(dx * dx + dy * dy));
      }
      sum += best;
      worst = std::max(worst, best);
    }
    return std::pair{sum / static_cast<double>(from.size()), worst};
  };
  const auto [mab, xab] = directed(a, b);
  const auto [mba, xba] = directed(b, a);
  return {0.5 * (mab + mba), std::max(xab, xba)};
}

// Dark pixels (luma < 200) of a raster, computed straight from RGB.
inline std::vector<PixelCoord> ink(const Raster& r) {
  std::vector<PixelCoord> out;
  for (int y = 0; y < r.height(); ++y)
    for (int x = 0; x < r.width(); ++x) {
      const Rgb c = r.at(x, y);
      if (0.299 * c.r + 0.587 * c.g + 0.114 * c.b < 199.5) out.push_back({x, y});
    }
  return out;
}

inline std::pair<double, double> brute_cd_hd(const Raster& a, const Raster& b) { return brute_cd_hd(ink(a), ink(b)); }

// Window-by-window SSIM with two-pass means and variances on real luma.
inline double naive_ssim(const Raster& a, const Raster& b, int window = 8, int stride = 4) {
  const double c1 = std::pow(0.01 * 255.0, 2), c2 = std::pow(0.03 * 255.0, 2);
  auto luma = [](const Raster& r, int x, int y) {
    const Rgb c = r.at(x, y);
    return 0.299 * c.r + 0.587 * c.g + 0.114 * c.b;
  };
  const int wx = std::min(window, a.width()), wy = std::min(window, a.height());
  double total = 0.0;
  int count = 0;
  for (int y0 = 0; y0 + wy <= a.height(); y0 += stride)
    for (int x0 = 0; x0 + wx <= a.width(); x0 += stride) {
      const double n = static_cast<double>(wx) * wy;
      double ma = 0, mb = 0;
      for (int y = y0; y < y0 + wy; ++y)
        for (int x = x0; x < x0 + wx; ++x) {
          ma += luma(a, x, y);
          mb += luma(b, x, y);
        }
      ma /= n;
      mb /= n;
      double va = 0, vb = 0, cov = 0;
      for (int y = y0; y < y0 + wy; ++y)
        for (int x = x0; x < x0 + wx; ++x) {
          const double da = luma(a, x, y) - ma, db = luma(b, x, y) - mb;
          va += da * da;
          vb += db * db;
          cov += da * db;
        }
      va /= n;
      vb /= n;
      cov /= n;
      total += ((2 * ma * mb + c1) * (2 * cov + c2)) / ((ma * ma + mb * mb + c1) * (va + vb + c2));
      ++count;
    }
  return total / count;
}

// Integer-endpoint Bresenham, one pixel per step of the major axis.
inline std::set<std::pair<int, int>> bresenham(int x0, int y0, int x1, int y1) {
  std::set<std::pair<int, int>> out;
  const int dx = std::abs(x1 - x0), dy = -std::abs(y1 - y0);
  const int sx = x0 < x1 ? 1 : -1, sy = y0 < y1 ? 1 : -1;
  int err = dx + dy;
  for (;;) {
    out.insert({x0, y0});
    if (x0 == x1 && y0 == y1) break;
    const int e2 = 2 * err;
    if (e2 >= dy) {
      err += dy;
      x0 += sx;
    }
    if (e2 <= dx) {
      err += dx;
      y0 += sy;
    }
  }
  return out;
}

inline std::set<std::pair<int, int>> as_set(const std::vector<PixelCoord>& v) {
  std::set<std::pair<int, int>> s;
  for (const auto& p : v) s.insert({p.x, p.y});
  return s;
}

inline Primitive seg(const std::string& id, Point2D a, Point2D b, double width = 2.0) {
  Style s;
  s.stroke_width = width;
  return {id, Segment{a, b}, s};
}

inline Primitive circ(const std::string& id, Point2D c, double r, double width = 2.0) {
  Style s;
  s.stroke_width = width;
  return {id, Circle{c, r}, s};
}

inline Program program_of(std::vector<Primitive> prims, int size = 1000) {
  Program p;
  p.width = p.height = size;
  p.primitives = std::move(prims);
  return p;
}

inline Program polygon(const std::vector<Point2D>& v, double width = 2.0, int size = 1000) {
  Program p;
  p.width = p.height = size;
  for (std::size_t i = 0; i < v.size(); ++i)
    p.primitives.push_back(seg("s" + std::to_string(i + 1), v[i], v[(i + 1) % v.size()], width));
  return p;
}

inline const std::vector<Point2D> kTriangle{{200, 700}, {800, 700}, {450, 250}};
inline const std::vector<Point2D> kSquare{{300, 300}, {700, 300}, {700, 700}, {300, 700}};

inline double nearest(const std::vector<Anchor>& anchors, Point2D p) {
  double best = std::numeric_limits<double>::infinity();
  for (const auto& a : anchors) best = std::min(best, distance(a.pos, p));
  return best;
}

// Random edge-point set of size in [1, max_points] on a w x h canvas.
inline std::vector<PixelCoord> random_points(std::mt19937_64& rng, int max_points, int w, int h) {
  std::uniform_int_distribution<int> n(1, max_points), x(0, w - 1), y(0, h - 1);
  std::vector<PixelCoord> v(static_cast<std::size_t>(n(rng)));
  for (auto& p : v) p = {x(rng), y(rng)};
  return v;
}

// Black and white squares of side `cell`.
inline Raster checkerboard(int w, int h, int cell) {
  Raster r(w, h);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      if ((x / cell + y / cell) % 2) r.set(x, y, {0, 0, 0});
  return r;
}

}  // namespace geo::test
