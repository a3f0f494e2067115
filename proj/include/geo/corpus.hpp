#pragma once

// Seeded generator of synthetic figure programs: triangles, quadrilaterals,
// crossed segments and circles laid out in separate canvas cells.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "geo/geometry.hpp"
#include "geo/program.hpp"

namespace geo {

enum class FigureKind { Triangle, Quadrilateral, CrossedSegments, Circle };

inline const char* to_string(FigureKind k) {
  switch (k) {
    case FigureKind::Triangle: return "triangle";
    case FigureKind::Quadrilateral: return "quadrilateral";
    case FigureKind::CrossedSegments: return "crossed";
    default: return "circle";
  }
}

namespace corpus_detail {

// splitmix64: a fixed, portable bit generator so corpora match everywhere.
class Rng {
public:
  explicit Rng(std::uint64_t seed) : state_(seed) {}
  std::uint64_t next() {
    std::uint64_t z = (state_ += 0x9E3779B97F4A7C15ull);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
  }
  double uniform(double lo, double hi) { return lo + (hi - lo) * (static_cast<double>(next() >> 11) * 0x1.0p-53); }
  int integer(int lo, int hi) { return lo + static_cast<int>(next() % static_cast<std::uint64_t>(hi - lo + 1)); }

private:
  std::uint64_t state_;
};

struct Cell {
  double x0, y0, size;
  Point2D at(double u, double v) const { return {x0 + u * size, y0 + v * size}; }
};

inline double min_angle_deg(const std::vector<Point2D>& poly) {
  double m = 180.0;
  const std::size_t n = poly.size();
  for (std::size_t i = 0; i < n; ++i) {
    const Point2D a = poly[(i + n - 1) % n] - poly[i], b = poly[(i + 1) % n] - poly[i];
    const double ang = std::acos(std::clamp(dot(a, b) / (norm(a) * norm(b)), -1.0, 1.0)) * 180.0 / kPi;
    m = std::min(m, ang);
  }
  return m;
}

inline double min_side(const std::vector<Point2D>& poly) {
  double m = 1e300;
  for (std::size_t i = 0; i < poly.size(); ++i) m = std::min(m, distance(poly[i], poly[(i + 1) % poly.size()]));
  return m;
}

inline bool convex(const std::vector<Point2D>& poly) {
  int sign = 0;
  for (std::size_t i = 0; i < poly.size(); ++i) {
    const Point2D a = poly[(i + 1) % poly.size()] - poly[i];
    const Point2D b = poly[(i + 2) % poly.size()] - poly[(i + 1) % poly.size()];
    const int s = cross(a, b) > 0 ? 1 : -1;
    if (sign && s != sign) return false;
    sign = s;
  }
  return true;
}

inline Point2D round2(Point2D p) { return {std::round(p.x * 100) / 100, std::round(p.y * 100) / 100}; }

}  // namespace corpus_detail

// Appends one figure inside `cell` and returns the number of primitives added.
inline int add_figure(Program& p, FigureKind kind, const corpus_detail::Cell& cell, corpus_detail::Rng& rng,
                      const Style& style) {
  using namespace corpus_detail;
  auto id = [&](const char* prefix) {
    for (int i = 0;; ++i) {
      std::string s = prefix + std::to_string(i);
      if (!p.find(s)) return s;
    }
  };
  auto polygon = [&](int n) {
    for (int attempt = 0;; ++attempt) {
      std::vector<Point2D> v;
      const double phase = rng.uniform(0, 2 * kPi);
      for (int i = 0; i < n; ++i) {
        const double ang = phase + 2 * kPi * i / n + rng.uniform(-0.35, 0.35);
        const double rad = rng.uniform(0.3, 0.45);
        v.push_back(round2(cell.at(0.5 + rad * std::cos(ang), 0.5 + rad * std::sin(ang))));
      }
      if ((convex(v) && min_angle_deg(v) >= 30.0 && min_side(v) >= 0.25 * cell.size) || attempt > 200) return v;
    }
  };
  switch (kind) {
    case FigureKind::Triangle:
    case FigureKind::Quadrilateral: {
      const auto v = polygon(kind == FigureKind::Triangle ? 3 : 4);
      for (std::size_t i = 0; i < v.size(); ++i)
        p.primitives.push_back({id("s"), Segment{v[i], v[(i + 1) % v.size()]}, style});
      return static_cast<int>(v.size());
    }
    case FigureKind::CrossedSegments: {
      const double a = rng.uniform(0, 180.0);
      const double b = a + rng.uniform(40.0, 140.0);
      const Point2D c = cell.at(0.5 + rng.uniform(-0.05, 0.05), 0.5 + rng.uniform(-0.05, 0.05));
      for (double deg : {a, b}) {
        const double r = deg * kPi / 180.0, len = rng.uniform(0.3, 0.42) * cell.size;
        const Point2D d{std::cos(r), std::sin(r)};
        p.primitives.push_back({id("s"), Segment{round2(c + d * len), round2(c - d * len * rng.uniform(0.6, 1.0))}, style});
      }
      return 2;
    }
    default: {
      const Point2D c = round2(cell.at(0.5 + rng.uniform(-0.05, 0.05), 0.5 + rng.uniform(-0.05, 0.05)));
      const double r = std::round(rng.uniform(0.2, 0.4) * cell.size * 100) / 100;
      p.primitives.push_back({id("c"), Circle{c, r}, style});
      return 1;
    }
  }
}

// Program `index` of a corpus: its leading figure kind cycles through the four
// kinds; further figures fill other cells until 2 to 8 primitives exist.
inline Program corpus_program(std::uint64_t seed, int index, int canvas = Program::kDefaultCanvas) {
  using namespace corpus_detail;
  Rng rng(seed * 1000003ull + static_cast<std::uint64_t>(index));
  Program p;
  p.width = p.height = canvas;
  const double half = canvas / 2.0, margin = canvas * 0.04;
  std::vector<Cell> cells;
  for (int r = 0; r < 2; ++r)
    for (int c = 0; c < 2; ++c) cells.push_back({c * half + margin, r * half + margin, half - 2 * margin});
  // shuffle cells
  for (int i = 3; i > 0; --i) std::swap(cells[i], cells[rng.integer(0, i)]);
  Style style;
  style.stroke_width = rng.integer(0, 3) == 0 ? 3.0 : 2.0;
  const int target = rng.integer(2, 8);
  int count = 0;
  std::size_t cell = 0;
  FigureKind kind = static_cast<FigureKind>(index % 4);
  while (cell < cells.size()) {
    const int cost = kind == FigureKind::Triangle ? 3 : kind == FigureKind::Quadrilateral ? 4
                     : kind == FigureKind::CrossedSegments                                ? 2
                                                                                          : 1;
    if (count > 0 && count + cost > target) break;
    count += add_figure(p, kind, cells[cell++], rng, style);
    if (count >= target) break;
    kind = static_cast<FigureKind>(rng.integer(0, 3));
  }
  if (count < 2) add_figure(p, FigureKind::Circle, cells[cell < cells.size() ? cell : 0], rng, style);
  return p;
}

inline std::vector<Program> corpus(std::uint64_t seed, int n, int canvas = Program::kDefaultCanvas) {
  std::vector<Program> out;
  for (int i = 0; i < n; ++i) out.push_back(corpus_program(seed, i, canvas));
  return out;
}

}  // namespace geo
