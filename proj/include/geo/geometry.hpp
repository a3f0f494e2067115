#pragma once

// Small 2D fitting and distance helpers shared by the skeleton, VEP and
// refinement code.

#include <algorithm>
#include <cmath>
#include <optional>
#include <vector>

#include "geo/program.hpp"

namespace geo {

constexpr double kPi = 3.14159265358979323846;

inline double dot(Point2D a, Point2D b) { return a.x * b.x + a.y * b.y; }
inline double cross(Point2D a, Point2D b) { return a.x * b.y - a.y * b.x; }
inline double norm(Point2D a) { return std::hypot(a.x, a.y); }

inline double point_segment_distance(Point2D p, Point2D a, Point2D b) {
  const Point2D ab = b - a;
  const double len2 = dot(ab, ab);
  if (len2 == 0) return distance(p, a);
  const double t = std::clamp(dot(p - a, ab) / len2, 0.0, 1.0);
  return distance(p, a + ab * t);
}

inline double point_line_distance(Point2D p, Point2D a, Point2D b) {
  const Point2D ab = b - a;
  const double len = norm(ab);
  if (len == 0) return distance(p, a);
  return std::abs(cross(ab, p - a)) / len;
}

// Undirected line direction in degrees, [0, 180).
inline double line_angle_deg(Point2D a, Point2D b) {
  double deg = std::atan2(b.y - a.y, b.x - a.x) * 180.0 / kPi;
  deg = std::fmod(deg, 180.0);
  if (deg < 0) deg += 180.0;
  if (deg >= 180.0) deg -= 180.0;
  return deg;
}

// Smallest angle between two undirected directions, [0, 90].
inline double undirected_angle_diff(double a_deg, double b_deg) {
  double d = std::fmod(std::abs(a_deg - b_deg), 180.0);
  return std::min(d, 180.0 - d);
}

inline std::optional<Point2D> line_intersection(Point2D a1, Point2D a2, Point2D b1, Point2D b2) {
  const Point2D r = a2 - a1, s = b2 - b1;
  const double denom = cross(r, s);
  if (std::abs(denom) < 1e-12) return std::nullopt;
  const double t = cross(b1 - a1, s) / denom;
  return a1 + r * t;
}

struct LineFit {
  Point2D centroid;
  Point2D direction{1, 0};  // unit
  double max_deviation = 0.0;
  double rms = 0.0;

  Point2D project(Point2D p) const { return centroid + direction * dot(p - centroid, direction); }
  double offset(Point2D p) const { return std::abs(cross(direction, p - centroid)); }
};

// Total least squares line through the points.
inline LineFit fit_line(const std::vector<Point2D>& pts, std::size_t trim = 0) {
  LineFit f;
  if (pts.empty()) return f;
  double sx = 0, sy = 0;
  for (const auto& p : pts) {
    sx += p.x;
    sy += p.y;
  }
  const double n = static_cast<double>(pts.size());
  f.centroid = {sx / n, sy / n};
  double sxx = 0, syy = 0, sxy = 0;
  for (const auto& p : pts) {
    const double dx = p.x - f.centroid.x, dy = p.y - f.centroid.y;
    sxx += dx * dx;
    syy += dy * dy;
    sxy += dx * dy;
  }
  const double theta = 0.5 * std::atan2(2 * sxy, sxx - syy);
  f.direction = {std::cos(theta), std::sin(theta)};
  double sum2 = 0;
  for (std::size_t i = 0; i < pts.size(); ++i) {
    const double d = f.offset(pts[i]);
    sum2 += d * d;
    if (i >= trim && i + trim < pts.size()) f.max_deviation = std::max(f.max_deviation, d);
  }
  f.rms = std::sqrt(sum2 / n);
  return f;
}

struct CircleFit {
  Point2D center;
  double radius = 0.0;
  double max_deviation = 0.0;
  bool ok = false;
};

// Algebraic (Kasa) circle fit.
inline CircleFit fit_circle(const std::vector<Point2D>& pts, std::size_t trim = 0) {
  CircleFit f;
  if (pts.size() < 3) return f;
  double mx = 0, my = 0;
  for (const auto& p : pts) {
    mx += p.x;
    my += p.y;
  }
  mx /= pts.size();
  my /= pts.size();
  // centred normal equations for u^2+v^2 + D u + E v + F = 0
  double suu = 0, svv = 0, suv = 0, su = 0, sv = 0, szu = 0, szv = 0, sz = 0;
  for (const auto& p : pts) {
    const double u = p.x - mx, v = p.y - my, z = u * u + v * v;
    suu += u * u;
    svv += v * v;
    suv += u * v;
    su += u;
    sv += v;
    szu += z * u;
    szv += z * v;
    sz += z;
  }
  const double n = static_cast<double>(pts.size());
  // Solve [suu suv su; suv svv sv; su sv n] [D E F]^T = -[szu szv sz]^T
  double a[3][4] = {{suu, suv, su, -szu}, {suv, svv, sv, -szv}, {su, sv, n, -sz}};
  for (int c = 0; c < 3; ++c) {
    int piv = c;
    for (int r = c + 1; r < 3; ++r)
      if (std::abs(a[r][c]) > std::abs(a[piv][c])) piv = r;
    if (std::abs(a[piv][c]) < 1e-12) return f;
    std::swap(a[c], a[piv]);
    for (int r = 0; r < 3; ++r) {
      if (r == c) continue;
      const double k = a[r][c] / a[c][c];
      for (int k2 = c; k2 < 4; ++k2) a[r][k2] -= k * a[c][k2];
    }
  }
  const double D = a[0][3] / a[0][0], E = a[1][3] / a[1][1], F = a[2][3] / a[2][2];
  const double r2 = (D * D + E * E) / 4 - F;
  if (!(r2 > 0)) return f;
  f.center = {mx - D / 2, my - E / 2};
  f.radius = std::sqrt(r2);
  for (std::size_t i = trim; i + trim < pts.size(); ++i)
    f.max_deviation = std::max(f.max_deviation, std::abs(distance(pts[i], f.center) - f.radius));
  f.ok = std::isfinite(f.radius);
  return f;
}

// Screen-CCW angle of p around c, [0, 360).
inline double screen_angle_deg(Point2D c, Point2D p) {
  return normalize_degrees(std::atan2(-(p.y - c.y), p.x - c.x) * 180.0 / kPi);
}

// Distance from p to the centre line of a shape (no stroke width).
inline double shape_distance(const Shape& shape, Point2D p) {
  return std::visit(
      [&](const auto& s) -> double {
        using T = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<T, PointMark>) return distance(p, s.pos);
        else if constexpr (std::is_same_v<T, Segment>) return point_segment_distance(p, s.p1, s.p2);
        else if constexpr (std::is_same_v<T, Circle>) return std::abs(distance(p, s.center) - s.radius);
        else if constexpr (std::is_same_v<T, Arc>) {
          double sweep = normalize_degrees(s.end_deg - s.start_deg);
          if (sweep == 0) sweep = 360;
          const double ang = screen_angle_deg(s.center, p);
          if (normalize_degrees(ang - s.start_deg) <= sweep) return std::abs(distance(p, s.center) - s.radius);
          auto at = [&](double deg) {
            const double r = deg * kPi / 180.0;
            return Point2D{s.center.x + s.radius * std::cos(r), s.center.y - s.radius * std::sin(r)};
          };
          return std::min(distance(p, at(s.start_deg)), distance(p, at(s.end_deg)));
        } else if constexpr (std::is_same_v<T, Polyline>) {
          double best = 1e300;
          for (std::size_t i = 1; i < s.points.size(); ++i)
            best = std::min(best, point_segment_distance(p, s.points[i - 1], s.points[i]));
          return s.points.size() == 1 ? distance(p, s.points[0]) : best;
        } else if constexpr (std::is_same_v<T, Label>) {
          const Point2D tl = s.anchor + s.offset;
          const double w = 12.0 * static_cast<double>(s.text.size()), h = 14.0;
          const double dx = std::max({tl.x - p.x, 0.0, p.x - (tl.x + w)});
          const double dy = std::max({tl.y - p.y, 0.0, p.y - (tl.y + h)});
          return std::hypot(dx, dy);
        } else if constexpr (std::is_same_v<T, RightAngleMark>) {
          const double r1 = s.arm1_deg * kPi / 180.0, r2 = s.arm2_deg * kPi / 180.0;
          const Point2D u1{std::cos(r1), -std::sin(r1)}, u2{std::cos(r2), -std::sin(r2)};
          const Point2D a = s.vertex + u1 * s.size, c = s.vertex + u2 * s.size, b = a + u2 * s.size;
          return std::min(point_segment_distance(p, a, b), point_segment_distance(p, b, c));
        } else {
          const double r = s.direction_deg * kPi / 180.0;
          const Point2D n{std::sin(r), std::cos(r)};
          const double half = TickMark::kLength / 2;
          return point_segment_distance(p, s.midpoint - n * half, s.midpoint + n * half);
        }
      },
      shape);
}

}  // namespace geo
