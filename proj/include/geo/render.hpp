#pragma once

// Deterministic rasterizer: Program -> Raster.
//
// Hard (non anti-aliased) strokes. Lines use the integer midpoint algorithm
// between rounded endpoints, circles the midpoint circle algorithm, and the
// stroke width is realized by stamping a disc of diameter stroke_width at every
// path pixel. Pixels outside the canvas are clipped silently.

#include <cmath>
#include <cstdlib>
#include <string>
#include <vector>

#include "geo/error.hpp"
#include "geo/font.hpp"
#include "geo/program.hpp"
#include "geo/raster.hpp"

namespace geo {

struct PixelCoord {
  int x = 0;
  int y = 0;
  friend bool operator==(const PixelCoord&, const PixelCoord&) = default;
  friend bool operator<(const PixelCoord& a, const PixelCoord& b) {
    return a.y != b.y ? a.y < b.y : a.x < b.x;
  }
};

namespace raster_detail {

constexpr int kDashOn = 8;
constexpr int kDashPeriod = 14;
constexpr int kLabelScale = 2;

inline int round_px(double v) { return static_cast<int>(std::floor(v + 0.5)); }

inline std::vector<PixelCoord> disc_offsets(double stroke_width) {
  const double r = stroke_width / 2.0;
  const double r2 = r * r + 1e-9;
  const int reach = static_cast<int>(std::ceil(r));
  std::vector<PixelCoord> out;
  for (int dy = -reach; dy <= reach; ++dy)
    for (int dx = -reach; dx <= reach; ++dx)
      if (dx * dx + dy * dy <= r2) out.push_back({dx, dy});
  if (out.empty()) out.push_back({0, 0});
  return out;
}

inline Point2D screen_dir(double deg) {
  const double rad = deg * 3.14159265358979323846 / 180.0;
  return {std::cos(rad), -std::sin(rad)};
}

// Walks the pixels of a primitive, calling plot(x, y) for each in-bounds pixel
// (possibly more than once). Returns the number of in-bounds plot calls.
template <typename Plot>
class Tracer {
public:
  Tracer(int width, int height, const Style& style, Plot& plot)
      : w_(width), h_(height), style_(style), plot_(plot),
        disc_(disc_offsets(style.stroke_width)) {}

  std::size_t touched() const { return touched_; }

  void stamp(int cx, int cy) {
    for (const auto& o : disc_) put(cx + o.x, cy + o.y);
  }

  void put(int x, int y) {
    if (x < 0 || y < 0 || x >= w_ || y >= h_) return;
    ++touched_;
    plot_(x, y);
  }

  void line(Point2D a, Point2D b) {
    int x0 = round_px(a.x), y0 = round_px(a.y);
    const int x1 = round_px(b.x), y1 = round_px(b.y);
    const int dx = std::abs(x1 - x0), sx = x0 < x1 ? 1 : -1;
    const int dy = -std::abs(y1 - y0), sy = y0 < y1 ? 1 : -1;
    int err = dx + dy;
    int step = 0;
    while (true) {
      if (on(step)) stamp(x0, y0);
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
      ++step;
    }
  }

  // Full circle when sweep_deg >= 360; otherwise only pixels whose screen
  // angle lies in [start, start + sweep].
  void circle(Point2D c, double radius, double start_deg = 0.0, double sweep_deg = 360.0) {
    const int cx = round_px(c.x), cy = round_px(c.y);
    const int r = round_px(radius);
    if (r <= 0) {
      stamp(cx, cy);
      return;
    }
    auto emit = [&](int dx, int dy) {
      const bool needs_angle = sweep_deg < 360.0 || style_.dash == Dash::Dashed;
      if (needs_angle) {
        double ang = std::atan2(-static_cast<double>(dy), static_cast<double>(dx)) * 180.0 /
                     3.14159265358979323846;
        ang = normalize_degrees(ang);
        if (sweep_deg < 360.0 && normalize_degrees(ang - start_deg) > sweep_deg) return;
        if (style_.dash == Dash::Dashed) {
          const int arc_step = static_cast<int>(std::floor(ang * 3.14159265358979323846 / 180.0 * r));
          if (!on(arc_step)) return;
        }
      }
      stamp(cx + dx, cy + dy);
    };
    int x = r, y = 0, err = 1 - r;
    while (x >= y) {
      emit(x, y);
      emit(y, x);
      emit(-y, x);
      emit(-x, y);
      emit(-x, -y);
      emit(-y, -x);
      emit(y, -x);
      emit(x, -y);
      ++y;
      if (err < 0) {
        err += 2 * y + 1;
      } else {
        --x;
        err += 2 * (y - x) + 1;
      }
    }
  }

  void text(const std::string& s, Point2D top_left) {
    int pen_x = round_px(top_left.x);
    const int top = round_px(top_left.y);
    for (std::size_t i = 0; i < s.size(); ++i) {
      char ch = s[i];
      int scale = kLabelScale;
      int y0 = top;
      if (ch == '_' && i + 1 < s.size() && s[i + 1] >= '0' && s[i + 1] <= '9') {
        ch = s[++i];
        scale = 1;
        y0 = top + font::kGlyphHeight * kLabelScale - font::kGlyphHeight / 2;
      }
      if (auto gl = font::glyph(ch)) {
        for (int row = 0; row < font::kGlyphHeight; ++row)
          for (int col = 0; col < font::kGlyphWidth; ++col)
            if (font::glyph_bit(*gl, col, row))
              for (int sy = 0; sy < scale; ++sy)
                for (int sx = 0; sx < scale; ++sx)
                  put(pen_x + col * scale + sx, y0 + row * scale + sy);
      }
      pen_x += font::kAdvance * scale;
    }
  }

private:
  bool on(int step) const { return style_.dash == Dash::Solid || step % kDashPeriod < kDashOn; }

  int w_, h_;
  Style style_;
  Plot& plot_;
  std::vector<PixelCoord> disc_;
  std::size_t touched_ = 0;
};

}  // namespace raster_detail

// Visits every canvas pixel the primitive inks. Returns the number of
// in-bounds plot calls (0 means the primitive is entirely off canvas).
template <typename Plot>
std::size_t trace_primitive(const Primitive& prim, int width, int height, Plot&& plot) {
  using raster_detail::screen_dir;
  raster_detail::Tracer<std::remove_reference_t<Plot>> t(width, height, prim.style, plot);
  std::visit(
      [&](const auto& s) {
        using T = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<T, PointMark>) {
          t.stamp(raster_detail::round_px(s.pos.x), raster_detail::round_px(s.pos.y));
        } else if constexpr (std::is_same_v<T, Segment>) {
          t.line(s.p1, s.p2);
        } else if constexpr (std::is_same_v<T, Circle>) {
          t.circle(s.center, s.radius);
        } else if constexpr (std::is_same_v<T, Arc>) {
          double sweep = normalize_degrees(s.end_deg - s.start_deg);
          if (sweep == 0.0) sweep = 360.0;
          t.circle(s.center, s.radius, s.start_deg, sweep);
        } else if constexpr (std::is_same_v<T, Polyline>) {
          for (std::size_t i = 1; i < s.points.size(); ++i) t.line(s.points[i - 1], s.points[i]);
        } else if constexpr (std::is_same_v<T, Label>) {
          t.text(s.text, s.anchor + s.offset);
        } else if constexpr (std::is_same_v<T, RightAngleMark>) {
          const Point2D u1 = screen_dir(s.arm1_deg), u2 = screen_dir(s.arm2_deg);
          const Point2D a = s.vertex + u1 * s.size;
          const Point2D c = s.vertex + u2 * s.size;
          const Point2D b = a + u2 * s.size;
          t.line(a, b);
          t.line(b, c);
        } else if constexpr (std::is_same_v<T, TickMark>) {
          const Point2D u = screen_dir(s.direction_deg);
          const Point2D n{-u.y, u.x};
          const double half = TickMark::kLength / 2.0;
          t.line(s.midpoint - n * half, s.midpoint + n * half);
        }
      },
      prim.shape);
  return t.touched();
}

// Distinct canvas pixels inked by one primitive, sorted by (y, x).
inline std::vector<PixelCoord> primitive_pixels(const Primitive& prim, int width, int height) {
  std::vector<unsigned char> mask(static_cast<std::size_t>(width) * height, 0);
  std::vector<PixelCoord> out;
  trace_primitive(prim, width, height, [&](int x, int y) {
    auto& m = mask[static_cast<std::size_t>(y) * width + x];
    if (!m) {
      m = 1;
      out.push_back({x, y});
    }
  });
  std::sort(out.begin(), out.end());
  return out;
}

inline void draw_primitive(Raster& r, const Primitive& prim) {
  const Rgb c = prim.style.color;
  const std::size_t touched =
      trace_primitive(prim, r.width(), r.height(), [&](int x, int y) { r.set(x, y, c); });
  if (touched == 0 && !std::holds_alternative<Label>(prim.shape))
    throw RenderFailure(prim.id, "no pixel lands on the canvas");
}

// White background, primitives in statement order.
inline Raster render(const Program& p) {
  if (auto v = validate_consistency(p); !v.empty())
    throw RenderFailure(v.front().primitive_id, v.front().reason);
  Raster r(p.width, p.height);
  for (const auto& prim : p.primitives) draw_primitive(r, prim);
  return r;
}

}  // namespace geo
