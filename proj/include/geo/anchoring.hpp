#pragma once

// Pixel-wise anchoring: raw keypoint candidates (corners, junctions, stroke
// endpoints) extracted directly from the edge mask of an observed figure.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "geo/edge_map.hpp"
#include "geo/program.hpp"
#include "geo/raster.hpp"

namespace geo {

enum class AnchorKind { Corner, Junction, Endpoint, Unknown };
enum class AnchorSource { GradientOperator, AgentProposal };

inline const char* to_string(AnchorKind k) {
  switch (k) {
    case AnchorKind::Corner: return "corner";
    case AnchorKind::Junction: return "junction";
    case AnchorKind::Endpoint: return "endpoint";
    default: return "unknown";
  }
}

inline const char* to_string(AnchorSource s) {
  return s == AnchorSource::GradientOperator ? "gradient" : "agent";
}

struct Anchor {
  Point2D pos;
  double score = 0.0;
  AnchorKind kind = AnchorKind::Unknown;
  AnchorSource source = AnchorSource::GradientOperator;

  friend bool operator==(const Anchor&, const Anchor&) = default;
};

// Stable (y, x) ordering used for every anchor list.
inline void sort_anchors(std::vector<Anchor>& v) {
  std::stable_sort(v.begin(), v.end(), [](const Anchor& a, const Anchor& b) {
    return a.pos.y != b.pos.y ? a.pos.y < b.pos.y : a.pos.x < b.pos.x;
  });
}

struct AnchorConfig {
  std::uint8_t edge_threshold = kDefaultEdgeThreshold;
  int tensor_window = 3;          // structure-tensor integration window (odd)
  double harris_k = 0.04;
  double gradient_sigma = 1.0;    // pre-smoothing of the mask; 0 disables
  int nms_radius = 5;
  double relative_threshold = 0.01;
  int junction_separation = 5;    // at most one junction/endpoint per radius
  int spur_length = 6;            // skeleton branches shorter than this are pruned
  double merge_radius = 4.0;
  int refine_radius = 16;         // skeleton neighbourhood used to place a corner
  double refine_min_bend = 12.0;  // degrees between the two arms below which a corner is left as found
  double refine_max_shift = 10.0;
};

// ---------------------------------------------------------------------------
// Corner response

namespace anchor_detail {

inline std::vector<float> gaussian_kernel(double sigma) {
  const int r = std::max(1, static_cast<int>(std::ceil(3.0 * sigma)));
  std::vector<float> k(2 * r + 1);
  double sum = 0;
  for (int i = -r; i <= r; ++i) sum += k[i + r] = static_cast<float>(std::exp(-0.5 * i * i / (sigma * sigma)));
  for (auto& v : k) v = static_cast<float>(v / sum);
  return k;
}

// Separable convolution with clamp-to-edge borders.
inline std::vector<float> convolve(const std::vector<float>& img, int w, int h,
                                   const std::vector<float>& kx, const std::vector<float>& ky) {
  std::vector<float> tmp(img.size()), out(img.size());
  const int rx = static_cast<int>(kx.size() / 2), ry = static_cast<int>(ky.size() / 2);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      float s = 0;
      for (int i = -rx; i <= rx; ++i) s += kx[i + rx] * img[static_cast<std::size_t>(y) * w + std::clamp(x + i, 0, w - 1)];
      tmp[static_cast<std::size_t>(y) * w + x] = s;
    }
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      float s = 0;
      for (int i = -ry; i <= ry; ++i) s += ky[i + ry] * tmp[static_cast<std::size_t>(std::clamp(y + i, 0, h - 1)) * w + x];
      out[static_cast<std::size_t>(y) * w + x] = s;
    }
  return out;
}

struct Window {
  int x0, y0, w, h;
};

// Bounding box of the mask inflated by `margin`, clipped to the image.
inline bool mask_window(const EdgeMap& e, int margin, Window& out) {
  int x0 = e.width(), y0 = e.height(), x1 = -1, y1 = -1;
  for (int y = 0; y < e.height(); ++y)
    for (int x = 0; x < e.width(); ++x)
      if (e.at(x, y)) {
        x0 = std::min(x0, x);
        x1 = std::max(x1, x);
        y0 = std::min(y0, y);
        y1 = std::max(y1, y);
      }
  if (x1 < 0) return false;
  x0 = std::max(0, x0 - margin);
  y0 = std::max(0, y0 - margin);
  x1 = std::min(e.width() - 1, x1 + margin);
  y1 = std::min(e.height() - 1, y1 + margin);
  out = {x0, y0, x1 - x0 + 1, y1 - y0 + 1};
  return true;
}

}  // namespace anchor_detail

// Harris response R = det(M) - k tr(M)^2 of the structure tensor M over the
// mask. Returned over the full image (zero away from ink).
inline std::vector<float> corner_response(const EdgeMap& e, const AnchorConfig& cfg = {}) {
  using namespace anchor_detail;
  std::vector<float> full(static_cast<std::size_t>(e.width()) * e.height(), 0.0f);
  Window win;
  const int margin = 4 + cfg.tensor_window + static_cast<int>(std::ceil(3 * cfg.gradient_sigma));
  if (!mask_window(e, margin, win)) return full;

  std::vector<float> img(static_cast<std::size_t>(win.w) * win.h);
  for (int y = 0; y < win.h; ++y)
    for (int x = 0; x < win.w; ++x) img[static_cast<std::size_t>(y) * win.w + x] = e.at(win.x0 + x, win.y0 + y) ? 1.0f : 0.0f;
  if (cfg.gradient_sigma > 0) {
    const auto k = gaussian_kernel(cfg.gradient_sigma);
    img = convolve(img, win.w, win.h, k, k);
  }
  // Sobel gradients
  const std::vector<float> deriv{-1, 0, 1}, smooth{1, 2, 1};
  const auto gx = convolve(img, win.w, win.h, deriv, smooth);
  const auto gy = convolve(img, win.w, win.h, smooth, deriv);
  std::vector<float> xx(img.size()), yy(img.size()), xy(img.size());
  for (std::size_t i = 0; i < img.size(); ++i) {
    xx[i] = gx[i] * gx[i];
    yy[i] = gy[i] * gy[i];
    xy[i] = gx[i] * gy[i];
  }
  const std::vector<float> box(static_cast<std::size_t>(std::max(1, cfg.tensor_window)), 1.0f);
  xx = convolve(xx, win.w, win.h, box, box);
  yy = convolve(yy, win.w, win.h, box, box);
  xy = convolve(xy, win.w, win.h, box, box);
  for (int y = 0; y < win.h; ++y)
    for (int x = 0; x < win.w; ++x) {
      const std::size_t i = static_cast<std::size_t>(y) * win.w + x;
      const float det = xx[i] * yy[i] - xy[i] * xy[i];
      const float tr = xx[i] + yy[i];
      full[static_cast<std::size_t>(win.y0 + y) * e.width() + win.x0 + x] =
          det - static_cast<float>(cfg.harris_k) * tr * tr;
    }
  return full;
}

// Local maxima of the Harris response within a square NMS window, above
// relative_threshold x max response. Ties on a plateau go to the first pixel
// in raster order.
inline std::vector<Anchor> corner_peaks(const EdgeMap& e, const AnchorConfig& cfg = {}) {
  const auto resp = corner_response(e, cfg);
  const float max_r = resp.empty() ? 0.0f : *std::max_element(resp.begin(), resp.end());
  std::vector<Anchor> out;
  if (!(max_r > 0)) return out;
  const float thr = static_cast<float>(cfg.relative_threshold) * max_r;
  const int w = e.width(), h = e.height(), r = cfg.nms_radius;
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      const float v = resp[static_cast<std::size_t>(y) * w + x];
      if (!(v > thr)) continue;
      bool is_max = true;
      for (int dy = -r; dy <= r && is_max; ++dy)
        for (int dx = -r; dx <= r; ++dx) {
          const int nx = x + dx, ny = y + dy;
          if ((!dx && !dy) || nx < 0 || ny < 0 || nx >= w || ny >= h) continue;
          const float o = resp[static_cast<std::size_t>(ny) * w + nx];
          const bool earlier = ny < y || (ny == y && nx < x);
          if (o > v || (o == v && earlier)) {
            is_max = false;
            break;
          }
        }
      if (is_max)
        out.push_back({{static_cast<double>(x), static_cast<double>(y)}, static_cast<double>(v / max_r),
                       AnchorKind::Corner, AnchorSource::GradientOperator});
    }
  sort_anchors(out);
  return out;
}

// ---------------------------------------------------------------------------
// Skeletonization

namespace anchor_detail {

// Ring order P2..P9: N, NE, E, SE, S, SW, W, NW.
constexpr std::array<int, 8> kRingDx{0, 1, 1, 1, 0, -1, -1, -1};
constexpr std::array<int, 8> kRingDy{-1, -1, 0, 1, 1, 1, 0, -1};

inline std::array<bool, 8> ring(const EdgeMap& m, int x, int y) {
  std::array<bool, 8> r{};
  for (int i = 0; i < 8; ++i) r[i] = m.get(x + kRingDx[i], y + kRingDy[i]);
  return r;
}

inline int transitions(const std::array<bool, 8>& r) {
  int t = 0;
  for (int i = 0; i < 8; ++i)
    if (!r[i] && r[(i + 1) % 8]) ++t;
  return t;
}

inline int neighbours(const std::array<bool, 8>& r) {
  return static_cast<int>(std::count(r.begin(), r.end(), true));
}

// Number of 8-connected groups formed by the set ring positions alone.
inline int ring_groups(const std::array<bool, 8>& r) {
  std::array<int, 8> label{};
  label.fill(-1);
  int groups = 0;
  for (int i = 0; i < 8; ++i) {
    if (!r[i] || label[i] >= 0) continue;
    std::vector<int> stack{i};
    label[i] = groups;
    while (!stack.empty()) {
      const int a = stack.back();
      stack.pop_back();
      for (int j = 0; j < 8; ++j)
        if (r[j] && label[j] < 0 && std::abs(kRingDx[a] - kRingDx[j]) <= 1 &&
            std::abs(kRingDy[a] - kRingDy[j]) <= 1) {
          label[j] = groups;
          stack.push_back(j);
        }
    }
    ++groups;
  }
  return groups;
}

inline void zhang_suen(EdgeMap& m) {
  const int w = m.width(), h = m.height();
  std::vector<PixelCoord> kill;
  bool changed = true;
  while (changed) {
    changed = false;
    for (int pass = 0; pass < 2; ++pass) {
      kill.clear();
      for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
          if (!m.at(x, y)) continue;
          const auto r = ring(m, x, y);
          const int b = neighbours(r);
          if (b < 2 || b > 6 || transitions(r) != 1) continue;
          const bool p2 = r[0], p4 = r[2], p6 = r[4], p8 = r[6];
          if (pass == 0 ? (p2 && p4 && p6) || (p4 && p6 && p8) : (p2 && p4 && p8) || (p2 && p6 && p8))
            continue;
          kill.push_back({x, y});
        }
      for (const auto& p : kill) m.set(p.x, p.y, false);
      changed = changed || !kill.empty();
    }
  }
}

// Drops pixels whose removal keeps their neighbourhood 8-connected (staircase
// corners left by thinning), so interior path pixels have exactly 2 neighbours.
inline void remove_redundant(EdgeMap& m) {
  for (int y = 0; y < m.height(); ++y)
    for (int x = 0; x < m.width(); ++x) {
      if (!m.at(x, y)) continue;
      const auto r = ring(m, x, y);
      if (neighbours(r) >= 2 && ring_groups(r) == 1 && transitions(r) < 3) m.set(x, y, false);
    }
}

inline void prune_spurs(EdgeMap& m, int max_len) {
  if (max_len <= 0) return;
  std::vector<PixelCoord> ends;
  for (int y = 0; y < m.height(); ++y)
    for (int x = 0; x < m.width(); ++x)
      if (m.at(x, y) && neighbours(ring(m, x, y)) == 1) ends.push_back({x, y});
  for (const auto& start : ends) {
    if (!m.at(start.x, start.y)) continue;
    std::vector<PixelCoord> path{start};
    PixelCoord prev{-1, -1}, cur = start;
    bool hit_junction = false;
    while (static_cast<int>(path.size()) <= max_len) {
      PixelCoord next{-1, -1};
      int count = 0;
      for (int i = 0; i < 8; ++i) {
        const int nx = cur.x + kRingDx[i], ny = cur.y + kRingDy[i];
        if (m.get(nx, ny) && !(nx == prev.x && ny == prev.y)) {
          ++count;
          next = {nx, ny};
        }
      }
      if (count == 0) break;  // isolated short stroke: keep it
      if (count >= 2 || neighbours(ring(m, next.x, next.y)) >= 3) {
        hit_junction = true;
        if (count >= 2) path.pop_back();  // cur itself is the branching pixel
        break;
      }
      prev = cur;
      cur = next;
      path.push_back(cur);
    }
    if (hit_junction && static_cast<int>(path.size()) < max_len)
      for (const auto& p : path) m.set(p.x, p.y, false);
  }
}

}  // namespace anchor_detail

// One-pixel-wide skeleton of the mask: morphological thinning, staircase
// cleanup and spur pruning.
inline EdgeMap skeletonize(const EdgeMap& e, const AnchorConfig& cfg = {}) {
  EdgeMap m = e;
  anchor_detail::zhang_suen(m);
  anchor_detail::remove_redundant(m);
  anchor_detail::prune_spurs(m, cfg.spur_length);
  anchor_detail::remove_redundant(m);
  return m;
}

inline int crossing_number(const EdgeMap& skel, int x, int y) {
  return anchor_detail::transitions(anchor_detail::ring(skel, x, y));
}

namespace anchor_detail {

struct LineFit {
  Point2D centre, dir;
  double sse = 0.0;
};

// Total-least-squares line through pts[b, e).
inline LineFit fit_line(const std::vector<PixelCoord>& pts, std::size_t b, std::size_t e) {
  const double n = static_cast<double>(e - b);
  double mx = 0, my = 0;
  for (std::size_t i = b; i < e; ++i) mx += pts[i].x, my += pts[i].y;
  mx /= n, my /= n;
  double sxx = 0, syy = 0, sxy = 0;
  for (std::size_t i = b; i < e; ++i) {
    const double dx = pts[i].x - mx, dy = pts[i].y - my;
    sxx += dx * dx, syy += dy * dy, sxy += dx * dy;
  }
  const double theta = 0.5 * std::atan2(2 * sxy, sxx - syy);
  const Point2D d{std::cos(theta), std::sin(theta)};
  double sse = 0;
  for (std::size_t i = b; i < e; ++i) {
    const double r = -(pts[i].x - mx) * d.y + (pts[i].y - my) * d.x;
    sse += r * r;
  }
  return {{mx, my}, d, sse};
}

inline std::optional<Point2D> intersect(const LineFit& a, const LineFit& b) {
  const double den = a.dir.x * b.dir.y - a.dir.y * b.dir.x;
  if (std::abs(den) < 1e-9) return std::nullopt;
  const double t = ((b.centre.x - a.centre.x) * b.dir.y - (b.centre.y - a.centre.y) * b.dir.x) / den;
  return Point2D{a.centre.x + t * a.dir.x, a.centre.y + t * a.dir.y};
}

// The skeleton chain through the pixel nearest `peak`, ordered end to end.
// Empty when the neighbourhood holds a branching or closed piece.
inline std::vector<PixelCoord> local_chain(const EdgeMap& skel, Point2D peak, int radius) {
  const int cx = static_cast<int>(std::lround(peak.x)), cy = static_cast<int>(std::lround(peak.y));
  auto inside = [&](int x, int y) {
    const double dx = x - peak.x, dy = y - peak.y;
    return skel.get(x, y) && dx * dx + dy * dy <= double(radius) * radius;
  };
  PixelCoord seed{-1, -1};
  double best = 1e300;
  for (int y = cy - radius; y <= cy + radius; ++y)
    for (int x = cx - radius; x <= cx + radius; ++x)
      if (inside(x, y) && std::hypot(x - peak.x, y - peak.y) < best) best = std::hypot(x - peak.x, y - peak.y), seed = {x, y};
  if (seed.x < 0) return {};
  auto degree = [&](PixelCoord p) {
    int n = 0;
    for (int i = 0; i < 8; ++i) n += inside(p.x + kRingDx[i], p.y + kRingDy[i]);
    return n;
  };
  // flood the component, then walk it from one end
  std::vector<PixelCoord> comp{seed}, stack{seed};
  std::vector<std::uint8_t> seen(static_cast<std::size_t>(2 * radius + 3) * (2 * radius + 3), 0);
  auto mark = [&](PixelCoord p) -> std::uint8_t& {
    return seen[static_cast<std::size_t>(p.y - cy + radius + 1) * (2 * radius + 3) + (p.x - cx + radius + 1)];
  };
  mark(seed) = 1;
  while (!stack.empty()) {
    const auto p = stack.back();
    stack.pop_back();
    for (int i = 0; i < 8; ++i) {
      const PixelCoord q{p.x + kRingDx[i], p.y + kRingDy[i]};
      if (inside(q.x, q.y) && !mark(q)) mark(q) = 1, comp.push_back(q), stack.push_back(q);
    }
  }
  PixelCoord start{-1, -1};
  for (const auto& p : comp) {
    const int d = degree(p);
    if (d > 2) return {};
    if (d == 1 && (start.x < 0 || std::make_pair(p.y, p.x) < std::make_pair(start.y, start.x))) start = p;
  }
  if (start.x < 0) return {};
  std::vector<PixelCoord> chain{start};
  mark(start) = 2;
  for (PixelCoord cur = start;;) {
    PixelCoord next{-1, -1};
    for (int i = 0; i < 8 && next.x < 0; ++i) {
      const PixelCoord q{cur.x + kRingDx[i], cur.y + kRingDy[i]};
      if (inside(q.x, q.y) && mark(q) == 1) next = q;
    }
    if (next.x < 0) break;
    mark(next) = 2;
    chain.push_back(cur = next);
  }
  if (chain.size() != comp.size()) return {};
  return chain;
}

// Places a corner at the crossing of the two stroke centre lines meeting at
// it. The Harris peak of a stroked bend sits inside the angle, a few pixels
// off the vertex; the skeleton arms extrapolate to the vertex itself.
inline std::optional<Point2D> refine_corner(const EdgeMap& skel, Point2D peak, const AnchorConfig& cfg) {
  const auto chain = local_chain(skel, peak, cfg.refine_radius);
  const std::size_t n = chain.size(), min_arm = 4;
  if (n < 2 * min_arm) return std::nullopt;
  std::size_t split = 0;
  double best = 1e300;
  for (std::size_t i = min_arm; i + min_arm <= n; ++i) {
    const double sse = fit_line(chain, 0, i + 1).sse + fit_line(chain, i, n).sse;
    if (sse < best) best = sse, split = i;
  }
  auto a = fit_line(chain, 0, split + 1), b = fit_line(chain, split, n);
  auto x = intersect(a, b);
  if (!x) return std::nullopt;
  // refit without the rounded tip
  std::vector<PixelCoord> arm_a, arm_b;
  for (std::size_t i = 0; i < n; ++i) {
    if (std::hypot(chain[i].x - x->x, chain[i].y - x->y) <= 3.0) continue;
    (i <= split ? arm_a : arm_b).push_back(chain[i]);
  }
  if (arm_a.size() >= min_arm && arm_b.size() >= min_arm) {
    a = fit_line(arm_a, 0, arm_a.size());
    b = fit_line(arm_b, 0, arm_b.size());
    x = intersect(a, b);
    if (!x) return std::nullopt;
  } else {
    arm_a.assign(chain.begin(), chain.begin() + static_cast<std::ptrdiff_t>(split) + 1);
    arm_b.assign(chain.begin() + static_cast<std::ptrdiff_t>(split), chain.end());
  }
  const double cosang = std::abs(a.dir.x * b.dir.x + a.dir.y * b.dir.y);
  const double bend = std::acos(std::min(1.0, cosang)) * 180.0 / 3.14159265358979323846;
  if (bend < cfg.refine_min_bend) return std::nullopt;
  if (a.sse / arm_a.size() > 1.0 || b.sse / arm_b.size() > 1.0) return std::nullopt;
  if (std::hypot(x->x - peak.x, x->y - peak.y) > cfg.refine_max_shift) return std::nullopt;
  return x;
}

}  // namespace anchor_detail

// Corner anchors: Harris peaks, each moved onto the vertex of the skeleton
// bend it belongs to when there is one. Refined corners closer than the NMS
// radius to a stronger corner are dropped.
inline std::vector<Anchor> detect_corners(const EdgeMap& e, const EdgeMap& skel, const AnchorConfig& cfg = {}) {
  auto peaks = corner_peaks(e, cfg);
  std::stable_sort(peaks.begin(), peaks.end(), [](const Anchor& a, const Anchor& b) { return a.score > b.score; });
  std::vector<Anchor> out;
  for (auto c : peaks) {
    if (const auto x = anchor_detail::refine_corner(skel, c.pos, cfg)) c.pos = *x;
    const bool crowded = std::any_of(out.begin(), out.end(), [&](const Anchor& k) {
      return distance(k.pos, c.pos) < cfg.nms_radius;
    });
    if (!crowded) out.push_back(c);
  }
  sort_anchors(out);
  return out;
}

inline std::vector<Anchor> detect_corners(const EdgeMap& e, const AnchorConfig& cfg = {}) {
  return detect_corners(e, skeletonize(e, cfg), cfg);
}

namespace anchor_detail {

// Single-linkage clusters within `radius`; one anchor per cluster at the
// centroid of its members.
inline std::vector<Anchor> cluster(const std::vector<PixelCoord>& pts, double radius, AnchorKind kind) {
  std::vector<int> label(pts.size(), -1);
  std::vector<Anchor> out;
  const double r2 = radius * radius;
  for (std::size_t i = 0; i < pts.size(); ++i) {
    if (label[i] >= 0) continue;
    std::vector<std::size_t> members{i}, stack{i};
    label[i] = static_cast<int>(out.size());
    while (!stack.empty()) {
      const auto a = stack.back();
      stack.pop_back();
      for (std::size_t j = 0; j < pts.size(); ++j) {
        if (label[j] >= 0) continue;
        const double dx = pts[a].x - pts[j].x, dy = pts[a].y - pts[j].y;
        if (dx * dx + dy * dy <= r2) {
          label[j] = label[i];
          members.push_back(j);
          stack.push_back(j);
        }
      }
    }
    double sx = 0, sy = 0;
    for (auto m : members) {
      sx += pts[m].x;
      sy += pts[m].y;
    }
    out.push_back({{sx / members.size(), sy / members.size()}, 1.0, kind, AnchorSource::GradientOperator});
  }
  return out;
}

}  // namespace anchor_detail

// Junctions (crossing number >= 3) and stroke endpoints (crossing number 1)
// on the thinned mask.
inline std::vector<Anchor> junctions_on_skeleton(const EdgeMap& skel, const AnchorConfig& cfg = {}) {
  std::vector<PixelCoord> junctions, endpoints;
  for (int y = 0; y < skel.height(); ++y)
    for (int x = 0; x < skel.width(); ++x) {
      if (!skel.at(x, y)) continue;
      const auto r = anchor_detail::ring(skel, x, y);
      const int cn = anchor_detail::transitions(r);
      if (cn >= 3) junctions.push_back({x, y});
      else if (cn == 1 && anchor_detail::neighbours(r) == 1) endpoints.push_back({x, y});
    }
  auto out = anchor_detail::cluster(junctions, cfg.junction_separation, AnchorKind::Junction);
  auto ends = anchor_detail::cluster(endpoints, cfg.junction_separation, AnchorKind::Endpoint);
  out.insert(out.end(), ends.begin(), ends.end());
  sort_anchors(out);
  return out;
}

inline std::vector<Anchor> detect_junctions(const EdgeMap& e, const AnchorConfig& cfg = {}) {
  return junctions_on_skeleton(skeletonize(e, cfg), cfg);
}

inline int kind_priority(AnchorKind k) {
  switch (k) {
    case AnchorKind::Junction: return 3;
    case AnchorKind::Corner: return 2;
    case AnchorKind::Endpoint: return 1;
    default: return 0;
  }
}

// P_raw: union of the corner, junction and endpoint detectors, deduplicated
// within merge_radius (the higher-priority kind keeps its position).
inline std::vector<Anchor> extract_raw_anchors(const EdgeMap& e, const AnchorConfig& cfg = {}) {
  const EdgeMap skel = skeletonize(e, cfg);
  auto all = detect_corners(e, skel, cfg);
  auto jn = junctions_on_skeleton(skel, cfg);
  all.insert(all.end(), jn.begin(), jn.end());
  std::stable_sort(all.begin(), all.end(), [](const Anchor& a, const Anchor& b) {
    if (kind_priority(a.kind) != kind_priority(b.kind)) return kind_priority(a.kind) > kind_priority(b.kind);
    return a.score > b.score;
  });
  std::vector<Anchor> kept;
  for (const auto& a : all) {
    const bool dup = std::any_of(kept.begin(), kept.end(), [&](const Anchor& k) {
      return distance(k.pos, a.pos) <= cfg.merge_radius;
    });
    if (!dup) kept.push_back(a);
  }
  sort_anchors(kept);
  return kept;
}

inline std::vector<Anchor> extract_raw_anchors(const Raster& img, const AnchorConfig& cfg = {}) {
  return extract_raw_anchors(extract_edge_map(img, cfg.edge_threshold), cfg);
}

}  // namespace geo
