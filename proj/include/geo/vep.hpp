#pragma once

// Visual Error Projection: classifies the edge-set discrepancy between a
// rendering and the observation into regions the refiner can act on.

#include <algorithm>
#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "geo/distance.hpp"
#include "geo/edge_map.hpp"
#include "geo/error.hpp"
#include "geo/geometry.hpp"
#include "geo/metrics.hpp"
#include "geo/program.hpp"
#include "geo/raster.hpp"

namespace geo {

enum class RegionClass { Missing, Hallucination, Drift, StyleMismatch };

inline const char* to_string(RegionClass c) {
  switch (c) {
    case RegionClass::Missing: return "missing";
    case RegionClass::Hallucination: return "hallucination";
    case RegionClass::Drift: return "drift";
    default: return "style_mismatch";
  }
}

struct BBox {
  int x0 = 0, y0 = 0, x1 = 0, y1 = 0;  // inclusive

  int width() const { return x1 - x0 + 1; }
  int height() const { return y1 - y0 + 1; }
  friend bool operator==(const BBox&, const BBox&) = default;
};

struct DiffRegion {
  RegionClass classification = RegionClass::Missing;
  BBox bbox;
  Point2D centroid;
  int pixel_count = 0;
  double local_cd = 0.0;  // mean distance of the region's pixels to the opposite edge set
  std::optional<std::string> nearest_primitive_id;

  // Not serialized: the pixels behind the region, split by side.
  std::vector<PixelCoord> missing_pixels;        // observed, unmatched
  std::vector<PixelCoord> hallucinated_pixels;   // rendered, unmatched
  double observed_width = 0.0;  // stroke thickness estimates (StyleMismatch only)
  double rendered_width = 0.0;
  Point2D missing_centroid, hallucinated_centroid;
};

struct DiffReport {
  std::vector<DiffRegion> regions;
  MetricBundle metrics;
  int iteration = 0;
  Raster diff_image;
};

struct VepConfig {
  int match_radius = 2;          // tau, Chebyshev
  double drift_radius = 15.0;
  double drift_size_ratio = 0.5;  // |a - b| <= ratio * max(a, b)
  double style_width_delta = 1.5;
  double style_contact_fraction = 0.5;
  int style_window_margin = 12;
  double attribution_radius = 25.0;
  std::uint8_t edge_threshold = kDefaultEdgeThreshold;
};

namespace vep_detail {

inline const Rgb kMatched{160, 160, 160};
inline const Rgb kMissing{255, 0, 0};
inline const Rgb kHallucination{0, 0, 255};
inline const Rgb kDrift{255, 0, 255};
inline const Rgb kStyle{255, 140, 0};

inline Point2D centroid_of(const std::vector<PixelCoord>& px) {
  double sx = 0, sy = 0;
  for (const auto& p : px) {
    sx += p.x;
    sy += p.y;
  }
  const double n = static_cast<double>(std::max<std::size_t>(px.size(), 1));
  return {sx / n, sy / n};
}

inline BBox bbox_of(const std::vector<PixelCoord>& px) {
  BBox b{px.front().x, px.front().y, px.front().x, px.front().y};
  for (const auto& p : px) {
    b.x0 = std::min(b.x0, p.x);
    b.y0 = std::min(b.y0, p.y);
    b.x1 = std::max(b.x1, p.x);
    b.y1 = std::max(b.y1, p.y);
  }
  return b;
}

inline BBox merge(const BBox& a, const BBox& b) {
  return {std::min(a.x0, b.x0), std::min(a.y0, b.y0), std::max(a.x1, b.x1), std::max(a.y1, b.y1)};
}

// Squared distance from each ink pixel to the nearest background pixel.
inline std::vector<double> inner_distance(const EdgeMap& ink) {
  std::vector<std::uint8_t> bg(ink.mask().size());
  for (std::size_t i = 0; i < bg.size(); ++i) bg[i] = ink.mask()[i] ? 0 : 1;
  return squared_distance_transform(bg, ink.width(), ink.height());
}

// Median stroke thickness inside a window: 2 * d - 1 over the ridge pixels
// (local maxima) of the inner distance transform.
inline double median_thickness(const std::vector<double>& inner, int w, int h, BBox win) {
  win.x0 = std::max(win.x0, 1);
  win.y0 = std::max(win.y0, 1);
  win.x1 = std::min(win.x1, w - 2);
  win.y1 = std::min(win.y1, h - 2);
  std::vector<double> widths;
  for (int y = win.y0; y <= win.y1; ++y)
    for (int x = win.x0; x <= win.x1; ++x) {
      const double d = inner[static_cast<std::size_t>(y) * w + x];
      if (d == 0 || d >= 1e19) continue;
      bool ridge = true;
      for (int dy = -1; dy <= 1 && ridge; ++dy)
        for (int dx = -1; dx <= 1; ++dx)
          if (inner[static_cast<std::size_t>(y + dy) * w + (x + dx)] > d) {
            ridge = false;
            break;
          }
      if (ridge) widths.push_back(2.0 * std::sqrt(d) - 1.0);
    }
  if (widths.empty()) return 0.0;
  std::nth_element(widths.begin(), widths.begin() + static_cast<long>(widths.size() / 2), widths.end());
  return widths[widths.size() / 2];
}

inline double contact_fraction(const std::vector<PixelCoord>& px, const EdgeMap& matched) {
  std::size_t touching = 0;
  for (const auto& p : px) {
    bool t = false;
    for (int dy = -1; dy <= 1 && !t; ++dy)
      for (int dx = -1; dx <= 1 && !t; ++dx) t = matched.get(p.x + dx, p.y + dy);
    touching += t;
  }
  return px.empty() ? 0.0 : static_cast<double>(touching) / static_cast<double>(px.size());
}

inline std::vector<double> distance_field(const EdgeMap& e) {
  auto sq = squared_distance_transform(e.mask(), e.width(), e.height());
  for (auto& v : sq) v = std::sqrt(v);
  return sq;
}

inline double mean_at(const std::vector<PixelCoord>& px, const std::vector<double>& field, int w) {
  double s = 0;
  for (const auto& p : px) s += field[static_cast<std::size_t>(p.y) * w + p.x];
  return px.empty() ? 0.0 : s / static_cast<double>(px.size());
}

}  // namespace vep_detail

// Builds the classified difference map between a rendering and the observation.
inline DiffReport project_errors(const Raster& rec, const Raster& obs, const MetricBundle& metrics,
                                 const VepConfig& cfg = {}, int iteration = 0) {
  using namespace vep_detail;
  if (rec.width() != obs.width() || rec.height() != obs.height())
    throw DimensionMismatch(rec.width(), rec.height(), obs.width(), obs.height());
  const int w = obs.width(), h = obs.height();
  const EdgeMap e_obs = extract_edge_map(obs, cfg.edge_threshold);
  const EdgeMap e_rec = extract_edge_map(rec, cfg.edge_threshold);
  const EdgeMap near_rec = dilate_square(e_rec, cfg.match_radius);
  const EdgeMap near_obs = dilate_square(e_obs, cfg.match_radius);
  const EdgeMap miss = subtract(e_obs, near_rec);
  const EdgeMap hallu = subtract(e_rec, near_obs);
  const EdgeMap matched_obs = intersect(e_obs, near_rec);
  const EdgeMap matched_rec = intersect(e_rec, near_obs);

  DiffReport report;
  report.metrics = metrics;
  report.iteration = iteration;
  report.diff_image = Raster(w, h);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      if (matched_obs.at(x, y) || matched_rec.at(x, y)) report.diff_image.set(x, y, kMatched);

  const auto miss_cc = connected_components(miss);
  const auto hallu_cc = connected_components(hallu);
  if (miss_cc.empty() && hallu_cc.empty()) return report;

  const auto dist_to_rec = e_rec.empty() ? std::vector<double>() : distance_field(e_rec);
  const auto dist_to_obs = e_obs.empty() ? std::vector<double>() : distance_field(e_obs);
  const double diag = canvas_diagonal(w, h);

  struct Piece {
    std::vector<PixelCoord> px;
    bool is_miss;
    Point2D c;
    bool used = false;
  };
  std::vector<Piece> pieces;
  for (const auto& c : miss_cc) pieces.push_back({c, true, centroid_of(c)});
  for (const auto& c : hallu_cc) pieces.push_back({c, false, centroid_of(c)});

  auto local_cd = [&](const Piece& p) {
    const auto& field = p.is_miss ? dist_to_rec : dist_to_obs;
    return field.empty() ? diag : mean_at(p.px, field, w);
  };

  // 1. stroke-width mismatches along matched strokes
  std::vector<double> inner_obs, inner_rec;
  for (auto& p : pieces) {
    const auto& matched = p.is_miss ? matched_obs : matched_rec;
    if (contact_fraction(p.px, matched) < cfg.style_contact_fraction) continue;
    BBox win = bbox_of(p.px);
    win.x0 -= cfg.style_window_margin;
    win.y0 -= cfg.style_window_margin;
    win.x1 += cfg.style_window_margin;
    win.y1 += cfg.style_window_margin;
    if (inner_obs.empty()) {
      inner_obs = inner_distance(e_obs);
      inner_rec = inner_distance(e_rec);
    }
    const double wo = median_thickness(inner_obs, w, h, win), wr = median_thickness(inner_rec, w, h, win);
    if (wo == 0.0 || wr == 0.0 || std::abs(wo - wr) <= cfg.style_width_delta) continue;
    DiffRegion r;
    r.classification = RegionClass::StyleMismatch;
    r.observed_width = wo;
    r.rendered_width = wr;
    (p.is_miss ? r.missing_pixels : r.hallucinated_pixels) = p.px;
    r.local_cd = local_cd(p);
    p.used = true;
    report.regions.push_back(std::move(r));
  }

  // 2. drift: greedy pairing of nearby, similarly sized miss/hallu pieces
  struct Pair {
    double d;
    std::size_t m, h;
  };
  std::vector<Pair> pairs;
  for (std::size_t i = 0; i < pieces.size(); ++i) {
    if (!pieces[i].is_miss || pieces[i].used) continue;
    for (std::size_t j = 0; j < pieces.size(); ++j) {
      if (pieces[j].is_miss || pieces[j].used) continue;
      const double d = distance(pieces[i].c, pieces[j].c);
      const double a = static_cast<double>(pieces[i].px.size()), b = static_cast<double>(pieces[j].px.size());
      if (d <= cfg.drift_radius && std::abs(a - b) <= cfg.drift_size_ratio * std::max(a, b))
        pairs.push_back({d, i, j});
    }
  }
  std::stable_sort(pairs.begin(), pairs.end(), [](const Pair& a, const Pair& b) { return a.d < b.d; });
  for (const auto& pr : pairs) {
    auto& m = pieces[pr.m];
    auto& hh = pieces[pr.h];
    if (m.used || hh.used) continue;
    m.used = hh.used = true;
    DiffRegion r;
    r.classification = RegionClass::Drift;
    r.missing_pixels = m.px;
    r.hallucinated_pixels = hh.px;
    const double n = static_cast<double>(m.px.size() + hh.px.size());
    r.local_cd = (local_cd(m) * m.px.size() + local_cd(hh) * hh.px.size()) / n;
    report.regions.push_back(std::move(r));
  }

  // 3. the rest
  for (auto& p : pieces) {
    if (p.used) continue;
    DiffRegion r;
    r.classification = p.is_miss ? RegionClass::Missing : RegionClass::Hallucination;
    (p.is_miss ? r.missing_pixels : r.hallucinated_pixels) = p.px;
    r.local_cd = local_cd(p);
    report.regions.push_back(std::move(r));
  }

  for (auto& r : report.regions) {
    std::vector<PixelCoord> all = r.missing_pixels;
    all.insert(all.end(), r.hallucinated_pixels.begin(), r.hallucinated_pixels.end());
    r.pixel_count = static_cast<int>(all.size());
    r.centroid = centroid_of(all);
    r.bbox = bbox_of(all);
    r.missing_centroid = centroid_of(r.missing_pixels);
    r.hallucinated_centroid = centroid_of(r.hallucinated_pixels);
    Rgb color = r.classification == RegionClass::Drift           ? kDrift
                : r.classification == RegionClass::StyleMismatch ? kStyle
                : r.classification == RegionClass::Missing       ? kMissing
                                                                 : kHallucination;
    for (const auto& p : all) report.diff_image.set(p.x, p.y, color);
  }
  std::stable_sort(report.regions.begin(), report.regions.end(), [](const DiffRegion& a, const DiffRegion& b) {
    if (a.pixel_count != b.pixel_count) return a.pixel_count > b.pixel_count;
    if (a.bbox.y0 != b.bbox.y0) return a.bbox.y0 < b.bbox.y0;
    return a.bbox.x0 < b.bbox.x0;
  });
  return report;
}

inline DiffReport project_errors(const Raster& rec, const Raster& obs, const VepConfig& cfg = {}) {
  return project_errors(rec, obs, measure(rec, obs, cfg.edge_threshold), cfg);
}

// Distance from p to the rendered envelope of a primitive (centre line minus
// half the stroke width, never negative).
inline double envelope_distance(const Primitive& prim, Point2D p) {
  return std::max(0.0, shape_distance(prim.shape, p) - prim.style.stroke_width / 2.0);
}

// Links each region to the nearest primitive (within attribution_radius).
// Ties go to the later statement, which is drawn on top. A region whose
// centroid is far from everything (a wide drift wedge, say) falls back to the
// primitive with the smallest median distance to its own pixels.
inline DiffReport attribute_regions(DiffReport report, const Program& p, const VepConfig& cfg = {}) {
  for (auto& r : report.regions) {
    r.nearest_primitive_id.reset();
    double best = cfg.attribution_radius;
    for (const auto& prim : p.primitives) {
      const double d = envelope_distance(prim, r.centroid);
      if (d <= best) {
        best = d;
        r.nearest_primitive_id = prim.id;
      }
    }
    if (r.nearest_primitive_id) continue;
    const auto& px = r.hallucinated_pixels.empty() ? r.missing_pixels : r.hallucinated_pixels;
    if (px.empty()) continue;
    const std::size_t stride = std::max<std::size_t>(1, px.size() / 64);
    best = cfg.attribution_radius;
    for (const auto& prim : p.primitives) {
      std::vector<double> d;
      for (std::size_t i = 0; i < px.size(); i += stride)
        d.push_back(envelope_distance(prim, {static_cast<double>(px[i].x), static_cast<double>(px[i].y)}));
      std::nth_element(d.begin(), d.begin() + static_cast<long>(d.size() / 2), d.end());
      if (d[d.size() / 2] <= best) {
        best = d[d.size() / 2];
        r.nearest_primitive_id = prim.id;
      }
    }
  }
  return report;
}

inline nlohmann::json to_json(const DiffRegion& r) {
  nlohmann::json j{{"classification", to_string(r.classification)},
                   {"bbox", {{"x0", r.bbox.x0}, {"y0", r.bbox.y0}, {"x1", r.bbox.x1}, {"y1", r.bbox.y1}}},
                   {"centroid", {{"x", r.centroid.x}, {"y", r.centroid.y}}},
                   {"pixel_count", r.pixel_count},
                   {"local_cd", r.local_cd}};
  j["nearest_primitive_id"] = r.nearest_primitive_id ? nlohmann::json(*r.nearest_primitive_id) : nlohmann::json(nullptr);
  if (r.classification == RegionClass::StyleMismatch) {
    j["observed_width"] = r.observed_width;
    j["rendered_width"] = r.rendered_width;
  }
  return j;
}

inline nlohmann::json to_json(const MetricBundle& m) {
  return {{"cd", m.cd}, {"hd", m.hd}, {"ssim", m.ssim}, {"rec_edges", m.rec_edges}, {"obs_edges", m.obs_edges}};
}

inline nlohmann::json to_json(const DiffReport& d) {
  nlohmann::json j;
  j["iteration"] = d.iteration;
  j["metrics"] = to_json(d.metrics);
  j["regions"] = nlohmann::json::array();
  for (const auto& r : d.regions) j["regions"].push_back(to_json(r));
  return j;
}

}  // namespace geo
