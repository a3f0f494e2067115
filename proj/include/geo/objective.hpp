#pragma once

// Global objective Q = alpha * d_geo + beta * d_consist + gamma * d_sem.

#include <cmath>
#include <set>
#include <string>
#include <vector>

#include "geo/distance.hpp"
#include "geo/edge_map.hpp"
#include "geo/error.hpp"
#include "geo/metrics.hpp"
#include "geo/program.hpp"
#include "geo/render.hpp"
#include "geo/skeleton.hpp"

namespace geo {

struct ObjectiveConfig {
  double alpha = 1.0;
  double beta = 1.0;
  double gamma = 0.001;
  double cd_scale = 100.0;
  double hd_weight = 0.1;
  std::uint8_t edge_threshold = kDefaultEdgeThreshold;

  bool valid() const {
    return alpha >= 0 && beta >= 0 && gamma >= 0 && alpha + beta + gamma > 0 && cd_scale > 0;
  }
};

struct ObjectiveBreakdown {
  double d_geo = 0.0;
  double d_consist = 0.0;
  double d_sem = 0.0;
  double q = 0.0;
  MetricBundle metrics;
};

inline double compose_q(const ObjectiveConfig& cfg, double d_geo, double d_consist, double d_sem) {
  return cfg.alpha * d_geo + cfg.beta * d_consist + cfg.gamma * d_sem;
}

// Draws every primitive that passes validation; primitives with violations
// are skipped (they are charged through d_consist instead).
inline Raster render_valid_subset(const Program& p, const std::vector<Violation>& violations) {
  std::set<std::string> bad;
  for (const auto& v : violations) bad.insert(v.primitive_id);
  Raster r(std::max(p.width, 1), std::max(p.height, 1));
  for (const auto& prim : p.primitives) {
    if (bad.count(prim.id)) continue;
    const Rgb c = prim.style.color;
    trace_primitive(prim, r.width(), r.height(), [&](int x, int y) { r.set(x, y, c); });
  }
  return r;
}

// Relation geometry taken from a program. Skeleton operands are matched to
// the program by geometry, not by id: each skeleton segment/circle maps to the
// closest program segment/circle (within match_radius), each anchor to the
// closest program control point, falling back to the anchor itself.
inline RelationContext relation_context(const Program& p, const GeoSkeleton& skel, double match_radius = 25.0) {
  RelationContext c;
  std::vector<Point2D> controls;
  std::vector<std::pair<Point2D, Point2D>> segs;
  std::vector<std::pair<Point2D, double>> circles;
  for (const auto& prim : p.primitives) {
    if (std::holds_alternative<Label>(prim.shape)) continue;
    for (const auto& q : control_points(prim.shape)) controls.push_back(q);
    if (const auto* s = std::get_if<Segment>(&prim.shape)) segs.push_back({s->p1, s->p2});
    else if (const auto* ci = std::get_if<Circle>(&prim.shape)) circles.push_back({ci->center, ci->radius});
    else if (const auto* a = std::get_if<Arc>(&prim.shape)) circles.push_back({a->center, a->radius});
  }
  for (std::size_t i = 0; i < skel.anchors.size(); ++i) {
    Point2D best = skel.anchors[i].pos;
    double bd = match_radius;
    for (const auto& q : controls)
      if (distance(q, skel.anchors[i].pos) < bd) {
        bd = distance(q, skel.anchors[i].pos);
        best = q;
      }
    c.points[anchor_id(i)] = best;
  }
  for (const auto& h : skel.segments) {
    double bd = match_radius;
    const std::pair<Point2D, Point2D>* best = nullptr;
    for (const auto& s : segs) {
      const double d = std::min(std::max(distance(s.first, h.p1), distance(s.second, h.p2)),
                                std::max(distance(s.first, h.p2), distance(s.second, h.p1)));
      if (d < bd) {
        bd = d;
        best = &s;
      }
    }
    if (best) c.segments[h.id] = *best;
  }
  for (const auto& h : skel.circles) {
    double bd = match_radius;
    const std::pair<Point2D, double>* best = nullptr;
    for (const auto& ci : circles) {
      const double d = distance(ci.first, h.center) + std::abs(ci.second - h.radius);
      if (d < bd) {
        bd = d;
        best = &ci;
      }
    }
    if (best) c.circles[h.id] = *best;
  }
  return c;
}

// Mean residual/tolerance over the skeleton relations; a relation whose
// operands have no counterpart in the program counts as exactly at tolerance.
inline double semantic_distance(const Program& p, const GeoSkeleton& skel) {
  if (skel.relations.empty()) return 0.0;
  const auto ctx = relation_context(p, skel);
  double sum = 0.0;
  for (const auto& r : skel.relations) {
    const auto res = relation_residual(r, ctx);
    if (!res) sum += 1.0;
    else sum += r.tolerance > 0 ? *res / r.tolerance : (*res > 0 ? 1.0 : 0.0);
  }
  return sum / static_cast<double>(skel.relations.size());
}

// Evaluates Q for many candidate programs against one observation. The
// observed edge set and its distance field are computed once.
class Evaluator {
public:
  Evaluator(const Raster& obs, const GeoSkeleton& skel, ObjectiveConfig cfg = {})
      : obs_(obs), skel_(skel), cfg_(cfg), obs_edges_(extract_edge_map(obs, cfg.edge_threshold)),
        obs_points_(obs_edges_.points()) {
    if (!obs_points_.empty()) {
      auto sq = squared_distance_transform(obs_edges_.mask(), obs.width(), obs.height());
      obs_dt_.resize(sq.size());
      for (std::size_t i = 0; i < sq.size(); ++i) obs_dt_[i] = std::sqrt(sq[i]);
    }
  }

  const Raster& observation() const { return obs_; }
  const EdgeMap& observed_edges() const { return obs_edges_; }
  const GeoSkeleton& skeleton() const { return skel_; }
  const ObjectiveConfig& config() const { return cfg_; }
  std::size_t evaluations() const { return evaluations_; }

  ObjectiveBreakdown evaluate(const Program& p, Raster* rendered = nullptr) const {
    ++evaluations_;
    if (p.width != obs_.width() || p.height != obs_.height())
      throw DimensionMismatch(p.width, p.height, obs_.width(), obs_.height());
    ObjectiveBreakdown b;
    const auto violations = validate_consistency(p);
    b.d_consist = static_cast<double>(violations.size());
    Raster rec = render_valid_subset(p, violations);
    b.metrics = edge_metrics(extract_edge_map(rec, cfg_.edge_threshold));
    b.d_geo = (b.metrics.cd + cfg_.hd_weight * b.metrics.hd) / cfg_.cd_scale;
    b.d_sem = semantic_distance(p, skel_);
    b.q = compose_q(cfg_, b.d_geo, b.d_consist, b.d_sem);
    if (rendered) *rendered = std::move(rec);
    return b;
  }

  // CD/HD of a rendered edge map against the observation (SSIM not computed).
  MetricBundle edge_metrics(const EdgeMap& rec_edges) const {
    MetricBundle m;
    const auto rec = rec_edges.points();
    m.rec_edges = rec.size();
    m.obs_edges = obs_points_.size();
    m.ssim = 0.0;
    if (rec.empty() || obs_points_.empty()) {
      m.cd = m.hd = canvas_diagonal(obs_.width(), obs_.height());
      m.empty_edges = true;
      return m;
    }
    double sum_ro = 0, max_ro = 0;
    for (const auto& p : rec) {
      const double d = obs_dt_[static_cast<std::size_t>(p.y) * obs_.width() + p.x];
      sum_ro += d;
      max_ro = std::max(max_ro, d);
    }
    const auto d_or = nearest_distances(obs_points_, rec);
    double sum_or = 0, max_or = 0;
    for (double d : d_or) {
      sum_or += d;
      max_or = std::max(max_or, d);
    }
    m.cd = 0.5 * (sum_ro / static_cast<double>(rec.size()) + sum_or / static_cast<double>(obs_points_.size()));
    m.hd = std::max(max_ro, max_or);
    return m;
  }

private:
  Raster obs_;
  GeoSkeleton skel_;
  ObjectiveConfig cfg_;
  EdgeMap obs_edges_;
  std::vector<PixelCoord> obs_points_;
  std::vector<double> obs_dt_;
  mutable std::size_t evaluations_ = 0;
};

inline ObjectiveBreakdown objective(const Program& p, const Raster& obs, const GeoSkeleton& skel,
                                    const ObjectiveConfig& cfg = {}) {
  return Evaluator(obs, skel, cfg).evaluate(p);
}

}  // namespace geo
