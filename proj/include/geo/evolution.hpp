#pragma once

// Phase II: initial synthesis from the skeleton, then the render / measure /
// project / correct loop with HD-based termination.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "json.hpp"

#include "geo/geometry.hpp"
#include "geo/metrics.hpp"
#include "geo/objective.hpp"
#include "geo/program.hpp"
#include "geo/render.hpp"
#include "geo/skeleton.hpp"
#include "geo/vep.hpp"

namespace geo {

enum class RefinerMode { Deterministic, Agent, Hybrid };

inline const char* to_string(RefinerMode m) {
  switch (m) {
    case RefinerMode::Deterministic: return "det";
    case RefinerMode::Agent: return "agent";
    default: return "hybrid";
  }
}

inline std::optional<RefinerMode> refiner_mode_from_string(std::string_view s) {
  if (s == "det" || s == "deterministic") return RefinerMode::Deterministic;
  if (s == "agent") return RefinerMode::Agent;
  if (s == "hybrid") return RefinerMode::Hybrid;
  return std::nullopt;
}

struct LoopConfig {
  double epsilon_hd = 5.0;
  int max_iterations = 10;
  RefinerMode refiner_mode = RefinerMode::Deterministic;
  ObjectiveConfig objective;
  VepConfig vep;
  double step_init = 8.0;
  double step_min = 0.5;
  double stall_threshold = 1e-6;
  double snap_radius = 5.0;        // hypothesis endpoint -> anchor
  double snap_line_tolerance = 1.5;  // anchor must lie this close to the fitted line
  double completion_elongation = 3.0;
  double pruning_coverage = 0.6;
  int max_probes_per_step = 600;
  int max_probes_per_handle = 80;

  bool valid() const {
    return epsilon_hd > 0 && max_iterations >= 1 && step_min > 0 && step_min <= step_init && objective.valid();
  }
};

struct HistoryEntry {
  int t = 0;
  double cd = 0.0;
  double hd = 0.0;
  double q = 0.0;
  std::string action;  // what produced this iterate
  std::string agent_error;
};

struct LoopState {
  int iteration = 0;
  Program program;
  MetricBundle metrics;
  DiffReport report;
  Program best_program;
  double best_q = 0.0;
  MetricBundle best_metrics;
  std::vector<HistoryEntry> history;
  std::size_t probes = 0;  // objective evaluations spent by the refiner
  std::string stop_reason;
};

// Agent-backed generation and refinement. Implementations throw on transport
// or parse failure; the loop then falls back to the deterministic path.
class ProgramAgent {
public:
  virtual ~ProgramAgent() = default;
  virtual Program generate(const GeoSkeleton& skel, const std::optional<std::string>& text, const Raster& obs) = 0;
  virtual Program refine(const Program& current, const DiffReport& report, const GeoSkeleton& skel,
                         const Raster& obs) = 0;
};

// ---------------------------------------------------------------------------
// Initial synthesis

// Dominant stroke thickness and ink colour of the observation.
struct ObservedStyle {
  double thickness = 0.0;
  Rgb color{0, 0, 0};
};

inline ObservedStyle observe_style(const Raster& obs, std::uint8_t threshold = kDefaultEdgeThreshold) {
  ObservedStyle s;
  const EdgeMap ink = extract_edge_map(obs, threshold);
  if (ink.empty()) return s;
  const auto inner = vep_detail::inner_distance(ink);
  s.thickness = vep_detail::median_thickness(inner, obs.width(), obs.height(),
                                             BBox{0, 0, obs.width() - 1, obs.height() - 1});
  std::vector<int> r, g, b;
  for (const auto& p : ink.points()) {
    const Rgb c = obs.at(p.x, p.y);
    r.push_back(c.r);
    g.push_back(c.g);
    b.push_back(c.b);
  }
  auto median = [](std::vector<int>& v) {
    std::nth_element(v.begin(), v.begin() + static_cast<long>(v.size() / 2), v.end());
    return static_cast<std::uint8_t>(v[v.size() / 2]);
  };
  s.color = {median(r), median(g), median(b)};
  return s;
}

namespace evo_detail {

inline std::string fresh_id(const Program& p, const std::string& prefix) {
  for (int i = 0;; ++i) {
    std::string id = prefix + std::to_string(i);
    if (!p.find(id)) return id;
  }
}

inline Point2D snap(Point2D end, Point2D other, const std::vector<Anchor>& anchors, double radius,
                    double line_tol) {
  const Anchor* best = nullptr;
  for (const auto& a : anchors) {
    const double d = distance(a.pos, end);
    if (d > radius || point_line_distance(a.pos, other, end) > line_tol) continue;
    if (!best || d < distance(best->pos, end)) best = &a;
  }
  return best ? best->pos : end;
}

inline double clamp_width(double w) { return std::clamp(w, Style::kMinWidth, Style::kMaxWidth); }

}  // namespace evo_detail

// Deterministic C^(0): segments and circles from the fitted hypotheses, point
// marks at corner/junction anchors. Ids follow the skeleton ids so relation
// operands resolve against the program.
inline Program synthesize_initial(const GeoSkeleton& skel, int width = Program::kDefaultCanvas,
                                  int height = Program::kDefaultCanvas, const Style& style = {},
                                  const LoopConfig& cfg = {}) {
  using namespace evo_detail;
  Program p;
  p.width = width;
  p.height = height;
  p.defaults = style;
  std::vector<Point2D> vertices;
  for (const auto& s : skel.segments) {
    Segment seg{snap(s.p1, s.p2, skel.anchors, cfg.snap_radius, cfg.snap_line_tolerance),
                snap(s.p2, s.p1, skel.anchors, cfg.snap_radius, cfg.snap_line_tolerance)};
    if (distance(seg.p1, seg.p2) < 1e-6) continue;
    vertices.push_back(seg.p1);
    vertices.push_back(seg.p2);
    p.primitives.push_back({s.id, seg, style});
  }
  for (const auto& c : skel.circles) {
    if (!(c.radius > 0)) continue;
    if (c.full || normalize_degrees(c.end_deg - c.start_deg) == 0.0)
      p.primitives.push_back({c.id, Circle{c.center, c.radius}, style});
    else
      p.primitives.push_back({c.id, Arc{c.center, c.radius, normalize_degrees(c.start_deg), normalize_degrees(c.end_deg)}, style});
  }
  for (std::size_t i = 0; i < skel.anchors.size(); ++i) {
    const auto& a = skel.anchors[i];
    if (a.kind != AnchorKind::Corner && a.kind != AnchorKind::Junction) continue;
    // sit on the synthesized vertex when one is close, so the mark stays on the stroke
    Point2D pos = a.pos;
    double best = cfg.snap_radius;
    for (const auto& v : vertices)
      if (distance(v, a.pos) <= best) {
        best = distance(v, a.pos);
        pos = v;
      }
    p.primitives.push_back({anchor_id(i), PointMark{pos}, style});
  }
  if (!validate_consistency(p).empty()) {
    // drop whatever fails validation rather than emit an invalid program
    const auto v = validate_consistency(p);
    std::set<std::string> bad;
    for (const auto& x : v) bad.insert(x.primitive_id);
    std::erase_if(p.primitives, [&](const Primitive& prim) { return bad.count(prim.id) > 0; });
  }
  return p;
}

// Synthesis against an observation: picks the stroke width and colour that
// best explain the observed ink.
inline Program synthesize_initial(const GeoSkeleton& skel, const Raster& obs, const Evaluator& eval,
                                  const LoopConfig& cfg = {}, std::size_t* probes = nullptr) {
  const auto observed = observe_style(obs, cfg.objective.edge_threshold);
  Style style;
  style.color = observed.color;
  Program best = synthesize_initial(skel, obs.width(), obs.height(), style, cfg);
  if (best.primitives.empty() || observed.thickness <= 0) return best;
  double best_q = std::numeric_limits<double>::infinity();
  std::set<double> candidates;
  for (double d : {-1.0, -0.5, 0.0, 0.5})
    candidates.insert(evo_detail::clamp_width(std::round(observed.thickness + d)));
  for (double w : candidates) {
    style.stroke_width = w;
    Program cand = synthesize_initial(skel, obs.width(), obs.height(), style, cfg);
    const double q = eval.evaluate(cand).q;
    if (probes) ++*probes;
    if (q < best_q) {
      best_q = q;
      best = std::move(cand);
    }
  }
  return best;
}

// ---------------------------------------------------------------------------
// Pattern search

// A tunable parameter: a group of coincident control points moved jointly
// along the handle's two axes, or a circle/arc radius (one axis).
struct Handle {
  std::vector<std::pair<std::size_t, std::size_t>> points;  // (primitive index, control point index)
  std::optional<std::size_t> radius_of;
  Point2D location;
  std::vector<Point2D> axes;  // unit directions; for radii only axes[0].x matters
  bool always = false;        // tuned regardless of where the error pixels are
};

namespace evo_detail {

inline double* radius_ref(Shape& s) {
  if (auto* c = std::get_if<Circle>(&s)) return &c->radius;
  if (auto* a = std::get_if<Arc>(&s)) return &a->radius;
  return nullptr;
}

// Point handles for the given primitives (each merged with coincident points
// anywhere in the program) plus radius handles. A point on a segment is
// parameterized along and across that segment, other points along x and y.
inline std::vector<Handle> handles_for(Program& p, const std::set<std::size_t>& targets, double coincide = 0.5) {
  std::vector<Handle> out;
  std::set<std::pair<std::size_t, std::size_t>> taken;
  for (auto i : targets) {
    auto refs = control_point_refs(p.primitives[i].shape);
    const bool round = radius_ref(p.primitives[i].shape) != nullptr;
    for (std::size_t k = 0; k < refs.size(); ++k) {
      if (taken.count({i, k})) continue;
      Handle h;
      h.location = *refs[k];
      h.always = round;
      for (std::size_t j = 0; j < p.primitives.size(); ++j) {
        if (std::holds_alternative<Label>(p.primitives[j].shape)) continue;
        auto other = control_point_refs(p.primitives[j].shape);
        for (std::size_t m = 0; m < other.size(); ++m)
          if (!taken.count({j, m}) && distance(*other[m], h.location) <= coincide) {
            h.points.push_back({j, m});
            taken.insert({j, m});
          }
      }
      if (const auto* seg = std::get_if<Segment>(&p.primitives[i].shape); seg && distance(seg->p1, seg->p2) > 0) {
        const Point2D u = (seg->p2 - seg->p1) * (1.0 / distance(seg->p1, seg->p2));
        h.axes = {u, {-u.y, u.x}};
      } else {
        h.axes = {{1, 0}, {0, 1}};
      }
      out.push_back(std::move(h));
    }
    if (round) {
      Handle h;
      h.radius_of = i;
      h.location = control_points(p.primitives[i].shape).front();
      h.axes = {{1, 0}};
      h.always = true;
      out.push_back(std::move(h));
    }
  }
  return out;
}

inline void apply(Program& p, const Handle& h, std::size_t axis, double delta) {
  if (h.radius_of) {
    *radius_ref(p.primitives[*h.radius_of].shape) += delta;
    return;
  }
  const Point2D d = h.axes[axis] * delta;
  for (auto [i, k] : h.points) {
    auto refs = control_point_refs(p.primitives[i].shape);
    *refs[k] = *refs[k] + d;
  }
}

}  // namespace evo_detail

struct FineTuneResult {
  Program program;
  ObjectiveBreakdown score;
  std::size_t probes = 0;
};

// Compass search over the handles nearest `focus` first. Steps above one
// pixel use the handle's axes; smaller ones poll the 8 grid neighbours. At each step size
// every axis is polled in both directions (the last successful direction
// first); an accepted probe is repeated while it keeps improving. The step
// halves after each sweep (after a fruitless sweep once at or
// below 1 px) down to step_min. Point handles farther than
// 2 * step_init from every unmatched pixel are left alone.
inline FineTuneResult fine_tune(const Program& start, const ObjectiveBreakdown& start_score,
                                const std::set<std::size_t>& targets, const std::vector<Point2D>& focus,
                                const std::vector<PixelCoord>& unmatched, const Evaluator& eval,
                                const LoopConfig& cfg) {
  FineTuneResult r{start, start_score, 0};
  auto handles = evo_detail::handles_for(r.program, targets);
  auto focus_dist = [&](const Handle& h) {
    double d = std::numeric_limits<double>::infinity();
    for (const auto& f : focus) d = std::min(d, distance(f, h.location));
    return d;
  };
  std::stable_sort(handles.begin(), handles.end(),
                   [&](const Handle& a, const Handle& b) { return focus_dist(a) < focus_dist(b); });
  const double reach = 2.0 * cfg.step_init;
  auto relevant = [&](const Handle& h) {
    if (h.always || unmatched.empty()) return true;
    for (const auto& p : unmatched)
      if (std::abs(p.x - h.location.x) <= reach && std::abs(p.y - h.location.y) <= reach &&
          distance({static_cast<double>(p.x), static_cast<double>(p.y)}, h.location) <= reach)
        return true;
    return false;
  };
  auto perfect = [&](const ObjectiveBreakdown& s) { return s.metrics.cd == 0.0 && s.metrics.hd == 0.0; };
  auto budget_left = [&](std::size_t spent) {
    return static_cast<int>(spent) < cfg.max_probes_per_handle && static_cast<int>(r.probes) < cfg.max_probes_per_step;
  };

  for (const auto& h : handles) {
    if (perfect(r.score) || !budget_left(0)) break;
    if (!relevant(h)) continue;
    std::size_t spent = 0;
    // pixel-scale steps also follow the raster grid, where endpoint rounding happens
    Handle grid = h;
    if (!h.radius_of) grid.axes = {{1, 0}, {0, 1}, {1, 1}, {1, -1}};
    std::vector<std::pair<std::size_t, double>> order;
    for (std::size_t a = 0; a < h.axes.size(); ++a) {
      order.push_back({a, 1.0});
      order.push_back({a, -1.0});
    }
    bool on_grid = false;
    for (double step = cfg.step_init; step >= cfg.step_min - 1e-12;) {
      if (!on_grid && step <= 1.0 + 1e-12 && !h.radius_of) {
        on_grid = true;
        std::vector<std::pair<std::size_t, double>> fine;
        for (std::size_t a = 0; a < grid.axes.size(); ++a) {
          fine.push_back({a, 1.0});
          fine.push_back({a, -1.0});
        }
        order = std::move(fine);
      }
      const Handle& active = on_grid ? grid : h;
      std::set<std::size_t> moved_axes;
      for (std::size_t oi = 0; oi < order.size(); ++oi) {
        const auto [axis, dir] = order[oi];
        if (moved_axes.count(axis)) continue;
        bool moved = false;
        while (budget_left(spent) && !perfect(r.score)) {
          Program cand = r.program;
          evo_detail::apply(cand, active, axis, dir * step);
          if (!validate_consistency(cand).empty()) break;
          const auto s = eval.evaluate(cand);
          ++spent;
          ++r.probes;
          if (!(s.q < r.score.q)) break;
          r.program = std::move(cand);
          r.score = s;
          moved = true;
        }
        if (moved) {
          moved_axes.insert(axis);
          std::rotate(order.begin(), order.begin() + static_cast<long>(oi), order.begin() + static_cast<long>(oi) + 1);
        }
      }
      if (perfect(r.score) || !budget_left(spent)) break;
      // fine steps repeat while they keep paying off
      if (moved_axes.empty() || step > 1.0 + 1e-12) step /= 2;
    }
  }
  return r;
}

// ---------------------------------------------------------------------------
// Refinement

namespace evo_detail {

struct Axis {
  Point2D centroid;
  Point2D dir{1, 0};
  double elongation = 0.0;
  double t_min = 0.0, t_max = 0.0;
};

inline Axis principal_axis(const std::vector<PixelCoord>& px) {
  Axis a;
  std::vector<Point2D> pts;
  pts.reserve(px.size());
  for (const auto& p : px) pts.push_back({static_cast<double>(p.x), static_cast<double>(p.y)});
  const auto lf = fit_line(pts);
  a.centroid = lf.centroid;
  a.dir = lf.direction;
  double across = 0.0;
  a.t_min = std::numeric_limits<double>::infinity();
  a.t_max = -a.t_min;
  for (const auto& p : pts) {
    const double t = dot(p - a.centroid, a.dir);
    a.t_min = std::min(a.t_min, t);
    a.t_max = std::max(a.t_max, t);
    const double o = cross(a.dir, p - a.centroid);
    across += o * o;
  }
  const double n = static_cast<double>(std::max<std::size_t>(pts.size(), 1));
  const double var_across = std::max(across / n, 1.0 / 12.0);
  const double len = a.t_max - a.t_min + 1.0;
  a.elongation = std::sqrt(len * len / 12.0 / var_across);
  return a;
}

inline Point2D snap_to_known(Point2D p, const Program& prog, const GeoSkeleton& skel, double radius) {
  std::optional<Point2D> best;
  double bd = radius;
  for (const auto& prim : prog.primitives)
    for (const auto& c : control_points(prim.shape))
      if (distance(c, p) <= bd) {
        bd = distance(c, p);
        best = c;
      }
  if (best) return *best;
  for (const auto& a : skel.anchors)
    if (distance(a.pos, p) <= bd) {
      bd = distance(a.pos, p);
      best = a.pos;
    }
  return best.value_or(p);
}

inline std::size_t missing_pixel_total(const DiffReport& r) {
  std::size_t n = 0;
  for (const auto& reg : r.regions) n += reg.missing_pixels.size();
  return n;
}

inline std::optional<std::size_t> index_of(const Program& p, const std::string& id) {
  for (std::size_t i = 0; i < p.primitives.size(); ++i)
    if (p.primitives[i].id == id) return i;
  return std::nullopt;
}

}  // namespace evo_detail

struct RefineOutcome {
  Program program;
  ObjectiveBreakdown score;
  std::string action = "none";
  std::size_t probes = 0;
};

namespace evo_detail {

inline std::size_t hallucinated_total(const DiffReport& d) {
  std::size_t n = 0;
  for (const auto& r : d.regions)
    if (r.classification != RegionClass::StyleMismatch) n += r.hallucinated_pixels.size();
  return n;
}

// True when the median pixel of `px` lies within `radius` of some primitive's
// envelope: the band is the old position of something that moved.
inline bool runs_alongside(const std::vector<PixelCoord>& px, const Program& p, double radius) {
  if (px.empty()) return false;
  const std::size_t stride = std::max<std::size_t>(1, px.size() / 64);
  for (const auto& prim : p.primitives) {
    if (std::holds_alternative<Label>(prim.shape) || std::holds_alternative<PointMark>(prim.shape)) continue;
    std::vector<double> d;
    for (std::size_t i = 0; i < px.size(); i += stride)
      d.push_back(envelope_distance(prim, {static_cast<double>(px[i].x), static_cast<double>(px[i].y)}));
    std::nth_element(d.begin(), d.begin() + static_cast<long>(d.size() / 2), d.end());
    if (d[d.size() / 2] <= radius) return true;
  }
  return false;
}

}  // namespace evo_detail

// Deterministic corrective step driven by the attributed difference report.
inline RefineOutcome refine_deterministic(const Program& current, const ObjectiveBreakdown& current_score,
                                          const DiffReport& report, const Evaluator& eval, const GeoSkeleton& skel,
                                          const LoopConfig& cfg) {
  using namespace evo_detail;
  RefineOutcome out{current, current_score, "none", 0};
  if (report.regions.empty()) return out;
  auto score = [&](const Program& p) {
    ++out.probes;
    return eval.evaluate(p);
  };
  const Style base = current.primitives.empty() ? current.defaults : current.primitives.front().style;

  // (1) geometric completion
  for (const auto& r : report.regions) {
    if (r.classification != RegionClass::Missing || r.missing_pixels.size() < 3) continue;
    // displaced rather than absent: something nearby left ink where nothing is observed
    if (hallucinated_total(report) * 10 >= r.missing_pixels.size() * 3 &&
        runs_alongside(r.missing_pixels, current, cfg.vep.attribution_radius))
      continue;
    const auto ax = principal_axis(r.missing_pixels);
    Program cand = current;
    std::string what;
    if (ax.elongation >= cfg.completion_elongation) {
      const double inset = std::min(base.stroke_width / 2.0, (ax.t_max - ax.t_min) / 4.0);
      Point2D a = ax.centroid + ax.dir * (ax.t_min + inset);
      Point2D b = ax.centroid + ax.dir * (ax.t_max - inset);
      a = snap_to_known(a, current, skel, cfg.snap_radius + 1.0);
      b = snap_to_known(b, current, skel, cfg.snap_radius + 1.0);
      if (distance(a, b) < 1.0) continue;
      // a band continuing an existing segment lengthens it instead of adding one
      const Point2D u = (b - a) * (1.0 / distance(a, b));
      for (auto& prim : cand.primitives) {
        auto* seg = std::get_if<Segment>(&prim.shape);
        if (!seg || distance(seg->p1, seg->p2) < 1.0) continue;
        const Point2D v = (seg->p2 - seg->p1) * (1.0 / distance(seg->p1, seg->p2));
        if (std::abs(cross(u, v)) > std::sin(10.0 * kPi / 180.0)) continue;
        for (Point2D* end : {&seg->p1, &seg->p2})
          for (auto [near, far] : {std::pair{a, b}, std::pair{b, a}})
            if (what.empty() && distance(*end, near) <= cfg.snap_radius + base.stroke_width &&
                distance(*end == seg->p1 ? seg->p2 : seg->p1, far) > distance(*end == seg->p1 ? seg->p2 : seg->p1, *end)) {
              *end = far;
              what = "completion:extend:" + prim.id;
            }
        if (!what.empty()) break;
      }
      if (what.empty()) {
        const std::string id = fresh_id(current, "s");
        cand.primitives.push_back({id, Segment{a, b}, base});
        what = "completion:" + id;
      }
    } else {
      std::vector<Point2D> pts;
      for (const auto& p : r.missing_pixels) pts.push_back({static_cast<double>(p.x), static_cast<double>(p.y)});
      const auto cf = fit_circle(pts);
      if (!cf.ok || cf.radius < 5.0 || cf.max_deviation > base.stroke_width / 2.0 + 1.5) continue;
      const std::string id = fresh_id(current, "c");
      cand.primitives.push_back({id, Circle{cf.center, cf.radius}, base});
      what = "completion:" + id;
    }
    if (!validate_consistency(cand).empty()) continue;
    const auto s = score(cand);
    if (s.q < out.score.q) {
      out.program = std::move(cand);
      out.score = s;
      out.action = what;
      return out;
    }
  }

  // (2) redundancy pruning
  std::set<PixelCoord> hallucinated;
  for (const auto& r : report.regions)
    if (r.classification == RegionClass::Hallucination)
      hallucinated.insert(r.hallucinated_pixels.begin(), r.hallucinated_pixels.end());
  std::set<std::string> tried;
  for (const auto& r : report.regions) {
    if (r.classification != RegionClass::Hallucination || !r.nearest_primitive_id) continue;
    const auto& id = *r.nearest_primitive_id;
    if (!tried.insert(id).second) continue;
    const auto idx = index_of(current, id);
    if (!idx) continue;
    const auto px = primitive_pixels(current.primitives[*idx], current.width, current.height);
    if (px.empty()) continue;
    std::size_t covered = 0;
    for (const auto& p : px) covered += hallucinated.count(p);
    if (static_cast<double>(covered) / static_cast<double>(px.size()) < cfg.pruning_coverage) continue;
    Program cand = current;
    cand.primitives.erase(cand.primitives.begin() + static_cast<long>(*idx));
    Raster rec;
    const auto s = eval.evaluate(cand, &rec);
    ++out.probes;
    const auto after = project_errors(rec, eval.observation(), s.metrics, cfg.vep);
    if (missing_pixel_total(after) > missing_pixel_total(report)) continue;  // would uncover observed ink
    if (s.q > out.score.q) continue;
    out.program = std::move(cand);
    out.score = s;
    out.action = "pruning:" + id;
    return out;
  }

  // (3) coordinate fine-tuning: drifted primitives, or whatever the remaining
  // regions point at when nothing drifted
  std::set<std::size_t> targets;
  std::vector<Point2D> focus;
  for (const auto& r : report.regions)
    if (r.classification == RegionClass::Drift && r.nearest_primitive_id)
      if (auto i = index_of(current, *r.nearest_primitive_id)) {
        targets.insert(*i);
        focus.push_back(r.centroid);
      }
  if (targets.empty())
    for (const auto& r : report.regions)
      if (r.classification != RegionClass::StyleMismatch && r.nearest_primitive_id)
        if (auto i = index_of(current, *r.nearest_primitive_id)) {
          targets.insert(*i);
          focus.push_back(r.centroid);
        }
  std::vector<std::string> actions;
  if (!targets.empty()) {
    std::vector<PixelCoord> unmatched;
    for (const auto& r : report.regions)
      if (r.classification != RegionClass::StyleMismatch) {
        unmatched.insert(unmatched.end(), r.missing_pixels.begin(), r.missing_pixels.end());
        unmatched.insert(unmatched.end(), r.hallucinated_pixels.begin(), r.hallucinated_pixels.end());
      }
    auto ft = fine_tune(out.program, out.score, targets, focus, unmatched, eval, cfg);
    out.probes += ft.probes;
    if (ft.score.q < out.score.q) {
      out.program = std::move(ft.program);
      out.score = ft.score;
      actions.push_back("finetune");
    }
  }

  // (4) style correction
  std::set<std::string> restyled;
  for (const auto& r : report.regions) {
    if (r.classification != RegionClass::StyleMismatch || !r.nearest_primitive_id) continue;
    if (!restyled.insert(*r.nearest_primitive_id).second) continue;
    const auto idx = index_of(out.program, *r.nearest_primitive_id);
    if (!idx) continue;
    std::set<double> widths;
    for (double d : {0.0, -1.0, 1.0}) widths.insert(clamp_width(std::round(r.observed_width + d)));
    for (double w : widths) {
      Program cand = out.program;
      cand.primitives[*idx].style.stroke_width = w;
      if (cand == out.program) continue;
      const auto s = score(cand);
      if (s.q < out.score.q) {
        out.program = std::move(cand);
        out.score = s;
        if (actions.empty() || actions.back() != "style") actions.push_back("style");
      }
    }
  }
  if (!actions.empty()) {
    out.action.clear();
    for (const auto& a : actions) out.action += (out.action.empty() ? "" : "+") + a;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Loop

namespace evo_detail {

inline bool acceptable(const Program& p, const Raster& obs) {
  return p.width == obs.width() && p.height == obs.height() && validate_consistency(p).empty();
}

}  // namespace evo_detail

struct LoopHooks {
  ProgramAgent* agent = nullptr;
  // called after every evaluated iterate with its rendering
  std::function<void(const LoopState&, const Raster&)> on_iteration;
  // replaces initial synthesis when set
  std::optional<Program> seed;
};

namespace evo_detail {

// Runs an agent call; transport-level failures switch the agent off for the
// rest of the run, reply-level failures only skip this call.
template <typename F>
std::optional<Program> try_agent(F&& call, std::string& error, bool& down) {
  try {
    return call();
  } catch (const AgentError& e) {
    error = e.what();
    down = true;
  } catch (const Error& e) {
    error = e.what();
  }
  return std::nullopt;
}

}  // namespace evo_detail

// One correction C^(t) -> C^(t+1) for an attributed state.
inline Program refine_step(const LoopState& state, const Raster& obs, const GeoSkeleton& skel,
                           const LoopConfig& cfg = {}, ProgramAgent* agent = nullptr) {
  const Evaluator eval(obs, skel, cfg.objective);
  const auto score = eval.evaluate(state.program);
  if (agent && cfg.refiner_mode != RefinerMode::Deterministic) {
    std::string err;
    bool down = false;
    auto cand = evo_detail::try_agent([&] { return agent->refine(state.program, state.report, skel, obs); }, err, down);
    if (cand && evo_detail::acceptable(*cand, obs) &&
        (cfg.refiner_mode == RefinerMode::Agent || eval.evaluate(*cand).q < score.q))
      return *cand;
  }
  return refine_deterministic(state.program, score, state.report, eval, skel, cfg).program;
}

// Generate -> execute -> inspect -> correct until HD <= epsilon, the iteration
// limit, or a stall. Returns the best program by q.
inline std::pair<Program, LoopState> run_loop(const Raster& obs, const std::optional<std::string>& text,
                                              const GeoSkeleton& skel, const LoopConfig& cfg = {},
                                              const LoopHooks& hooks = {}) {
  if (!cfg.valid()) throw Error("evolution", "invalid loop configuration");
  const Evaluator eval(obs, skel, cfg.objective);
  LoopState st;
  ProgramAgent* agent = cfg.refiner_mode != RefinerMode::Deterministic ? hooks.agent : nullptr;
  std::string agent_error;
  bool agent_down = false;

  std::string action;
  if (hooks.seed) {
    if (!evo_detail::acceptable(*hooks.seed, obs)) throw Error("evolution", "seed program is invalid for this observation");
    st.program = *hooks.seed;
    action = "seed";
  } else {
    st.program = synthesize_initial(skel, obs, eval, cfg, &st.probes);
    action = "synthesize";
    if (agent) {
      auto gen = evo_detail::try_agent([&] { return agent->generate(skel, text, obs); }, agent_error, agent_down);
      if (gen && evo_detail::acceptable(*gen, obs) &&
          (cfg.refiner_mode == RefinerMode::Agent || eval.evaluate(*gen).q < eval.evaluate(st.program).q)) {
        st.program = std::move(*gen);
        action = "synthesize:agent";
      }
    }
  }

  double prev_q = std::numeric_limits<double>::infinity();
  int stalled = 0;
  for (int t = 0;; ++t) {
    st.iteration = t;
    Raster rec;
    const auto score = eval.evaluate(st.program, &rec);
    st.metrics = score.metrics;
    st.metrics.ssim = ssim(rec, obs);
    st.history.push_back({t, st.metrics.cd, st.metrics.hd, score.q, action, agent_error});
    agent_error.clear();
    if (t == 0 || score.q < st.best_q) {
      st.best_q = score.q;
      st.best_program = st.program;
      st.best_metrics = st.metrics;
    }
    st.report = attribute_regions(project_errors(rec, obs, st.metrics, cfg.vep, t), st.program, cfg.vep);
    if (hooks.on_iteration) hooks.on_iteration(st, rec);

    if (st.metrics.hd <= cfg.epsilon_hd) {
      st.stop_reason = "converged";
      break;
    }
    if (t >= cfg.max_iterations) {
      st.stop_reason = "max_iterations";
      break;
    }
    if (t > 0) {
      stalled = (prev_q - score.q < cfg.stall_threshold) ? stalled + 1 : 0;
      if (stalled >= 2) {
        st.stop_reason = "stalled";
        break;
      }
    }
    prev_q = score.q;

    std::optional<Program> next;
    if (agent && !agent_down) {
      auto cand = evo_detail::try_agent([&] { return agent->refine(st.program, st.report, skel, obs); }, agent_error,
                                        agent_down);
      if (cand && evo_detail::acceptable(*cand, obs)) {
        const auto s = eval.evaluate(*cand);
        ++st.probes;
        if (cfg.refiner_mode == RefinerMode::Agent || s.q < score.q) {
          next = std::move(*cand);
          action = "agent";
        }
      } else if (cand) {
        agent_error = "agent reply failed validation";
      }
    }
    if (!next) {
      auto r = refine_deterministic(st.program, score, st.report, eval, skel, cfg);
      st.probes += r.probes;
      next = std::move(r.program);
      action = r.action;
    }
    st.program = std::move(*next);
  }
  return {st.best_program, st};
}

inline nlohmann::json to_json(const HistoryEntry& h) {
  nlohmann::json j{{"t", h.t}, {"cd", h.cd}, {"hd", h.hd}, {"q", h.q}, {"action", h.action}};
  if (!h.agent_error.empty()) j["agent_error"] = h.agent_error;
  return j;
}

}  // namespace geo
