#pragma once

// Geometric skeleton: verified anchors, fitted segment/circle hypotheses and
// the relations mined between them.

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>
#include <numeric>
#include <optional>
#include <set>
#include <string>
#include <tuple>
#include <vector>

#include "json.hpp"

#include "geo/anchoring.hpp"
#include "geo/edge_map.hpp"
#include "geo/error.hpp"
#include "geo/geometry.hpp"
#include "geo/raster.hpp"

namespace geo {

enum class RelationKind { Parallel, Perpendicular, Midpoint, Incidence, Collinear, Tangent, EqualLength };

inline const char* to_string(RelationKind k) {
  switch (k) {
    case RelationKind::Parallel: return "parallel";
    case RelationKind::Perpendicular: return "perpendicular";
    case RelationKind::Midpoint: return "midpoint";
    case RelationKind::Incidence: return "incidence";
    case RelationKind::Collinear: return "collinear";
    case RelationKind::Tangent: return "tangent";
    default: return "equal_length";
  }
}

inline std::optional<RelationKind> relation_kind_from_string(std::string_view s) {
  for (auto k : {RelationKind::Parallel, RelationKind::Perpendicular, RelationKind::Midpoint,
                 RelationKind::Incidence, RelationKind::Collinear, RelationKind::Tangent,
                 RelationKind::EqualLength})
    if (s == to_string(k)) return k;
  return std::nullopt;
}

// residual units: degrees for Parallel/Perpendicular, pixels for Midpoint,
// Incidence, Collinear and Tangent, relative difference for EqualLength.
struct Relation {
  RelationKind kind = RelationKind::Parallel;
  std::vector<std::string> operands;
  double residual = 0.0;
  double tolerance = 0.0;

  friend bool operator==(const Relation&, const Relation&) = default;
};

struct SegmentHypothesis {
  std::string id;
  Point2D p1, p2;
  int inliers = 0;
  double residual = 0.0;  // max point-to-line deviation, px

  double length() const { return distance(p1, p2); }
  friend bool operator==(const SegmentHypothesis&, const SegmentHypothesis&) = default;
};

struct CircleHypothesis {
  std::string id;
  Point2D center;
  double radius = 0.0;
  int inliers = 0;
  double residual = 0.0;  // max radial deviation, px
  bool full = true;       // false: only [start_deg, end_deg] observed
  double start_deg = 0.0;
  double end_deg = 0.0;

  friend bool operator==(const CircleHypothesis&, const CircleHypothesis&) = default;
};

struct GeoSkeleton {
  static constexpr int kSchemaVersion = 1;

  std::vector<Anchor> anchors;  // P*; anchor i has id "p<i>"
  std::vector<SegmentHypothesis> segments;
  std::vector<CircleHypothesis> circles;
  std::vector<Relation> relations;  // R*
  std::optional<std::string> source_text;

  bool empty() const { return anchors.empty() && segments.empty() && circles.empty(); }

  friend bool operator==(const GeoSkeleton&, const GeoSkeleton&) = default;
};

inline std::string anchor_id(std::size_t i) { return "p" + std::to_string(i); }

struct SkeletonConfig {
  AnchorConfig anchors;
  double on_stroke_radius = 2.0;   // verification: edge pixel within this distance
  double merge_radius = 4.0;       // verification: cluster merge radius
  double line_tolerance = 1.5;     // max deviation for a line hypothesis, px
  double circle_tolerance = 1.5;   // max radial deviation for a circle hypothesis, px
  int fit_trim = 3;                // path points ignored at each end when checking deviation
  int contract_length = 12;        // junction-to-junction branches shorter than this collapse
  double merge_angle_deg = 3.0;    // collinear merge threshold
  double vertex_refine_radius = 8.0;
  double min_segment_length = 4.0;
  // relation tolerances
  double angle_tolerance_deg = 2.0;
  double point_tolerance_px = 3.0;
  double collinear_tolerance_px = 1.5;
  double tangent_tolerance_px = 3.0;
  double equal_length_tolerance = 0.02;
};

// Optional semantic channel (agent-backed) for anchor verification and
// relation extraction from text. Implementations live in agents.hpp.
class SemanticChannel {
public:
  virtual ~SemanticChannel() = default;
  // Returns a filtered/relabelled subset, or nullopt to keep the input.
  virtual std::optional<std::vector<Anchor>> verify(const std::vector<Anchor>& anchors, const Raster& img) = 0;
  virtual std::vector<Relation> extract(const GeoSkeleton& skel, const std::string& text, const Raster& img) = 0;
};

// ---------------------------------------------------------------------------
// Verification

inline bool near_edge(const EdgeMap& e, Point2D p, double radius) {
  const int r = static_cast<int>(std::ceil(radius));
  const int cx = static_cast<int>(std::lround(p.x)), cy = static_cast<int>(std::lround(p.y));
  for (int dy = -r; dy <= r; ++dy)
    for (int dx = -r; dx <= r; ++dx) {
      const int x = cx + dx, y = cy + dy;
      if (e.get(x, y) && std::hypot(x - p.x, y - p.y) <= radius + 1e-9) return true;
    }
  return false;
}

// P*: anchors with ink within on_stroke_radius, merged by single-linkage
// clustering within merge_radius (centroid position, strongest kind, max score).
inline std::vector<Anchor> verify_anchors(const std::vector<Anchor>& raw, const EdgeMap& e,
                                          const SkeletonConfig& cfg = {}) {
  std::vector<Anchor> on;
  for (const auto& a : raw)
    if (near_edge(e, a.pos, cfg.on_stroke_radius)) on.push_back(a);

  std::vector<int> label(on.size(), -1);
  std::vector<Anchor> out;
  for (std::size_t i = 0; i < on.size(); ++i) {
    if (label[i] >= 0) continue;
    std::vector<std::size_t> members{i}, stack{i};
    label[i] = 1;
    while (!stack.empty()) {
      const auto a = stack.back();
      stack.pop_back();
      for (std::size_t j = 0; j < on.size(); ++j)
        if (label[j] < 0 && distance(on[a].pos, on[j].pos) <= cfg.merge_radius) {
          label[j] = 1;
          members.push_back(j);
          stack.push_back(j);
        }
    }
    Anchor m = on[i];
    Point2D sum{0, 0};
    bool any_operator = false;
    for (auto k : members) {
      sum = sum + on[k].pos;
      m.score = std::max(m.score, on[k].score);
      if (kind_priority(on[k].kind) > kind_priority(m.kind)) m.kind = on[k].kind;
      any_operator = any_operator || on[k].source == AnchorSource::GradientOperator;
    }
    m.pos = sum * (1.0 / static_cast<double>(members.size()));
    m.source = any_operator ? AnchorSource::GradientOperator : AnchorSource::AgentProposal;
    out.push_back(m);
  }
  sort_anchors(out);
  return out;
}

inline std::vector<Anchor> verify_anchors(const std::vector<Anchor>& raw, const Raster& img,
                                          const SkeletonConfig& cfg = {}) {
  return verify_anchors(raw, extract_edge_map(img, cfg.anchors.edge_threshold), cfg);
}

// ---------------------------------------------------------------------------
// Primitive fitting

struct PrimitiveHypotheses {
  std::vector<SegmentHypothesis> segments;
  std::vector<CircleHypothesis> circles;
};

namespace fit_detail {

struct Node {
  Point2D pos;
  bool junction = false;
};

struct Path {
  std::vector<Point2D> pts;
  int a = -1, b = -1;  // node ids at the ends, -1 for a closed loop
};

struct Graph {
  std::vector<Node> nodes;
  std::vector<Path> paths;
  std::vector<Path> loops;
};

inline Graph trace(const EdgeMap& skel) {
  using anchor_detail::kRingDx;
  using anchor_detail::kRingDy;
  const int w = skel.width(), h = skel.height();
  auto id = [w](int x, int y) { return static_cast<std::size_t>(y) * w + x; };
  auto deg = [&](int x, int y) { return anchor_detail::neighbours(anchor_detail::ring(skel, x, y)); };

  Graph g;
  std::vector<int> node_of(skel.mask().size(), -1);
  // node clusters: 8-connected groups of pixels with degree != 2
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      if (!skel.at(x, y) || node_of[id(x, y)] >= 0 || deg(x, y) == 2) continue;
      const int nid = static_cast<int>(g.nodes.size());
      std::vector<PixelCoord> stack{{x, y}}, members;
      node_of[id(x, y)] = nid;
      while (!stack.empty()) {
        auto p = stack.back();
        stack.pop_back();
        members.push_back(p);
        for (int i = 0; i < 8; ++i) {
          const int nx = p.x + kRingDx[i], ny = p.y + kRingDy[i];
          if (skel.get(nx, ny) && node_of[id(nx, ny)] < 0 && deg(nx, ny) != 2) {
            node_of[id(nx, ny)] = nid;
            stack.push_back({nx, ny});
          }
        }
      }
      Point2D c{0, 0};
      int max_deg = 0;
      for (auto& m : members) {
        c = c + Point2D{static_cast<double>(m.x), static_cast<double>(m.y)};
        max_deg = std::max(max_deg, deg(m.x, m.y));
      }
      g.nodes.push_back({c * (1.0 / members.size()), max_deg >= 3 || members.size() > 1});
    }

  std::vector<std::uint8_t> used(skel.mask().size(), 0);
  auto walk = [&](PixelCoord prev, PixelCoord cur, std::vector<Point2D>& pts) -> int {
    while (true) {
      if (node_of[id(cur.x, cur.y)] >= 0) return node_of[id(cur.x, cur.y)];
      used[id(cur.x, cur.y)] = 1;
      pts.push_back({static_cast<double>(cur.x), static_cast<double>(cur.y)});
      PixelCoord next{-1, -1};
      // prefer a node neighbour, then an unused path pixel
      for (int pass = 0; pass < 2 && next.x < 0; ++pass)
        for (int i = 0; i < 8; ++i) {
          const int nx = cur.x + kRingDx[i], ny = cur.y + kRingDy[i];
          if (!skel.get(nx, ny) || (nx == prev.x && ny == prev.y)) continue;
          const bool is_node = node_of[id(nx, ny)] >= 0;
          if (pass == 0 && is_node && pts.size() > 1) {
            next = {nx, ny};
            break;
          }
          if (pass == 1 && !is_node && !used[id(nx, ny)]) {
            next = {nx, ny};
            break;
          }
        }
      if (next.x < 0) {
        // dead end or back at a node next to the start
        for (int i = 0; i < 8; ++i) {
          const int nx = cur.x + kRingDx[i], ny = cur.y + kRingDy[i];
          if (skel.get(nx, ny) && node_of[id(nx, ny)] >= 0 && !(nx == prev.x && ny == prev.y))
            return node_of[id(nx, ny)];
        }
        return -1;
      }
      prev = cur;
      cur = next;
    }
  };

  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      const int nid = skel.at(x, y) ? node_of[id(x, y)] : -1;
      if (nid < 0) continue;
      for (int i = 0; i < 8; ++i) {
        const int nx = x + kRingDx[i], ny = y + kRingDy[i];
        if (!skel.get(nx, ny) || node_of[id(nx, ny)] >= 0 || used[id(nx, ny)]) continue;
        Path p;
        p.a = nid;
        p.b = walk({x, y}, {nx, ny}, p.pts);
        if (p.b < 0) p.b = nid;
        if (!p.pts.empty()) g.paths.push_back(std::move(p));
      }
    }

  // what remains are closed loops of degree-2 pixels
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      if (!skel.at(x, y) || used[id(x, y)] || node_of[id(x, y)] >= 0) continue;
      Path loop;
      PixelCoord prev{-1, -1}, cur{x, y};
      while (true) {
        used[id(cur.x, cur.y)] = 1;
        loop.pts.push_back({static_cast<double>(cur.x), static_cast<double>(cur.y)});
        PixelCoord next{-1, -1};
        for (int i = 0; i < 8; ++i) {
          const int nx = cur.x + kRingDx[i], ny = cur.y + kRingDy[i];
          if (skel.get(nx, ny) && !used[id(nx, ny)] && !(nx == prev.x && ny == prev.y)) {
            next = {nx, ny};
            break;
          }
        }
        if (next.x < 0) break;
        prev = cur;
        cur = next;
      }
      if (loop.pts.size() >= 8) g.loops.push_back(std::move(loop));
    }
  return g;
}

// Collapses short junction-to-junction paths (thinning splits one crossing
// into several nearby branch points).
inline void contract(Graph& g, int max_len) {
  std::vector<int> parent(g.nodes.size());
  std::iota(parent.begin(), parent.end(), 0);
  std::function<int(int)> find = [&](int i) { return parent[i] == i ? i : parent[i] = find(parent[i]); };
  std::vector<Path> keep;
  for (auto& p : g.paths) {
    if (p.a != p.b && g.nodes[p.a].junction && g.nodes[p.b].junction &&
        static_cast<int>(p.pts.size()) < max_len) {
      const int ra = find(p.a), rb = find(p.b);
      if (ra != rb) {
        g.nodes[ra].pos = (g.nodes[ra].pos + g.nodes[rb].pos) * 0.5;
        parent[rb] = ra;
      }
      continue;
    }
    keep.push_back(std::move(p));
  }
  for (auto& p : keep) {
    p.a = find(p.a);
    p.b = find(p.b);
  }
  // drop tiny self loops created by contraction
  keep.erase(std::remove_if(keep.begin(), keep.end(),
                            [&](const Path& p) { return p.a == p.b && static_cast<int>(p.pts.size()) < max_len; }),
             keep.end());
  g.paths = std::move(keep);
}

struct SegWork {
  std::vector<Point2D> pts;
  int end_node[2] = {-1, -1};
  Point2D end[2];
  std::vector<int> through;
  LineFit fit;
  bool alive = true;
};

struct ArcWork {
  std::vector<Point2D> pts;
  CircleFit fit;
  bool alive = true;
};

struct Fitter {
  const SkeletonConfig& cfg;
  Graph& g;
  std::vector<SegWork> segs;
  std::vector<ArcWork> arcs;

  std::size_t trim_for(std::size_t n) const {
    return std::min<std::size_t>(static_cast<std::size_t>(cfg.fit_trim), n / 6);
  }

  int add_split_node(Point2D p) {
    g.nodes.push_back({p, false});
    return static_cast<int>(g.nodes.size()) - 1;
  }

  void add_segment(const std::vector<Point2D>& pts, int a, int b) {
    SegWork s;
    s.pts = pts;
    s.end_node[0] = a;
    s.end_node[1] = b;
    s.fit = fit_line(pts, trim_for(pts.size()));
    s.end[0] = s.fit.project(pts.front());
    s.end[1] = s.fit.project(pts.back());
    segs.push_back(std::move(s));
  }

  bool try_arc(const std::vector<Point2D>& pts, bool closed) {
    if (pts.size() < 15) return false;
    auto cf = fit_circle(pts, closed ? 0 : trim_for(pts.size()));
    if (!cf.ok || cf.max_deviation > cfg.circle_tolerance || cf.radius < 4.0 || cf.radius > 5000.0)
      return false;
    arcs.push_back({pts, cf, true});
    return true;
  }

  // Recursive split at the point farthest from the chord.
  void fit_open(const std::vector<Point2D>& pts, int a, int b, int depth = 0) {
    if (pts.size() < 2) return;
    const auto lf = fit_line(pts, trim_for(pts.size()));
    if (lf.max_deviation <= cfg.line_tolerance || pts.size() < 6 || depth > 40) {
      add_segment(pts, a, b);
      return;
    }
    // a genuine arc bulges well beyond the line tolerance
    double sag = 0;
    std::size_t k = 0;
    for (std::size_t i = 0; i < pts.size(); ++i) {
      const double d = point_line_distance(pts[i], pts.front(), pts.back());
      if (d > sag) {
        sag = d;
        k = i;
      }
    }
    if (try_arc(pts, false)) return;
    if (k == 0 || k + 1 >= pts.size()) k = pts.size() / 2;
    const int mid = add_split_node(pts[k]);
    std::vector<Point2D> left(pts.begin(), pts.begin() + static_cast<long>(k) + 1);
    std::vector<Point2D> right(pts.begin() + static_cast<long>(k), pts.end());
    fit_open(left, a, mid, depth + 1);
    fit_open(right, mid, b, depth + 1);
  }

  void fit_loop(const std::vector<Point2D>& pts) {
    if (try_arc(pts, true)) return;
    // split at the point farthest from the centroid, then at its antipode
    Point2D c{0, 0};
    for (const auto& p : pts) c = c + p;
    c = c * (1.0 / pts.size());
    std::size_t i0 = 0;
    for (std::size_t i = 0; i < pts.size(); ++i)
      if (distance(pts[i], c) > distance(pts[i0], c)) i0 = i;
    std::vector<Point2D> rot(pts.begin() + static_cast<long>(i0), pts.end());
    rot.insert(rot.end(), pts.begin(), pts.begin() + static_cast<long>(i0));
    std::size_t i1 = 0;
    for (std::size_t i = 0; i < rot.size(); ++i)
      if (distance(rot[i], rot[0]) > distance(rot[i1], rot[0])) i1 = i;
    if (i1 == 0) return;
    const int n0 = add_split_node(rot[0]);
    const int n1 = add_split_node(rot[i1]);
    std::vector<Point2D> first(rot.begin(), rot.begin() + static_cast<long>(i1) + 1);
    std::vector<Point2D> second(rot.begin() + static_cast<long>(i1), rot.end());
    second.push_back(rot[0]);
    fit_open(first, n0, n1);
    fit_open(second, n1, n0);
  }

  // Greedily merges collinear segments that meet at a shared node.
  void merge_collinear() {
    while (true) {
      double best_angle = cfg.merge_angle_deg;
      int bi = -1, bj = -1, bki = 0, bkj = 0;
      for (std::size_t i = 0; i < segs.size(); ++i) {
        if (!segs[i].alive) continue;
        for (std::size_t j = i + 1; j < segs.size(); ++j) {
          if (!segs[j].alive) continue;
          for (int ki = 0; ki < 2; ++ki)
            for (int kj = 0; kj < 2; ++kj) {
              if (segs[i].end_node[ki] < 0 || segs[i].end_node[ki] != segs[j].end_node[kj]) continue;
              // the two pieces must leave the node in opposite directions
              const Point2D node = g.nodes[segs[i].end_node[ki]].pos;
              const Point2D di = segs[i].end[1 - ki] - node, dj = segs[j].end[1 - kj] - node;
              if (dot(di, dj) >= 0) continue;
              const double ang = undirected_angle_diff(
                  line_angle_deg({0, 0}, segs[i].fit.direction), line_angle_deg({0, 0}, segs[j].fit.direction));
              if (ang > best_angle) continue;
              std::vector<Point2D> u = segs[i].pts;
              u.insert(u.end(), segs[j].pts.begin(), segs[j].pts.end());
              if (fit_line(u).max_deviation > cfg.line_tolerance + 0.5) continue;
              best_angle = ang;
              bi = static_cast<int>(i);
              bj = static_cast<int>(j);
              bki = ki;
              bkj = kj;
            }
        }
      }
      if (bi < 0) return;
      SegWork& a = segs[bi];
      SegWork& b = segs[bj];
      const int shared = a.end_node[bki];
      std::vector<Point2D> pts;
      // order: a's far end ... shared ... b's far end
      if (bki == 1) pts = a.pts;
      else pts.assign(a.pts.rbegin(), a.pts.rend());
      if (bkj == 0) pts.insert(pts.end(), b.pts.begin(), b.pts.end());
      else pts.insert(pts.end(), b.pts.rbegin(), b.pts.rend());
      SegWork m;
      m.pts = std::move(pts);
      m.end_node[0] = a.end_node[1 - bki];
      m.end_node[1] = b.end_node[1 - bkj];
      m.through = a.through;
      m.through.insert(m.through.end(), b.through.begin(), b.through.end());
      m.through.push_back(shared);
      m.fit = fit_line(m.pts, trim_for(m.pts.size()));
      m.end[0] = m.fit.project(m.pts.front());
      m.end[1] = m.fit.project(m.pts.back());
      a.alive = b.alive = false;
      segs.push_back(std::move(m));
    }
  }

  // Endpoints meeting other lines at a node are moved to the line intersection.
  void refine_vertices() {
    for (std::size_t i = 0; i < segs.size(); ++i) {
      if (!segs[i].alive) continue;
      for (int k = 0; k < 2; ++k) {
        const int node = segs[i].end_node[k];
        if (node < 0) continue;
        const Point2D cur = segs[i].end[k];
        std::optional<Point2D> best;
        for (std::size_t j = 0; j < segs.size(); ++j) {
          if (j == i || !segs[j].alive) continue;
          const bool touches = segs[j].end_node[0] == node || segs[j].end_node[1] == node ||
                               std::find(segs[j].through.begin(), segs[j].through.end(), node) !=
                                   segs[j].through.end();
          if (!touches) continue;
          const double ang = undirected_angle_diff(line_angle_deg({0, 0}, segs[i].fit.direction),
                                                   line_angle_deg({0, 0}, segs[j].fit.direction));
          if (ang < 10.0) continue;
          const auto& fi = segs[i].fit;
          const auto& fj = segs[j].fit;
          auto x = line_intersection(fi.centroid, fi.centroid + fi.direction, fj.centroid, fj.centroid + fj.direction);
          if (!x || distance(*x, cur) > cfg.vertex_refine_radius) continue;
          if (!best || distance(*x, cur) < distance(*best, cur)) best = x;
        }
        if (best) segs[i].end[k] = *best;
      }
    }
  }

  // Arcs lying on a common circle are merged.
  void merge_arcs() {
    for (std::size_t i = 0; i < arcs.size(); ++i) {
      if (!arcs[i].alive) continue;
      for (std::size_t j = i + 1; j < arcs.size(); ++j) {
        if (!arcs[j].alive) continue;
        if (distance(arcs[i].fit.center, arcs[j].fit.center) > 3.0 ||
            std::abs(arcs[i].fit.radius - arcs[j].fit.radius) > 3.0)
          continue;
        std::vector<Point2D> u = arcs[i].pts;
        u.insert(u.end(), arcs[j].pts.begin(), arcs[j].pts.end());
        auto cf = fit_circle(u);
        if (!cf.ok || cf.max_deviation > cfg.circle_tolerance + 0.5) continue;
        arcs[i].pts = std::move(u);
        arcs[i].fit = cf;
        arcs[j].alive = false;
        j = i;  // rescan
      }
    }
  }
};

// Observed angular coverage of points around c: (full, start, end).
inline std::tuple<bool, double, double> coverage(const std::vector<Point2D>& pts, Point2D c, double radius) {
  constexpr int kBins = 360;
  std::vector<bool> hit(kBins, false);
  for (const auto& p : pts) hit[static_cast<int>(screen_angle_deg(c, p)) % kBins] = true;
  // largest empty gap
  int best_len = 0, best_start = 0;
  for (int s = 0; s < kBins; ++s) {
    if (hit[s]) continue;
    if (hit[(s + kBins - 1) % kBins] == false && s != 0) continue;
    int len = 0;
    while (len < kBins && !hit[(s + len) % kBins]) ++len;
    if (len > best_len) {
      best_len = len;
      best_start = s;
    }
  }
  // allow gaps caused by pixel sampling on small circles
  const int tolerated = std::max(6, static_cast<int>(std::ceil(360.0 / (2 * kPi * std::max(radius, 1.0)) * 3)));
  if (best_len <= tolerated) return {true, 0.0, 0.0};
  const double start = normalize_degrees(best_start + best_len);
  const double end = normalize_degrees(best_start);
  return {false, start, end};
}

}  // namespace fit_detail

// Splits the skeletonized strokes at junctions and fits each branch with a
// total-least-squares line or, failing that, an algebraic circle; branches
// fitting neither are split recursively.
inline PrimitiveHypotheses fit_primitives(const EdgeMap& e, const std::vector<Anchor>& anchors,
                                          const SkeletonConfig& cfg = {}) {
  (void)anchors;
  using namespace fit_detail;
  PrimitiveHypotheses out;
  const EdgeMap skel = skeletonize(e, cfg.anchors);
  Graph g = trace(skel);
  contract(g, cfg.contract_length);

  Fitter f{cfg, g, {}, {}};
  for (const auto& p : g.paths) {
    // include the node centres so pieces reach the junction
    std::vector<Point2D> pts;
    pts.push_back(g.nodes[p.a].pos);
    pts.insert(pts.end(), p.pts.begin(), p.pts.end());
    pts.push_back(g.nodes[p.b].pos);
    if (p.a == p.b && pts.size() >= 8) {
      // closed loop through one node
      pts.pop_back();
      if (!f.try_arc(pts, true)) {
        std::size_t far = 0;
        for (std::size_t i = 0; i < pts.size(); ++i)
          if (distance(pts[i], pts[0]) > distance(pts[far], pts[0])) far = i;
        const int mid = f.add_split_node(pts[far]);
        std::vector<Point2D> first(pts.begin(), pts.begin() + static_cast<long>(far) + 1);
        std::vector<Point2D> second(pts.begin() + static_cast<long>(far), pts.end());
        second.push_back(pts[0]);
        f.fit_open(first, p.a, mid);
        f.fit_open(second, mid, p.a);
      }
      continue;
    }
    f.fit_open(pts, p.a, p.b);
  }
  for (const auto& loop : g.loops) f.fit_loop(loop.pts);

  f.merge_collinear();
  f.refine_vertices();
  f.merge_arcs();

  std::vector<SegmentHypothesis> segs;
  for (const auto& s : f.segs) {
    if (!s.alive) continue;
    SegmentHypothesis h;
    h.p1 = s.end[0];
    h.p2 = s.end[1];
    h.inliers = static_cast<int>(s.pts.size());
    h.residual = s.fit.max_deviation;
    if (h.length() < cfg.min_segment_length) continue;
    segs.push_back(h);
  }
  // canonical endpoint order and id assignment
  for (auto& s : segs)
    if (s.p2.y < s.p1.y || (s.p2.y == s.p1.y && s.p2.x < s.p1.x)) std::swap(s.p1, s.p2);
  std::stable_sort(segs.begin(), segs.end(), [](const SegmentHypothesis& a, const SegmentHypothesis& b) {
    if (a.p1.y != b.p1.y) return a.p1.y < b.p1.y;
    if (a.p1.x != b.p1.x) return a.p1.x < b.p1.x;
    return a.p2.y != b.p2.y ? a.p2.y < b.p2.y : a.p2.x < b.p2.x;
  });
  for (std::size_t i = 0; i < segs.size(); ++i) segs[i].id = "s" + std::to_string(i);
  // overlapping hypotheses: keep more inliers, then smaller residual, then id
  std::vector<bool> drop(segs.size(), false);
  for (std::size_t i = 0; i < segs.size(); ++i)
    for (std::size_t j = i + 1; j < segs.size(); ++j) {
      if (drop[i] || drop[j]) continue;
      const bool same = (distance(segs[i].p1, segs[j].p1) <= 3 && distance(segs[i].p2, segs[j].p2) <= 3) ||
                        (distance(segs[i].p1, segs[j].p2) <= 3 && distance(segs[i].p2, segs[j].p1) <= 3);
      if (!same) continue;
      auto better = [&](const SegmentHypothesis& a, const SegmentHypothesis& b) {
        if (a.inliers != b.inliers) return a.inliers > b.inliers;
        if (a.residual != b.residual) return a.residual < b.residual;
        return a.id < b.id;
      };
      (better(segs[i], segs[j]) ? drop[j] : drop[i]) = true;
    }
  for (std::size_t i = 0; i < segs.size(); ++i)
    if (!drop[i]) out.segments.push_back(segs[i]);
  for (std::size_t i = 0; i < out.segments.size(); ++i) out.segments[i].id = "s" + std::to_string(i);

  for (const auto& a : f.arcs) {
    if (!a.alive) continue;
    CircleHypothesis c;
    c.center = a.fit.center;
    c.radius = a.fit.radius;
    c.inliers = static_cast<int>(a.pts.size());
    c.residual = a.fit.max_deviation;
    auto [full, start, end] = coverage(a.pts, c.center, c.radius);
    c.full = full;
    c.start_deg = start;
    c.end_deg = end;
    out.circles.push_back(c);
  }
  std::stable_sort(out.circles.begin(), out.circles.end(), [](const CircleHypothesis& a, const CircleHypothesis& b) {
    return a.center.y != b.center.y ? a.center.y < b.center.y : a.center.x < b.center.x;
  });
  for (std::size_t i = 0; i < out.circles.size(); ++i) out.circles[i].id = "c" + std::to_string(i);
  return out;
}

// ---------------------------------------------------------------------------
// Relations

// Geometry a relation is evaluated against: anchor positions plus segment
// and circle parameters, looked up by id.
struct RelationContext {
  std::map<std::string, Point2D> points;
  std::map<std::string, std::pair<Point2D, Point2D>> segments;
  std::map<std::string, std::pair<Point2D, double>> circles;

  static RelationContext from(const GeoSkeleton& s) {
    RelationContext c;
    for (std::size_t i = 0; i < s.anchors.size(); ++i) c.points[anchor_id(i)] = s.anchors[i].pos;
    for (const auto& seg : s.segments) c.segments[seg.id] = {seg.p1, seg.p2};
    for (const auto& ci : s.circles) c.circles[ci.id] = {ci.center, ci.radius};
    return c;
  }
};

// Residual of a relation under the given geometry; nullopt when an operand is
// missing or of the wrong type.
inline std::optional<double> relation_residual(const Relation& r, const RelationContext& ctx) {
  auto seg = [&](const std::string& id) -> const std::pair<Point2D, Point2D>* {
    auto it = ctx.segments.find(id);
    return it == ctx.segments.end() ? nullptr : &it->second;
  };
  auto pt = [&](const std::string& id) -> const Point2D* {
    auto it = ctx.points.find(id);
    return it == ctx.points.end() ? nullptr : &it->second;
  };
  auto circ = [&](const std::string& id) -> const std::pair<Point2D, double>* {
    auto it = ctx.circles.find(id);
    return it == ctx.circles.end() ? nullptr : &it->second;
  };
  const auto& ops = r.operands;
  switch (r.kind) {
    case RelationKind::Parallel:
    case RelationKind::Perpendicular: {
      if (ops.size() != 2) return std::nullopt;
      auto a = seg(ops[0]), b = seg(ops[1]);
      if (!a || !b) return std::nullopt;
      const double d = undirected_angle_diff(line_angle_deg(a->first, a->second), line_angle_deg(b->first, b->second));
      return r.kind == RelationKind::Parallel ? d : std::abs(90.0 - d);
    }
    case RelationKind::EqualLength: {
      if (ops.size() != 2) return std::nullopt;
      auto a = seg(ops[0]), b = seg(ops[1]);
      if (!a || !b) return std::nullopt;
      const double la = distance(a->first, a->second), lb = distance(b->first, b->second);
      const double m = std::max(la, lb);
      return m == 0 ? 0.0 : std::abs(la - lb) / m;
    }
    case RelationKind::Midpoint: {
      if (ops.size() != 2) return std::nullopt;
      auto p = pt(ops[0]);
      auto s = seg(ops[1]);
      if (!p || !s) return std::nullopt;
      return distance(*p, (s->first + s->second) * 0.5);
    }
    case RelationKind::Incidence: {
      if (ops.size() != 2) return std::nullopt;
      auto p = pt(ops[0]);
      if (!p) return std::nullopt;
      if (auto s = seg(ops[1])) return point_segment_distance(*p, s->first, s->second);
      if (auto c = circ(ops[1])) return std::abs(distance(*p, c->first) - c->second);
      return std::nullopt;
    }
    case RelationKind::Collinear: {
      if (ops.size() < 3) return std::nullopt;
      std::vector<Point2D> ps;
      for (const auto& o : ops) {
        auto p = pt(o);
        if (!p) return std::nullopt;
        ps.push_back(*p);
      }
      return fit_line(ps).max_deviation;
    }
    case RelationKind::Tangent: {
      if (ops.size() != 2) return std::nullopt;
      auto s = seg(ops[0]);
      auto c = circ(ops[1]);
      if (!s || !c) return std::nullopt;
      return std::abs(point_line_distance(c->first, s->first, s->second) - c->second);
    }
  }
  return std::nullopt;
}

inline std::optional<double> relation_residual(const Relation& r, const GeoSkeleton& s) {
  return relation_residual(r, RelationContext::from(s));
}

inline bool same_relation(const Relation& a, const Relation& b) {
  if (a.kind != b.kind) return false;
  auto x = a.operands, y = b.operands;
  const bool unordered = a.kind == RelationKind::Parallel || a.kind == RelationKind::Perpendicular ||
                         a.kind == RelationKind::EqualLength || a.kind == RelationKind::Collinear;
  if (unordered) {
    std::sort(x.begin(), x.end());
    std::sort(y.begin(), y.end());
  }
  return x == y;
}

// Exhaustive tolerance-based mining over the fitted hypotheses; relations
// from the semantic channel (when given text) are merged without duplicates.
inline std::vector<Relation> discover_relations(const GeoSkeleton& skel, const SkeletonConfig& cfg = {}) {
  std::vector<Relation> out;
  const auto ctx = RelationContext::from(skel);
  auto emit = [&](RelationKind k, std::vector<std::string> ops, double tol) {
    Relation r{k, std::move(ops), 0.0, tol};
    auto res = relation_residual(r, ctx);
    if (res && *res <= tol) {
      r.residual = *res;
      out.push_back(std::move(r));
    }
  };
  const auto& segs = skel.segments;
  for (std::size_t i = 0; i < segs.size(); ++i)
    for (std::size_t j = i + 1; j < segs.size(); ++j) {
      emit(RelationKind::Parallel, {segs[i].id, segs[j].id}, cfg.angle_tolerance_deg);
      emit(RelationKind::Perpendicular, {segs[i].id, segs[j].id}, cfg.angle_tolerance_deg);
      emit(RelationKind::EqualLength, {segs[i].id, segs[j].id}, cfg.equal_length_tolerance);
    }
  for (std::size_t a = 0; a < skel.anchors.size(); ++a) {
    const auto pid = anchor_id(a);
    for (const auto& s : segs) {
      // a segment's own endpoints are not midpoints of it
      if (distance(skel.anchors[a].pos, s.p1) > cfg.point_tolerance_px &&
          distance(skel.anchors[a].pos, s.p2) > cfg.point_tolerance_px)
        emit(RelationKind::Midpoint, {pid, s.id}, cfg.point_tolerance_px);
      emit(RelationKind::Incidence, {pid, s.id}, cfg.point_tolerance_px);
    }
    for (const auto& c : skel.circles) emit(RelationKind::Incidence, {pid, c.id}, cfg.point_tolerance_px);
  }
  // maximal collinear anchor sets, reported once via their extreme pair
  std::set<std::vector<std::string>> seen;
  const auto& an = skel.anchors;
  for (std::size_t i = 0; i < an.size(); ++i)
    for (std::size_t j = i + 1; j < an.size(); ++j) {
      if (distance(an[i].pos, an[j].pos) < 1e-9) continue;
      std::vector<std::size_t> members;
      for (std::size_t k = 0; k < an.size(); ++k)
        if (point_line_distance(an[k].pos, an[i].pos, an[j].pos) <= cfg.collinear_tolerance_px) members.push_back(k);
      if (members.size() < 3) continue;
      std::vector<std::string> ops;
      for (auto m : members) ops.push_back(anchor_id(m));
      if (!seen.insert(ops).second) continue;
      emit(RelationKind::Collinear, ops, cfg.collinear_tolerance_px);
    }
  for (const auto& s : segs)
    for (const auto& c : skel.circles) {
      const Point2D d = s.p2 - s.p1;
      const double len2 = dot(d, d);
      if (len2 == 0) continue;
      const double t = dot(c.center - s.p1, d) / len2;
      const double slack = cfg.tangent_tolerance_px / std::sqrt(len2);
      if (t < -slack || t > 1 + slack) continue;
      emit(RelationKind::Tangent, {s.id, c.id}, cfg.tangent_tolerance_px);
    }
  return out;
}

inline std::vector<Relation> merge_relations(std::vector<Relation> base, const std::vector<Relation>& extra,
                                             const GeoSkeleton& skel) {
  const auto ctx = RelationContext::from(skel);
  for (auto r : extra) {
    const bool dup = std::any_of(base.begin(), base.end(), [&](const Relation& b) { return same_relation(b, r); });
    if (dup) continue;
    auto res = relation_residual(r, ctx);
    if (!res) continue;  // operands must reference skeleton entities
    r.residual = *res;
    if (r.tolerance < r.residual) continue;
    base.push_back(std::move(r));
  }
  return base;
}

// extract -> verify -> fit -> relate.
inline GeoSkeleton build_skeleton(const Raster& img, const std::optional<std::string>& text = std::nullopt,
                                  const SkeletonConfig& cfg = {}, SemanticChannel* channel = nullptr) {
  GeoSkeleton s;
  s.source_text = text;
  const EdgeMap e = extract_edge_map(img, cfg.anchors.edge_threshold);
  const auto raw = extract_raw_anchors(e, cfg.anchors);
  s.anchors = verify_anchors(raw, e, cfg);
  if (channel) {
    if (auto v = channel->verify(s.anchors, img)) {
      // agent output may only keep anchors that pass the on-stroke test
      std::vector<Anchor> kept;
      for (const auto& a : *v)
        if (near_edge(e, a.pos, cfg.on_stroke_radius)) kept.push_back(a);
      sort_anchors(kept);
      s.anchors = std::move(kept);
    }
  }
  auto hyps = fit_primitives(e, s.anchors, cfg);
  s.segments = std::move(hyps.segments);
  s.circles = std::move(hyps.circles);
  s.relations = discover_relations(s, cfg);
  if (channel && text && !text->empty()) s.relations = merge_relations(s.relations, channel->extract(s, *text, img), s);
  return s;
}

// ---------------------------------------------------------------------------
// JSON

inline nlohmann::json to_json(const Anchor& a) {
  return {{"x", a.pos.x}, {"y", a.pos.y}, {"score", a.score}, {"kind", to_string(a.kind)}, {"source", to_string(a.source)}};
}

inline Anchor anchor_from_json(const nlohmann::json& j) {
  Anchor a;
  a.pos = {j.at("x").get<double>(), j.at("y").get<double>()};
  a.score = j.value("score", 1.0);
  const auto kind = j.value("kind", std::string("unknown"));
  a.kind = kind == "corner" ? AnchorKind::Corner
           : kind == "junction" ? AnchorKind::Junction
           : kind == "endpoint" ? AnchorKind::Endpoint
                                : AnchorKind::Unknown;
  a.source = j.value("source", std::string("gradient")) == "agent" ? AnchorSource::AgentProposal
                                                                   : AnchorSource::GradientOperator;
  return a;
}

inline nlohmann::json anchors_to_json(const std::vector<Anchor>& v) {
  auto arr = nlohmann::json::array();
  for (const auto& a : v) arr.push_back(to_json(a));
  return arr;
}

inline nlohmann::json to_json(const Relation& r) {
  return {{"kind", to_string(r.kind)}, {"operands", r.operands}, {"residual", r.residual}, {"tolerance", r.tolerance}};
}

inline Relation relation_from_json(const nlohmann::json& j) {
  Relation r;
  auto kind = relation_kind_from_string(j.at("kind").get<std::string>());
  if (!kind) throw Error("skeleton", "unknown relation kind '" + j.at("kind").get<std::string>() + "'");
  r.kind = *kind;
  r.operands = j.at("operands").get<std::vector<std::string>>();
  r.residual = j.value("residual", 0.0);
  r.tolerance = j.value("tolerance", 0.0);
  return r;
}

inline nlohmann::json to_json(const GeoSkeleton& s) {
  nlohmann::json j;
  j["schema_version"] = GeoSkeleton::kSchemaVersion;
  j["anchors"] = nlohmann::json::array();
  for (std::size_t i = 0; i < s.anchors.size(); ++i) {
    auto a = to_json(s.anchors[i]);
    a["id"] = anchor_id(i);
    j["anchors"].push_back(a);
  }
  j["segments"] = nlohmann::json::array();
  for (const auto& seg : s.segments)
    j["segments"].push_back({{"id", seg.id}, {"x1", seg.p1.x}, {"y1", seg.p1.y}, {"x2", seg.p2.x},
                             {"y2", seg.p2.y}, {"inliers", seg.inliers}, {"residual", seg.residual}});
  j["circles"] = nlohmann::json::array();
  for (const auto& c : s.circles)
    j["circles"].push_back({{"id", c.id}, {"cx", c.center.x}, {"cy", c.center.y}, {"r", c.radius},
                            {"inliers", c.inliers}, {"residual", c.residual}, {"full", c.full},
                            {"start_deg", c.start_deg}, {"end_deg", c.end_deg}});
  j["relations"] = nlohmann::json::array();
  for (const auto& r : s.relations) j["relations"].push_back(to_json(r));
  j["text"] = s.source_text ? nlohmann::json(*s.source_text) : nlohmann::json(nullptr);
  return j;
}

inline GeoSkeleton skeleton_from_json(const nlohmann::json& j) {
  if (j.value("schema_version", 0) != GeoSkeleton::kSchemaVersion)
    throw Error("skeleton", "unsupported skeleton schema_version");
  GeoSkeleton s;
  for (const auto& a : j.at("anchors")) s.anchors.push_back(anchor_from_json(a));
  for (const auto& seg : j.at("segments"))
    s.segments.push_back({seg.at("id").get<std::string>(),
                          {seg.at("x1").get<double>(), seg.at("y1").get<double>()},
                          {seg.at("x2").get<double>(), seg.at("y2").get<double>()},
                          seg.value("inliers", 0),
                          seg.value("residual", 0.0)});
  for (const auto& c : j.at("circles")) {
    CircleHypothesis h;
    h.id = c.at("id").get<std::string>();
    h.center = {c.at("cx").get<double>(), c.at("cy").get<double>()};
    h.radius = c.at("r").get<double>();
    h.inliers = c.value("inliers", 0);
    h.residual = c.value("residual", 0.0);
    h.full = c.value("full", true);
    h.start_deg = c.value("start_deg", 0.0);
    h.end_deg = c.value("end_deg", 0.0);
    s.circles.push_back(h);
  }
  for (const auto& r : j.at("relations")) s.relations.push_back(relation_from_json(r));
  if (j.contains("text") && !j["text"].is_null()) s.source_text = j["text"].get<std::string>();
  return s;
}

}  // namespace geo
