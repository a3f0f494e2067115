#include <gtest/gtest.h>

#include "support.hpp"

using namespace geo;

namespace {

std::size_t count_kind(const std::vector<Relation>& v, RelationKind k) {
  return static_cast<std::size_t>(std::count_if(v.begin(), v.end(), [&](const Relation& r) { return r.kind == k; }));
}

const Relation* find_kind(const std::vector<Relation>& v, RelationKind k) {
  for (const auto& r : v)
    if (r.kind == k) return &r;
  return nullptr;
}

SegmentHypothesis hyp(const std::string& id, Point2D a, Point2D b) { return {id, a, b, 100, 0.0}; }

Point2D polar(Point2D o, double len, double deg) {
  const double t = deg * std::acos(-1.0) / 180.0;
  return {o.x + len * std::cos(t), o.y + len * std::sin(t)};
}

class SilentChannel : public SemanticChannel {
public:
  int verify_calls = 0, extract_calls = 0;
  std::optional<std::vector<Anchor>> verify(const std::vector<Anchor>&, const Raster&) override {
    ++verify_calls;
    return std::nullopt;
  }
  std::vector<Relation> extract(const GeoSkeleton&, const std::string&, const Raster&) override {
    ++extract_calls;
    return {};
  }
};

}  // namespace

TEST(Verify, BlankRegionAnchorDropped) {
  const auto e = extract_edge_map(render(test::polygon(test::kSquare)));
  EXPECT_TRUE(verify_anchors({{{500, 500}, 1.0, AnchorKind::Corner}}, e).empty());
}

TEST(Verify, AnchorOnePixelOffStrokeKept) {
  const Raster r = render(test::program_of({test::seg("s", {100, 500}, {900, 500}, 1.0)}));
  const auto kept = verify_anchors({{{500, 501}, 0.5, AnchorKind::Unknown}}, r);
  ASSERT_EQ(kept.size(), 1u);
  EXPECT_EQ(kept[0].pos, (Point2D{500, 501}));
}

TEST(Verify, CloseAnchorsMergeAtCentroid) {
  const auto e = extract_edge_map(render(test::polygon(test::kSquare)));
  const auto kept = verify_anchors({{{300, 300}, 0.4, AnchorKind::Corner}, {{302, 300}, 0.9, AnchorKind::Corner}}, e);
  ASSERT_EQ(kept.size(), 1u);
  EXPECT_NEAR(kept[0].pos.x, 301.0, 1e-9);
  EXPECT_NEAR(kept[0].pos.y, 300.0, 1e-9);
  EXPECT_DOUBLE_EQ(kept[0].score, 0.9);
}

TEST(Verify, NeverInventsAnchors) {
  for (int i = 0; i < 8; ++i) {
    const Raster r = render(corpus_program(21, i));
    const auto raw = extract_raw_anchors(r);
    for (const auto& a : verify_anchors(raw, r)) EXPECT_LE(test::nearest(raw, a.pos), 4.0 + 1e-9);
  }
}

TEST(Fit, TriangleGivesThreeSegments) {
  const Raster r = render(test::polygon(test::kTriangle));
  const auto e = extract_edge_map(r);
  const auto h = fit_primitives(e, verify_anchors(extract_raw_anchors(e), e));
  ASSERT_EQ(h.segments.size(), 3u);
  EXPECT_TRUE(h.circles.empty());
  std::vector<Anchor> ends;
  for (const auto& s : h.segments) ends.push_back({s.p1}), ends.push_back({s.p2});
  for (const auto& v : test::kTriangle) EXPECT_LE(test::nearest(ends, v), 3.0);
  for (const auto& s : h.segments) {
    EXPECT_LE(test::nearest({{test::kTriangle[0]}, {test::kTriangle[1]}, {test::kTriangle[2]}}, s.p1), 3.0);
    EXPECT_LE(test::nearest({{test::kTriangle[0]}, {test::kTriangle[1]}, {test::kTriangle[2]}}, s.p2), 3.0);
  }
}

TEST(Fit, CircleHypothesis) {
  const auto e = extract_edge_map(render(test::program_of({test::circ("c", {500, 500}, 200)})));
  const auto h = fit_primitives(e, {});
  ASSERT_EQ(h.circles.size(), 1u);
  EXPECT_TRUE(h.segments.empty());
  EXPECT_LE(distance(h.circles[0].center, {500, 500}), 3.0);
  EXPECT_NEAR(h.circles[0].radius, 200.0, 3.0);
  EXPECT_TRUE(h.circles[0].full);
}

TEST(Fit, Blank) {
  const auto h = fit_primitives(EdgeMap(400, 400), {});
  EXPECT_TRUE(h.segments.empty());
  EXPECT_TRUE(h.circles.empty());
}

TEST(Relations, NearlyParallel) {
  GeoSkeleton s;
  s.segments = {hyp("s1", {100, 100}, {500, 100}), hyp("s2", {100, 300}, polar({100, 300}, 400, 0.5))};
  const auto rel = discover_relations(s);
  const auto* par = find_kind(rel, RelationKind::Parallel);
  ASSERT_NE(par, nullptr);
  EXPECT_NEAR(par->residual, 0.5, 1e-9);
  EXPECT_EQ(find_kind(rel, RelationKind::Perpendicular), nullptr);
}

TEST(Relations, ExactlyPerpendicular) {
  GeoSkeleton s;
  s.segments = {hyp("s1", {100, 100}, {500, 100}), hyp("s2", {700, 200}, {700, 600})};
  const auto rel = discover_relations(s);
  const auto* perp = find_kind(rel, RelationKind::Perpendicular);
  ASSERT_NE(perp, nullptr);
  EXPECT_EQ(perp->residual, 0.0);
}

TEST(Relations, ExactMidpoint) {
  GeoSkeleton s;
  s.segments = {hyp("s1", {100, 100}, {500, 300})};
  s.anchors = {{{300, 200}, 1.0, AnchorKind::Junction}};
  const auto rel = discover_relations(s);
  const auto* mid = find_kind(rel, RelationKind::Midpoint);
  ASSERT_NE(mid, nullptr);
  EXPECT_EQ(mid->residual, 0.0);
  EXPECT_EQ(mid->operands, (std::vector<std::string>{"p0", "s1"}));
}

TEST(Relations, ResidualsWithinToleranceAndOperandsExist) {
  for (int i = 0; i < 10; ++i) {
    const auto s = build_skeleton(render(corpus_program(8, i)));
    for (const auto& r : s.relations) {
      EXPECT_LE(r.residual, r.tolerance);
      const auto again = relation_residual(r, s);
      ASSERT_TRUE(again.has_value()) << to_string(r.kind);
      EXPECT_NEAR(*again, r.residual, 1e-9);
      EXPECT_LE(*again, r.tolerance);
    }
  }
}

TEST(Build, Square) {
  const auto s = build_skeleton(render(test::polygon(test::kSquare)));
  EXPECT_EQ(s.anchors.size(), 4u);
  EXPECT_EQ(s.segments.size(), 4u);
  EXPECT_GE(count_kind(s.relations, RelationKind::Parallel), 2u);
  EXPECT_GE(count_kind(s.relations, RelationKind::Perpendicular), 4u);
  for (const auto& v : test::kSquare) EXPECT_LE(test::nearest(s.anchors, v), 3.0);
}

TEST(Build, Blank) { EXPECT_TRUE(build_skeleton(Raster(1000, 1000)).empty()); }

TEST(Build, SilentAgentAddsNothing) {
  const Raster r = render(test::polygon(test::kSquare));
  const auto plain = build_skeleton(r);
  SilentChannel ch;
  auto with_text = build_skeleton(r, std::string("ABCD is a square"), {}, &ch);
  EXPECT_EQ(ch.extract_calls, 1);
  EXPECT_EQ(with_text.source_text, std::optional<std::string>("ABCD is a square"));
  with_text.source_text.reset();
  EXPECT_EQ(with_text, plain);
}

TEST(Build, DeterministicAndJsonRoundTrip) {
  const Raster r = render(corpus_program(13, 2));
  const auto a = build_skeleton(r, std::string("text"));
  EXPECT_EQ(a, build_skeleton(r, std::string("text")));
  const auto j = to_json(a);
  EXPECT_EQ(j.at("schema_version").get<int>(), GeoSkeleton::kSchemaVersion);
  for (const char* k : {"anchors", "segments", "circles", "relations", "text"}) EXPECT_TRUE(j.contains(k)) << k;
  const auto back = skeleton_from_json(nlohmann::json::parse(j.dump()));
  ASSERT_EQ(back.anchors.size(), a.anchors.size());
  ASSERT_EQ(back.segments.size(), a.segments.size());
  ASSERT_EQ(back.relations.size(), a.relations.size());
  for (std::size_t i = 0; i < a.relations.size(); ++i) {
    EXPECT_EQ(back.relations[i].kind, a.relations[i].kind);
    EXPECT_EQ(back.relations[i].operands, a.relations[i].operands);
  }
}

TEST(Build, RelationArity) {
  for (int i = 0; i < 6; ++i) {
    const auto s = build_skeleton(render(corpus_program(17, i)));
    for (const auto& r : s.relations) {
      switch (r.kind) {
        case RelationKind::Collinear: EXPECT_GE(r.operands.size(), 3u); break;
        default: EXPECT_EQ(r.operands.size(), 2u); break;
      }
    }
  }
}
