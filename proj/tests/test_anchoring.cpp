#include <gtest/gtest.h>

#include <random>

#include "support.hpp"

using namespace geo;

namespace {

EdgeMap edges_of(const Program& p) { return extract_edge_map(render(p)); }

std::vector<Anchor> of_kind(const std::vector<Anchor>& v, AnchorKind k) {
  std::vector<Anchor> out;
  for (const auto& a : v)
    if (a.kind == k) out.push_back(a);
  return out;
}

}  // namespace

TEST(EdgeMap, WhiteIsEmpty) { EXPECT_TRUE(extract_edge_map(Raster(50, 40)).empty()); }

TEST(EdgeMap, UnitSegment) {
  const auto e = edges_of(test::program_of({test::seg("s1", {0, 0}, {10, 0}, 1.0)}));
  std::set<std::pair<int, int>> want;
  for (int x = 0; x <= 10; ++x) want.insert({x, 0});
  EXPECT_EQ(test::as_set(e.points()), want);
  EXPECT_EQ(e.width(), 1000);
}

TEST(EdgeMap, ZeroThresholdSelectsNothing) {
  EXPECT_TRUE(extract_edge_map(render(corpus_program(1, 2)), 0).empty());
  EXPECT_TRUE(extract_edge_map(Raster(10, 10, {0, 0, 0}), 0).empty());
}

TEST(Corners, BlankImage) { EXPECT_TRUE(detect_corners(EdgeMap(200, 200)).empty()); }

TEST(Corners, LShapeHasOneCornerAtTheVertex) {
  const auto e = edges_of(test::program_of({test::seg("a", {200, 300}, {400, 300}), test::seg("b", {200, 300}, {200, 100})}));
  const auto corners = detect_corners(e);
  int near_vertex = 0;
  for (const auto& c : corners)
    if (distance(c.pos, {200, 300}) <= 2.0) ++near_vertex;
  EXPECT_EQ(near_vertex, 1);

  // exhaustive scan: the raw response peaks inside the angle, within the NMS
  // radius of the vertex, and never on the far side of either arm
  const auto resp = corner_response(e);
  int bx = 0, by = 0;
  float best = -1e30f;
  for (int y = 250; y <= 350; ++y)
    for (int x = 150; x <= 250; ++x)
      if (resp[static_cast<std::size_t>(y) * 1000 + x] > best) {
        best = resp[static_cast<std::size_t>(y) * 1000 + x];
        bx = x, by = y;
      }
  EXPECT_LE(distance({static_cast<double>(bx), static_cast<double>(by)}, {200, 300}), AnchorConfig{}.nms_radius);
  EXPECT_GE(bx, 199);
  EXPECT_LE(by, 301);
}

TEST(Corners, StraightSegmentInteriorHasNone) {
  const auto corners = detect_corners(edges_of(test::program_of({test::seg("s", {450, 500}, {550, 500})})));
  for (const auto& c : corners)
    EXPECT_TRUE(distance(c.pos, {450, 500}) <= 6 || distance(c.pos, {550, 500}) <= 6) << c.pos.x << "," << c.pos.y;
}

TEST(Corners, ScoresNormalisedAndSeparated) {
  const auto corners = detect_corners(edges_of(test::polygon(test::kTriangle)));
  ASSERT_FALSE(corners.empty());
  for (std::size_t i = 0; i < corners.size(); ++i) {
    EXPECT_GE(corners[i].score, 0.0);
    EXPECT_LE(corners[i].score, 1.0);
    for (std::size_t j = i + 1; j < corners.size(); ++j) EXPECT_GE(distance(corners[i].pos, corners[j].pos), 5.0);
  }
}

TEST(Junctions, PlusHasOneJunction) {
  const auto e = edges_of(test::program_of({test::seg("h", {400, 500}, {600, 500}), test::seg("v", {500, 400}, {500, 600})}));
  const auto j = of_kind(detect_junctions(e), AnchorKind::Junction);
  ASSERT_EQ(j.size(), 1u);
  EXPECT_LE(distance(j[0].pos, {500, 500}), 2.0);
}

TEST(Junctions, SegmentHasTwoEndpoints) {
  const auto found = detect_junctions(edges_of(test::program_of({test::seg("s", {300, 400}, {700, 420})})));
  const auto ends = of_kind(found, AnchorKind::Endpoint);
  ASSERT_EQ(ends.size(), 2u);
  EXPECT_LE(test::nearest(ends, {300, 400}), 2.0);
  EXPECT_LE(test::nearest(ends, {700, 420}), 2.0);
  EXPECT_TRUE(of_kind(found, AnchorKind::Junction).empty());
}

TEST(Junctions, BlankImage) { EXPECT_TRUE(detect_junctions(EdgeMap(100, 100)).empty()); }

TEST(Junctions, CrossingNumberOracle) {
  // hand-made unit-width skeletons
  EdgeMap m(9, 9);
  for (int i = 0; i < 9; ++i) m.set(i, 4, true), m.set(4, i, true);
  EXPECT_EQ(crossing_number(m, 4, 4), 4);
  EXPECT_EQ(crossing_number(m, 0, 4), 1);
  EXPECT_EQ(crossing_number(m, 2, 4), 2);
}

TEST(RawAnchors, TriangleVertices) {
  const auto a = extract_raw_anchors(render(test::polygon(test::kTriangle)));
  EXPECT_GE(a.size(), 3u);
  for (const auto& v : test::kTriangle) EXPECT_LE(test::nearest(a, v), 3.0);
}

TEST(RawAnchors, BlankImage) { EXPECT_TRUE(extract_raw_anchors(Raster(300, 300)).empty()); }

TEST(RawAnchors, RecallUnderSaltNoise) {
  Raster r = render(test::polygon(test::kTriangle));
  std::mt19937_64 rng(99);
  std::uniform_int_distribution<int> c(0, 999);
  for (int i = 0; i < 50; ++i) r.set(c(rng), c(rng), {0, 0, 0});
  const auto a = extract_raw_anchors(r);
  for (const auto& v : test::kTriangle) EXPECT_LE(test::nearest(a, v), 3.0);
}

TEST(RawAnchors, PolygonRecallOnCorpus) {
  for (int i = 0; i < 12; ++i) {
    const Program p = corpus_program(4, i);
    const auto a = extract_raw_anchors(render(p));
    for (const auto& prim : p.primitives)
      if (const auto* s = std::get_if<Segment>(&prim.shape)) {
        EXPECT_LE(test::nearest(a, s->p1), 3.0) << i << " " << prim.id;
        EXPECT_LE(test::nearest(a, s->p2), 3.0) << i << " " << prim.id;
      }
  }
}

TEST(RawAnchors, DeterministicAndOrdered) {
  const Raster r = render(corpus_program(9, 3));
  const auto a = extract_raw_anchors(r), b = extract_raw_anchors(r);
  EXPECT_EQ(a, b);
  for (std::size_t i = 1; i < a.size(); ++i)
    EXPECT_TRUE(a[i - 1].pos.y < a[i].pos.y || (a[i - 1].pos.y == a[i].pos.y && a[i - 1].pos.x <= a[i].pos.x));
}

TEST(Skeletonize, UnitWidth) {
  const auto e = edges_of(test::program_of({test::seg("s", {100, 100}, {900, 300}, 7.0)}));
  const auto sk = skeletonize(e);
  // no 2x2 block fully set after thinning
  for (int y = 0; y + 1 < sk.height(); ++y)
    for (int x = 0; x + 1 < sk.width(); ++x)
      ASSERT_FALSE(sk.at(x, y) && sk.at(x + 1, y) && sk.at(x, y + 1) && sk.at(x + 1, y + 1));
  EXPECT_GT(sk.count(), 700u);
}
