#include <gtest/gtest.h>

#include <random>

#include "support.hpp"

using namespace geo;

TEST(Parse, PointAndSegmentWithNamedEndpoints) {
  const auto p = parse_program("canvas 1000 1000\npoint A 100 200\nsegment s1 A:(100,200) B:(400,200)");
  ASSERT_EQ(p.primitives.size(), 2u);
  ASSERT_TRUE(std::holds_alternative<PointMark>(p.primitives[0].shape));
  const auto& s = std::get<Segment>(p.primitives[1].shape);
  EXPECT_EQ(s.p1, (Point2D{100, 200}));
  EXPECT_EQ(s.p2, (Point2D{400, 200}));
}

TEST(Parse, DuplicateIdReportsIdAndLine) {
  try {
    parse_program("canvas 1000 1000\npoint A 1 2\npoint A 3 4");
    FAIL() << "expected DuplicateId";
  } catch (const DuplicateId& e) {
    EXPECT_EQ(e.id(), "A");
    EXPECT_EQ(e.line(), 3);
  }
}

TEST(Parse, NamedPointReferenceResolvesToCoordinates) {
  const auto p = parse_program("canvas 100 100\npoint A 10 20\npoint B 30 40\nsegment s A B\n");
  const auto& s = std::get<Segment>(p.find("s")->shape);
  EXPECT_EQ(s.p1, (Point2D{10, 20}));
  EXPECT_EQ(s.p2, (Point2D{30, 40}));
}

TEST(Parse, UndeclaredReferenceIsDangling) {
  EXPECT_THROW(parse_program("canvas 100 100\nsegment s A (1,1)\n"), DanglingReference);
}

TEST(Parse, SyntaxErrorCarriesPosition) {
  try {
    parse_program("canvas 100 100\nsegment s (1,1) (2,\n");
    FAIL() << "expected SyntaxError";
  } catch (const SyntaxError& e) {
    EXPECT_EQ(e.line(), 2);
    EXPECT_GT(e.column(), 0);
  }
  EXPECT_THROW(parse_program("segment s (1,1) (2,2)\n"), SyntaxError);
  EXPECT_THROW(parse_program("canvas 100 100\nhexagon h (1,1)\n"), SyntaxError);
}

TEST(Parse, CommentsAndStyleStatements) {
  const auto p = parse_program(
      "# a figure\ncanvas 200 100\nstyle width 3 color 255 0 0 dash dashed\ncircle c (50,50) 20  # trailing\n");
  EXPECT_EQ(p.width, 200);
  EXPECT_EQ(p.height, 100);
  ASSERT_EQ(p.primitives.size(), 1u);
  EXPECT_EQ(p.primitives[0].style.stroke_width, 3.0);
  EXPECT_EQ(p.primitives[0].style.color, (Rgb{255, 0, 0}));
  EXPECT_EQ(p.primitives[0].style.dash, Dash::Dashed);
}

TEST(Serialize, CanonicalSegment) {
  Program p;
  p.primitives.push_back({"s1", Segment{{0, 0}, {10, 0}}, {}});
  EXPECT_EQ(serialize_program(p), "canvas 1000 1000\nsegment s1 (0.00,0.00) (10.00,0.00)\n");
}

TEST(Serialize, EmptyProgram) { EXPECT_EQ(serialize_program(Program{}), "canvas 1000 1000\n"); }

TEST(Validate, ZeroLengthSegmentIsDegenerate) {
  const auto v = validate_consistency(test::program_of({test::seg("s1", {5, 5}, {5, 5})}));
  ASSERT_EQ(v.size(), 1u);
  EXPECT_EQ(v[0].kind, Violation::Kind::Degenerate);
  EXPECT_EQ(v[0].primitive_id, "s1");
  EXPECT_EQ(v[0].reason, "zero length");
}

TEST(Validate, NegativeRadiusBreachesInvariant) {
  const auto v = validate_consistency(test::program_of({test::circ("c1", {500, 500}, -3)}));
  ASSERT_EQ(v.size(), 1u);
  EXPECT_EQ(v[0].kind, Violation::Kind::InvariantBreach);
  EXPECT_EQ(v[0].primitive_id, "c1");
  EXPECT_EQ(v[0].reason, "radius > 0");
}

TEST(Validate, SquareIsClean) { EXPECT_TRUE(validate_consistency(test::polygon(test::kSquare)).empty()); }

TEST(Validate, OtherBreaches) {
  auto p = test::program_of({test::seg("s", {0, 0}, {10, 0}), test::seg("s", {0, 5}, {10, 5})});
  EXPECT_FALSE(validate_consistency(p).empty());  // duplicate id

  p = test::program_of({test::seg("s", {0, 0}, {10, 0}, 25.0)});
  EXPECT_FALSE(validate_consistency(p).empty());  // stroke width

  p = test::program_of({test::seg("s", {0, 0}, {std::nan(""), 0})});
  EXPECT_FALSE(validate_consistency(p).empty());

  p = test::program_of({test::seg("s", {0, 0}, {1200, 0})});
  EXPECT_FALSE(validate_consistency(p).empty());  // beyond 1.1 W

  p = test::program_of({{"l", Label{"far", {1300, 10}, {0, 0}}, {}}});
  EXPECT_TRUE(validate_consistency(p).empty());  // labels may overshoot
}

namespace {

Program random_program(std::mt19937_64& rng) {
  auto coord = [&] { return std::round(std::uniform_real_distribution<double>(-50, 1050)(rng) * 100) / 100; };
  auto pt = [&] { return Point2D{coord(), coord()}; };
  auto angle = [&] { return std::round(std::uniform_real_distribution<double>(0, 359.99)(rng) * 100) / 100; };
  auto positive = [&] { return std::round(std::uniform_real_distribution<double>(1, 300)(rng) * 100) / 100; };
  Program p;
  const int n = std::uniform_int_distribution<int>(0, 12)(rng);
  for (int i = 0; i < n; ++i) {
    Primitive prim;
    prim.id = "e" + std::to_string(i);
    prim.style.stroke_width = std::uniform_int_distribution<int>(1, 40)(rng) * 0.5;
    prim.style.color = {static_cast<std::uint8_t>(rng() % 256), 0, static_cast<std::uint8_t>(rng() % 256)};
    prim.style.dash = rng() % 2 ? Dash::Solid : Dash::Dashed;
    switch (rng() % 8) {
      case 0: prim.shape = PointMark{pt()}; break;
      case 1: prim.shape = Segment{pt(), pt()}; break;
      case 2: prim.shape = Circle{pt(), positive()}; break;
      case 3: prim.shape = Arc{pt(), positive(), angle(), angle()}; break;
      case 4: prim.shape = Polyline{{pt(), pt(), pt()}}; break;
      case 5: prim.shape = Label{"A_1 \"q\"", pt(), {std::round(coord()) / 10, std::round(coord()) / 10}}; break;
      case 6: prim.shape = RightAngleMark{pt(), angle(), angle(), std::round(positive()) / 10}; break;
      default: prim.shape = TickMark{pt(), angle()}; break;
    }
    p.primitives.push_back(std::move(prim));
  }
  return p;
}

}  // namespace

TEST(RoundTrip, ParseOfSerializeIsIdentity) {
  std::mt19937_64 rng(7);
  for (int t = 0; t < 300; ++t) {
    const Program p = random_program(rng);
    const std::string text = serialize_program(p);
    const Program back = parse_program(text);
    ASSERT_EQ(back, p) << text;
    EXPECT_EQ(serialize_program(back), text);
  }
}

TEST(RoundTrip, DefaultsLineSurvives) {
  Program p;
  p.defaults.stroke_width = 4;
  p.primitives.push_back({"c", Circle{{10, 10}, 5}, p.defaults});
  EXPECT_EQ(parse_program(serialize_program(p)), p);
}

TEST(Normalize, DegreesWrapIntoRange) {
  EXPECT_DOUBLE_EQ(normalize_degrees(360.0), 0.0);
  EXPECT_DOUBLE_EQ(normalize_degrees(-90.0), 270.0);
  EXPECT_DOUBLE_EQ(normalize_degrees(725.0), 5.0);
}
