#include <gtest/gtest.h>

#include <random>

#include "support.hpp"

using namespace geo;

namespace {

Program base_figure() {
  return test::program_of({test::seg("s1", {200, 200}, {800, 200}), test::seg("s2", {800, 200}, {800, 800}),
                           test::seg("s3", {200, 800}, {500, 500}), test::circ("c1", {350, 550}, 80)});
}

// Edge pixels of `from` with no pixel of `to` within Chebyshev distance 2.
std::set<std::pair<int, int>> unmatched(const std::vector<PixelCoord>& from, const std::vector<PixelCoord>& to) {
  std::set<std::pair<int, int>> other;
  for (const auto& p : to) other.insert({p.x, p.y});
  std::set<std::pair<int, int>> out;
  for (const auto& p : from) {
    bool hit = false;
    for (int dy = -2; dy <= 2 && !hit; ++dy)
      for (int dx = -2; dx <= 2 && !hit; ++dx) hit = other.count({p.x + dx, p.y + dy}) > 0;
    if (!hit) out.insert({p.x, p.y});
  }
  return out;
}

}  // namespace

TEST(Project, IdentityHasNoRegions) {
  const Raster r = render(base_figure());
  const auto rep = project_errors(r, r);
  EXPECT_TRUE(rep.regions.empty());
  EXPECT_EQ(rep.diff_image.width(), r.width());
  EXPECT_EQ(rep.diff_image.height(), r.height());
}

TEST(Project, OmittedSegmentIsOneMissingRegion) {
  Program obs = base_figure();
  obs.primitives.push_back(test::seg("EF", {100, 950}, {900, 950}));
  const auto rep = project_errors(render(base_figure()), render(obs));
  ASSERT_EQ(rep.regions.size(), 1u);
  const auto& r = rep.regions[0];
  EXPECT_EQ(r.classification, RegionClass::Missing);
  EXPECT_LE(r.bbox.x0, 100);
  EXPECT_GE(r.bbox.x1, 900);
  EXPECT_NEAR(r.centroid.y, 950.0, 2.0);
  EXPECT_GT(r.local_cd, 100.0);
}

TEST(Project, TranslatedSegmentIsOneDrift) {
  const Program obs = test::program_of({test::seg("s3", {300, 300}, {700, 300})});
  const Program rec = test::program_of({test::seg("s3", {300, 308}, {700, 308})});
  const auto rep = project_errors(render(rec), render(obs));
  ASSERT_EQ(rep.regions.size(), 1u);
  const auto& r = rep.regions[0];
  EXPECT_EQ(r.classification, RegionClass::Drift);
  // fusion oracle: the two sides' centroids are 8 px apart
  EXPECT_NEAR(distance(r.missing_centroid, r.hallucinated_centroid), 8.0, 0.5);
  EXPECT_FALSE(r.missing_pixels.empty());
  EXPECT_FALSE(r.hallucinated_pixels.empty());
}

TEST(Project, ExtraPrimitiveIsHallucination) {
  Program rec = base_figure();
  rec.primitives.push_back(test::circ("extra", {650, 650}, 60));
  const auto rep = project_errors(render(rec), render(base_figure()));
  ASSERT_FALSE(rep.regions.empty());
  EXPECT_EQ(rep.regions[0].classification, RegionClass::Hallucination);
}

TEST(Project, ThickerStrokeIsStyleMismatch) {
  const Program obs = test::program_of({test::seg("s", {200, 500}, {800, 500}, 6)});
  const Program rec = test::program_of({test::seg("s", {200, 500}, {800, 500}, 12)});
  const auto rep = project_errors(render(rec), render(obs));
  ASSERT_FALSE(rep.regions.empty());
  EXPECT_EQ(rep.regions[0].classification, RegionClass::StyleMismatch);
  EXPECT_GT(rep.regions[0].rendered_width, rep.regions[0].observed_width);
}

TEST(Project, DimensionMismatch) { EXPECT_THROW(project_errors(Raster(10, 10), Raster(10, 11)), DimensionMismatch); }

TEST(Project, CompletenessSoundnessAndOrder) {
  std::mt19937_64 rng(42);
  std::uniform_real_distribution<double> shift(-12, 12);
  for (int t = 0; t < 20; ++t) {
    const Program truth = corpus_program(31, t);
    Program rec = truth;
    auto& prim = rec.primitives[rng() % rec.primitives.size()];
    for (auto* pt : control_point_refs(prim.shape)) *pt = *pt + Point2D{shift(rng), shift(rng)};
    if (t % 3 == 0) rec.primitives.erase(rec.primitives.begin());
    const Raster r = render(rec), o = render(truth);
    const auto rep = project_errors(r, o);

    const auto e_rec = test::ink(r), e_obs = test::ink(o);
    const auto want_miss = unmatched(e_obs, e_rec), want_hallu = unmatched(e_rec, e_obs);
    std::set<std::pair<int, int>> got_miss, got_hallu;
    std::size_t total = 0;
    for (const auto& g : rep.regions) {
      EXPECT_GT(g.pixel_count, 0);
      EXPECT_GE(g.bbox.x0, 0);
      EXPECT_LT(g.bbox.x1, 1000);
      for (const auto& p : g.missing_pixels) got_miss.insert({p.x, p.y});
      for (const auto& p : g.hallucinated_pixels) got_hallu.insert({p.x, p.y});
      total += g.missing_pixels.size() + g.hallucinated_pixels.size();
    }
    EXPECT_EQ(got_miss, want_miss);
    EXPECT_EQ(got_hallu, want_hallu);
    EXPECT_EQ(total, want_miss.size() + want_hallu.size());  // each pixel in exactly one region

    const double hd = test::brute_cd_hd(e_rec, e_obs).second;
    EXPECT_EQ(rep.regions.empty(), hd <= 2 * std::sqrt(2.0) + 1e-12);

    for (std::size_t i = 1; i < rep.regions.size(); ++i)
      EXPECT_GE(rep.regions[i - 1].pixel_count, rep.regions[i].pixel_count);

    const auto again = project_errors(r, o);
    EXPECT_EQ(to_json(again).dump(), to_json(rep).dump());
  }
}

TEST(Project, SmallJitterIsAbsorbed) {
  const Program a = test::program_of({test::seg("s", {100, 100}, {900, 600})});
  const Program b = test::program_of({test::seg("s", {101, 101}, {901, 601})});
  EXPECT_TRUE(project_errors(render(a), render(b)).regions.empty());
}

TEST(Attribute, DriftOnSegment) {
  Program rec = base_figure();
  std::get<Segment>(rec.find("s3")->shape) = Segment{{200, 808}, {500, 508}};
  const auto rep = attribute_regions(project_errors(render(rec), render(base_figure())), rec);
  ASSERT_FALSE(rep.regions.empty());
  EXPECT_EQ(rep.regions[0].classification, RegionClass::Drift);
  EXPECT_EQ(rep.regions[0].nearest_primitive_id, std::optional<std::string>("s3"));
}

TEST(Attribute, FarMissingRegionHasNoOwner) {
  Program obs = base_figure();
  obs.primitives.push_back(test::seg("far", {940, 20}, {990, 20}));
  const Program rec = base_figure();
  const auto rep = attribute_regions(project_errors(render(rec), render(obs)), rec);
  ASSERT_EQ(rep.regions.size(), 1u);
  EXPECT_FALSE(rep.regions[0].nearest_primitive_id.has_value());
}

TEST(Attribute, EmptyReportUnchanged) {
  DiffReport d;
  d.iteration = 4;
  const auto out = attribute_regions(d, base_figure());
  EXPECT_TRUE(out.regions.empty());
  EXPECT_EQ(out.iteration, 4);
}

TEST(Attribute, EnvelopeDistance) {
  const auto s = test::seg("s", {0, 0}, {100, 0}, 4);
  EXPECT_DOUBLE_EQ(envelope_distance(s, {50, 10}), 8.0);
  EXPECT_DOUBLE_EQ(envelope_distance(s, {50, 1}), 0.0);
  const auto c = test::circ("c", {0, 0}, 50, 2);
  EXPECT_DOUBLE_EQ(envelope_distance(c, {0, 20}), 29.0);
}

TEST(Report, JsonShape) {
  Program obs = base_figure();
  obs.primitives.push_back(test::seg("EF", {100, 950}, {900, 950}));
  const Program rec = base_figure();
  const auto rep = attribute_regions(project_errors(render(rec), render(obs)), rec);
  const auto j = to_json(rep);
  ASSERT_EQ(j.at("regions").size(), 1u);
  const auto& r = j.at("regions")[0];
  EXPECT_EQ(r.at("classification"), "missing");
  for (const char* k : {"bbox", "centroid", "pixel_count", "local_cd"}) EXPECT_TRUE(r.contains(k)) << k;
  EXPECT_TRUE(j.contains("metrics"));
}
