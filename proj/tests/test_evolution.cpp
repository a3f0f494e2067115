#include <gtest/gtest.h>

#include "support.hpp"

using namespace geo;

namespace {

// Loop state for `current` against `obs`, as run_loop would see it.
LoopState state_for(const Program& current, const Raster& obs, const GeoSkeleton& skel, const LoopConfig& cfg = {}) {
  const Evaluator eval(obs, skel, cfg.objective);
  LoopState st;
  st.program = current;
  Raster rec;
  const auto score = eval.evaluate(current, &rec);
  st.metrics = score.metrics;
  st.report = attribute_regions(project_errors(rec, obs, st.metrics, cfg.vep), current, cfg.vep);
  return st;
}

// Seeds a corpus program with its first vertex (and every coincident
// endpoint) moved by 20 px, or its first circle's centre moved by 20 px.
Program displaced(Program p) {
  for (auto& prim : p.primitives)
    if (const auto* s = std::get_if<Segment>(&prim.shape)) {
      const Point2D v = s->p1;
      for (auto& q : p.primitives)
        for (auto* r : control_point_refs(q.shape))
          if (distance(*r, v) < 0.01) *r = *r + Point2D{12, 16};
      return p;
    }
  auto& c = std::get<Circle>(p.primitives[0].shape);
  c.center = c.center + Point2D{20, 0};
  return p;
}

class ScriptedAgent : public ProgramAgent {
public:
  std::function<Program(const Program&)> on_refine;
  int generate_calls = 0, refine_calls = 0;
  Program generate(const GeoSkeleton&, const std::optional<std::string>&, const Raster&) override {
    ++generate_calls;
    throw TransportError(503, "unavailable");
  }
  Program refine(const Program& current, const DiffReport&, const GeoSkeleton&, const Raster&) override {
    ++refine_calls;
    return on_refine(current);
  }
};

}  // namespace

TEST(Synthesize, TriangleSkeleton) {
  const auto skel = build_skeleton(render(test::polygon(test::kTriangle)));
  const Program p = synthesize_initial(skel);
  std::vector<Anchor> ends;
  int segments = 0;
  for (const auto& prim : p.primitives)
    if (const auto* s = std::get_if<Segment>(&prim.shape)) {
      ++segments;
      ends.push_back({s->p1}), ends.push_back({s->p2});
    }
  EXPECT_EQ(segments, 3);
  for (const auto& v : test::kTriangle) EXPECT_LE(test::nearest(ends, v), 3.0);
  for (const auto& a : ends) EXPECT_LE(std::min({distance(a.pos, test::kTriangle[0]), distance(a.pos, test::kTriangle[1]),
                                                 distance(a.pos, test::kTriangle[2])}),
                                       3.0);
  EXPECT_TRUE(validate_consistency(p).empty());
}

TEST(Synthesize, EmptySkeleton) { EXPECT_TRUE(synthesize_initial(GeoSkeleton{}).primitives.empty()); }

TEST(Synthesize, CircleHypothesis) {
  GeoSkeleton s;
  s.circles.push_back({"c1", {500, 500}, 200, 300, 0.5});
  const Program p = synthesize_initial(s);
  ASSERT_EQ(p.primitives.size(), 1u);
  const auto& c = std::get<Circle>(p.primitives[0].shape);
  EXPECT_NEAR(c.center.x, 500, 1e-9);
  EXPECT_NEAR(c.center.y, 500, 1e-9);
  EXPECT_NEAR(c.radius, 200, 1e-9);
}

TEST(Synthesize, MatchesObservedStrokeWidth) {
  const Program truth = test::polygon(test::kSquare, 5.0);
  const Raster obs = render(truth);
  const auto skel = build_skeleton(obs);
  const Evaluator eval(obs, skel);
  const Program p = synthesize_initial(skel, obs, eval);
  ASSERT_FALSE(p.primitives.empty());
  EXPECT_NEAR(p.primitives[0].style.stroke_width, 5.0, 1.0);
}

TEST(Refine, DriftMovesTowardObservation) {
  const Program truth = test::program_of({test::seg("s1", {500, 200}, {500, 800}), test::seg("s2", {100, 900}, {900, 900})});
  Program cur = truth;
  std::get<Segment>(cur.primitives[0].shape) = Segment{{508, 200}, {508, 800}};
  const Raster obs = render(truth);
  const auto skel = build_skeleton(obs);
  const auto st = state_for(cur, obs, skel);
  ASSERT_FALSE(st.report.regions.empty());
  EXPECT_EQ(st.report.regions[0].classification, RegionClass::Drift);
  const Program next = refine_step(st, obs, skel);
  const auto& moved = std::get<Segment>(next.find("s1")->shape);
  EXPECT_LT(std::abs(moved.p1.x - 500), 8.0);
  EXPECT_LT(std::abs(moved.p2.x - 500), 8.0);

  // q checked against independently computed metrics
  const auto [cd0, hd0] = test::brute_cd_hd(render(cur), obs);
  const auto [cd1, hd1] = test::brute_cd_hd(render(next), obs);
  EXPECT_LT(cd1 + 0.1 * hd1, cd0 + 0.1 * hd0);
  const Evaluator eval(obs, skel);
  EXPECT_LT(eval.evaluate(next).q, eval.evaluate(cur).q);
}

TEST(Refine, CoveredHallucinatedCircleIsPruned) {
  const Program truth = test::program_of({test::seg("s1", {100, 100}, {900, 100}), test::seg("s2", {100, 100}, {100, 900})});
  Program cur = truth;
  cur.primitives.push_back(test::circ("c1", {600, 600}, 120));
  const Raster obs = render(truth);
  const auto skel = build_skeleton(obs);
  const auto st = state_for(cur, obs, skel);
  ASSERT_EQ(st.report.regions.size(), 1u);
  EXPECT_EQ(st.report.regions[0].classification, RegionClass::Hallucination);
  const Program next = refine_step(st, obs, skel);
  EXPECT_EQ(next.find("c1"), nullptr);
  EXPECT_NE(next.find("s1"), nullptr);

  // pruning never adds missing ink
  const auto after = project_errors(render(next), obs);
  EXPECT_LE(evo_detail::missing_pixel_total(after), evo_detail::missing_pixel_total(st.report));
}

TEST(Refine, EmptyReportLeavesProgram) {
  const Program p = test::polygon(test::kSquare);
  const Raster obs = render(p);
  const auto skel = build_skeleton(obs);
  const auto st = state_for(p, obs, skel);
  ASSERT_TRUE(st.report.regions.empty());
  EXPECT_EQ(refine_step(st, obs, skel), p);
}

TEST(Refine, MissingStrokeIsCompleted) {
  const Program truth = test::polygon(test::kTriangle);
  Program cur = truth;
  cur.primitives.pop_back();
  const Raster obs = render(truth);
  const auto skel = build_skeleton(obs);
  const auto st = state_for(cur, obs, skel);
  const Program next = refine_step(st, obs, skel);
  EXPECT_EQ(next.primitives.size(), truth.primitives.size());
  EXPECT_LT(measure(render(next), obs).hd, 5.0);
}

TEST(Loop, OneIterationLimit) {
  const Program truth = corpus_program(7, 1);
  const Raster obs = render(truth);
  const auto skel = build_skeleton(obs);
  LoopConfig cfg;
  cfg.max_iterations = 1;
  LoopHooks hooks;
  hooks.seed = displaced(truth);
  int renders = 0;
  hooks.on_iteration = [&](const LoopState&, const Raster&) { ++renders; };
  const auto [best, st] = run_loop(obs, std::nullopt, skel, cfg, hooks);
  EXPECT_EQ(st.history.size(), 2u);
  EXPECT_EQ(renders, 2);
  EXPECT_EQ(st.history[0].action, "seed");
  EXPECT_NE(st.history[1].action, "seed");
}

TEST(Loop, InvariantsOnCorpus) {
  for (int i = 0; i < 12; ++i) {
    const Program truth = corpus_program(12, i);
    const Raster obs = render(truth);
    const auto skel = build_skeleton(obs);
    LoopConfig cfg;
    cfg.max_iterations = 6;
    LoopHooks hooks;
    if (i % 2) hooks.seed = displaced(truth);
    double best_so_far = std::numeric_limits<double>::infinity();
    std::vector<double> best_seq;
    hooks.on_iteration = [&](const LoopState& s, const Raster&) {
      EXPECT_TRUE(validate_consistency(s.program).empty());
      best_seq.push_back(s.best_q);
    };
    const auto [best, st] = run_loop(obs, std::nullopt, skel, cfg, hooks);
    EXPECT_LE(st.history.size(), static_cast<std::size_t>(cfg.max_iterations + 1));
    for (std::size_t k = 1; k < best_seq.size(); ++k) EXPECT_LE(best_seq[k], best_seq[k - 1]);
    for (const auto& h : st.history) best_so_far = std::min(best_so_far, h.q);
    EXPECT_DOUBLE_EQ(st.best_q, best_so_far);
    EXPECT_DOUBLE_EQ(Evaluator(obs, skel).evaluate(best).q, st.best_q);
    EXPECT_FALSE(st.stop_reason.empty());
  }
}

TEST(Loop, SeededDisplacementConverges) {
  for (int i = 0; i < 8; ++i) {
    const Program truth = corpus_program(7, i);
    const Raster obs = render(truth);
    const auto skel = build_skeleton(obs);
    LoopHooks hooks;
    hooks.seed = displaced(truth);
    const auto [best, st] = run_loop(obs, std::nullopt, skel, LoopConfig{}, hooks);
    EXPECT_GT(st.history[0].hd, 5.0) << i;
    EXPECT_LE(st.best_metrics.hd, 5.0) << i;
    EXPECT_LE(st.probes, 50u) << i;
  }
}

TEST(Loop, BlankObservationYieldsEmptyProgram) {
  const Raster obs(200, 200);
  const auto [best, st] = run_loop(obs, std::nullopt, build_skeleton(obs));
  EXPECT_TRUE(best.primitives.empty());
  EXPECT_DOUBLE_EQ(st.history[0].cd, canvas_diagonal(200, 200));
}

TEST(Loop, InvalidConfigAndSeedRejected) {
  const Raster obs = render(test::polygon(test::kSquare));
  LoopConfig bad;
  bad.step_min = 10, bad.step_init = 1;
  EXPECT_FALSE(bad.valid());
  EXPECT_THROW(run_loop(obs, std::nullopt, GeoSkeleton{}, bad), Error);
  LoopHooks hooks;
  hooks.seed = test::program_of({test::seg("z", {3, 3}, {3, 3})});
  EXPECT_THROW(run_loop(obs, std::nullopt, GeoSkeleton{}, LoopConfig{}, hooks), Error);
}

TEST(Loop, AgentFailuresFallBackToDeterministic) {
  const Program truth = corpus_program(7, 2);
  const Raster obs = render(truth);
  const auto skel = build_skeleton(obs);
  ScriptedAgent agent;
  agent.on_refine = [](const Program&) -> Program { throw AgentTimeout(60); };
  LoopConfig cfg;
  cfg.refiner_mode = RefinerMode::Hybrid;
  LoopHooks hooks;
  hooks.agent = &agent;
  const auto [best, st] = run_loop(obs, std::nullopt, skel, cfg, hooks);
  EXPECT_EQ(agent.generate_calls, 1);
  EXPECT_LE(agent.refine_calls, 1);  // a transport failure switches the agent off
  EXPECT_FALSE(st.history[0].agent_error.empty());
  EXPECT_LT(st.best_metrics.cd, 10.0);
}

TEST(Loop, InvalidAgentProgramsNeverReachTheLoop) {
  const Program truth = corpus_program(7, 3);
  const Raster obs = render(truth);
  const auto skel = build_skeleton(obs);
  ScriptedAgent agent;
  agent.on_refine = [](const Program& p) {
    Program bad = p;
    bad.primitives.push_back(test::seg("bad", {4, 4}, {4, 4}));
    return bad;
  };
  LoopConfig cfg;
  cfg.refiner_mode = RefinerMode::Agent;
  LoopHooks hooks;
  hooks.agent = &agent;
  hooks.seed = displaced(truth);
  hooks.on_iteration = [](const LoopState& s, const Raster&) { EXPECT_TRUE(validate_consistency(s.program).empty()); };
  const auto [best, st] = run_loop(obs, std::nullopt, skel, cfg, hooks);
  EXPECT_GE(agent.refine_calls, 1);
  EXPECT_EQ(best.find("bad"), nullptr);
}

TEST(FineTune, RestoresDisplacedEndpoint) {
  const Program truth = test::program_of({test::seg("s1", {300, 400}, {700, 600})});
  const Raster obs = render(truth);
  const auto skel = build_skeleton(obs);
  const Evaluator eval(obs, skel);
  Program start = truth;
  std::get<Segment>(start.primitives[0].shape).p2 = {706, 592};
  Raster rec;
  const auto score = eval.evaluate(start, &rec);
  const auto rep = project_errors(rec, obs, score.metrics);
  std::vector<PixelCoord> unmatched;
  for (const auto& r : rep.regions) {
    unmatched.insert(unmatched.end(), r.missing_pixels.begin(), r.missing_pixels.end());
    unmatched.insert(unmatched.end(), r.hallucinated_pixels.begin(), r.hallucinated_pixels.end());
  }
  const auto out = fine_tune(start, score, {0}, {{706, 592}}, unmatched, eval, LoopConfig{});
  EXPECT_LE(distance(std::get<Segment>(out.program.primitives[0].shape).p2, {700, 600}), 1.0);
  EXPECT_LT(out.score.q, score.q);
  EXPECT_LE(out.probes, 50u);
}

TEST(History, JsonLine) {
  const auto j = to_json(HistoryEntry{3, 1.5, 4.0, 0.02, "finetune", ""});
  EXPECT_EQ(j.at("t"), 3);
  EXPECT_EQ(j.at("cd"), 1.5);
  EXPECT_EQ(j.at("hd"), 4.0);
  EXPECT_EQ(j.at("q"), 0.02);
  EXPECT_FALSE(j.contains("agent_error"));
}

TEST(Mode, FromString) {
  EXPECT_EQ(refiner_mode_from_string("det"), RefinerMode::Deterministic);
  EXPECT_EQ(refiner_mode_from_string("hybrid"), RefinerMode::Hybrid);
  EXPECT_FALSE(refiner_mode_from_string("magic").has_value());
}
