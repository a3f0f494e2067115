#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "geo/cli.hpp"
#include "support.hpp"

using namespace geo;

namespace {

namespace fs = std::filesystem;

struct Run {
  int code;
  std::string out, err;
};

Run run(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = cli::dispatch(args, out, err);
  return {code, out.str(), err.str()};
}

fs::path fresh_dir(const std::string& name) {
  const auto d = fs::temp_directory_path() / name;
  fs::remove_all(d);
  fs::create_directories(d);
  return d;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write(const fs::path& p, const std::string& text) { std::ofstream(p, std::ios::binary) << text; }

}  // namespace

TEST(Cli, RenderWritesPng) {
  const auto d = fresh_dir("geo_cli_render");
  write(d / "in.geo", serialize_program(corpus_program(2, 0)));
  const auto r = run({"render", (d / "in.geo").string(), "-o", (d / "out.png").string()});
  EXPECT_EQ(r.code, 0) << r.err;
  ASSERT_TRUE(fs::exists(d / "out.png"));
  EXPECT_EQ(content_hash(load_raster(d / "out.png")), content_hash(render(corpus_program(2, 0))));
}

TEST(Cli, RenderDefaultsToOutDir) {
  const auto d = fresh_dir("geo_cli_outdir");
  write(d / "fig.geo", "canvas 50 50\ncircle c (25,25) 10\n");
  const auto r = run({"--out-dir", (d / "o").string(), "--json", "render", (d / "fig.geo").string()});
  EXPECT_EQ(r.code, 0) << r.err;
  EXPECT_TRUE(fs::exists(d / "o" / "fig.png"));
  EXPECT_EQ(nlohmann::json::parse(r.out).at("output"), (d / "o" / "fig.png").string());
}

TEST(Cli, InvalidProgramsAreDomainErrors) {
  const auto d = fresh_dir("geo_cli_badprog");
  write(d / "bad.geo", "canvas 100 100\nsegment s (1,1) (\n");
  auto r = run({"render", (d / "bad.geo").string()});
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.err.find("geom_program"), std::string::npos);
  EXPECT_NE(r.err.find("bad.geo"), std::string::npos);
  write(d / "degenerate.geo", "canvas 100 100\nsegment s (1,1) (1,1)\n");
  EXPECT_EQ(run({"render", (d / "degenerate.geo").string()}).code, 1);
  EXPECT_EQ(run({"render", (d / "missing.geo").string()}).code, 1);
}

TEST(Cli, MetricsSizeMismatch) {
  const auto d = fresh_dir("geo_cli_metrics");
  save_raster(Raster(1000, 1000), d / "a.png");
  save_raster(Raster(999, 1000), d / "b.png");
  const auto r = run({"metrics", (d / "a.png").string(), (d / "b.png").string()});
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.err.find("dimension mismatch"), std::string::npos);
}

TEST(Cli, MetricsOfIdenticalImages) {
  const auto d = fresh_dir("geo_cli_metrics_same");
  save_raster(render(corpus_program(2, 1)), d / "a.png");
  const auto r = run({"metrics", (d / "a.png").string(), (d / "a.png").string()});
  EXPECT_EQ(r.code, 0);
  const auto j = nlohmann::json::parse(r.out);
  EXPECT_EQ(j.at("cd"), 0.0);
  EXPECT_EQ(j.at("hd"), 0.0);
  EXPECT_EQ(j.at("ssim"), 1.0);
}

TEST(Cli, UsageErrors) {
  auto r = run({"bogus"});
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("Usage"), std::string::npos);
  EXPECT_EQ(run({}).code, 2);
  EXPECT_EQ(run({"render"}).code, 2);
  EXPECT_EQ(run({"--no-such-flag", "selftest"}).code, 2);
  EXPECT_EQ(run({"reconstruct", "x.png", "--mode", "psychic"}).code, 2);
  EXPECT_EQ(run({"dataset", "review", "m.jsonl", "--id", "a", "--reviewer", "r"}).code, 2);
  EXPECT_EQ(run({"--help"}).code, 0);
}

TEST(Cli, ConfigFilePrecedence) {
  const auto d = fresh_dir("geo_cli_config");
  write(d / "fig.geo", "canvas 40 40\ncircle c (20,20) 8\n");
  write(d / "geo.conf", "# settings\nout_dir = " + (d / "from_conf").string() + "\njson = true\n");
  auto r = run({"--config", (d / "geo.conf").string(), "render", (d / "fig.geo").string()});
  EXPECT_EQ(r.code, 0) << r.err;
  EXPECT_TRUE(fs::exists(d / "from_conf" / "fig.png"));
  EXPECT_NO_THROW(nlohmann::json::parse(r.out));

  r = run({"--config", (d / "geo.conf").string(), "--out-dir", (d / "from_flag").string(), "render", (d / "fig.geo").string()});
  EXPECT_EQ(r.code, 0);
  EXPECT_TRUE(fs::exists(d / "from_flag" / "fig.png"));

  write(d / "bad.conf", "colour = blue\n");
  EXPECT_EQ(run({"--config", (d / "bad.conf").string(), "selftest"}).code, 2);
  write(d / "badval.conf", "eps = lots\n");
  EXPECT_EQ(run({"--config", (d / "badval.conf").string(), "selftest"}).code, 2);
}

TEST(Cli, AnchorsSkeletonAndDiff) {
  const auto d = fresh_dir("geo_cli_inspect");
  save_raster(render(test::polygon(test::kSquare)), d / "sq.png");
  Program shifted = test::polygon(test::kSquare);
  std::get<Segment>(shifted.primitives[0].shape).p1.y += 9;
  save_raster(render(shifted), d / "rec.png");
  const std::string od = (d / "out").string();

  auto r = run({"--out-dir", od, "--json", "anchors", (d / "sq.png").string()});
  EXPECT_EQ(r.code, 0) << r.err;
  const auto anchors = nlohmann::json::parse(r.out);
  EXPECT_EQ(anchors.size(), 4u);
  for (const char* k : {"x", "y", "score", "kind", "source"}) EXPECT_TRUE(anchors[0].contains(k)) << k;
  EXPECT_TRUE(fs::exists(d / "out" / "sq.anchors.json"));
  EXPECT_TRUE(fs::exists(d / "out" / "sq.anchors.png"));

  r = run({"--out-dir", od, "skeleton", (d / "sq.png").string()});
  EXPECT_EQ(r.code, 0);
  EXPECT_EQ(nlohmann::json::parse(slurp(d / "out" / "sq.skeleton.json")).at("segments").size(), 4u);

  r = run({"--out-dir", od, "--json", "diff", (d / "rec.png").string(), (d / "sq.png").string()});
  EXPECT_EQ(r.code, 0);
  EXPECT_FALSE(nlohmann::json::parse(r.out).at("regions").empty());
  EXPECT_TRUE(fs::exists(d / "out" / "rec.diff.png"));
  EXPECT_TRUE(fs::exists(d / "out" / "rec.diff.json"));
}

TEST(Cli, ReconstructWritesArtifacts) {
  const auto d = fresh_dir("geo_cli_recon");
  save_raster(render(corpus_program(3, 2)), d / "fig.png");
  const std::string od = (d / "out").string();
  const auto r = run({"--out-dir", od, "--json", "reconstruct", (d / "fig.png").string(), "--max-iter", "4"});
  EXPECT_EQ(r.code, 0) << r.err;
  const auto summary = nlohmann::json::parse(r.out);
  EXPECT_LT(summary.at("cd").get<double>(), 10.0);
  EXPECT_TRUE(fs::exists(d / "out" / "fig.geo"));
  EXPECT_TRUE(fs::exists(d / "out" / "fig.render.png"));
  EXPECT_TRUE(fs::exists(d / "out" / "fig.diff_t0.png"));
  std::istringstream hist(slurp(d / "out" / "fig.history.jsonl"));
  std::string line;
  std::size_t lines = 0;
  while (std::getline(hist, line)) {
    const auto j = nlohmann::json::parse(line);
    for (const char* k : {"t", "cd", "hd", "q"}) EXPECT_TRUE(j.contains(k));
    EXPECT_EQ(j.at("t"), lines);
    ++lines;
  }
  EXPECT_EQ(lines, summary.at("iterations").get<std::size_t>());
  const Program back = parse_program(slurp(d / "out" / "fig.geo"));
  EXPECT_LT(measure(render(back), render(corpus_program(3, 2))).cd, 10.0);
}

TEST(Cli, AgentModeNeedsCredentialsOrMock) {
  const auto d = fresh_dir("geo_cli_agent");
  save_raster(render(test::polygon(test::kTriangle)), d / "tri.png");
  ::unsetenv("GEO_AGENT_ENDPOINT");
  ::unsetenv("GEO_AGENT_KEY");
  auto r = run({"--out-dir", (d / "o").string(), "reconstruct", (d / "tri.png").string(), "--mode", "agent"});
  EXPECT_EQ(r.code, 3);
  EXPECT_NE(r.err.find("GEO_AGENT_ENDPOINT"), std::string::npos);

  // scripted replies: the generate role draws the triangle, refine replies run out
  std::string program = serialize_program(test::polygon(test::kTriangle));
  write(d / "script.jsonl", nlohmann::json{{"reply", "```\n" + program + "```"}}.dump() + "\n");
  r = run({"--out-dir", (d / "o").string(), "--agent-mock", (d / "script.jsonl").string(), "--json", "reconstruct",
           (d / "tri.png").string(), "--mode", "hybrid"});
  EXPECT_EQ(r.code, 0) << r.err;
  EXPECT_LT(nlohmann::json::parse(r.out).at("cd").get<double>(), 10.0);
  EXPECT_TRUE(fs::exists(d / "o" / "agent_log.jsonl"));
}

TEST(Cli, DatasetFlow) {
  const auto d = fresh_dir("geo_cli_dataset");
  fs::create_directories(d / "imgs");
  save_raster(render(corpus_program(5, 0)), d / "imgs" / "good.png");
  save_raster(Raster(300, 300), d / "imgs" / "blank.png");
  write(d / "imgs" / "broken.png", "nope");
  const std::string manifest = (d / "data" / "manifest.jsonl").string();

  auto r = run({"--jobs", "2", "dataset", "build", (d / "imgs").string(), "-o", manifest});
  EXPECT_EQ(r.code, 0) << r.err;
  r = run({"--json", "dataset", "filter", manifest, "--threshold", "10"});
  EXPECT_EQ(r.code, 0) << r.err;
  const auto header = nlohmann::json::parse(r.out);
  EXPECT_EQ(header.at("counts").at("auto_accepted"), 1);
  EXPECT_EQ(header.at("counts").at("auto_rejected"), 1);
  EXPECT_EQ(header.at("counts").at("failed"), 1);

  r = run({"dataset", "review", manifest, "--id", "good", "--approve", "--reviewer", "ana"});
  EXPECT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("human_approved"), std::string::npos);
  r = run({"dataset", "review", manifest, "--id", "good", "--reject", "--reviewer", "bo"});
  EXPECT_EQ(r.code, 1);
  EXPECT_EQ(run({"dataset", "review", manifest, "--id", "blank", "--approve", "--reviewer", "bo"}).code, 1);
  EXPECT_EQ(run({"dataset", "review", manifest, "--id", "ghost", "--approve", "--reviewer", "bo"}).code, 1);

  const auto m = load_manifest(manifest);
  EXPECT_EQ(m.find("good")->audit.size(), 1u);
  EXPECT_TRUE(verify_entry(*m.find("good"), d / "data"));
}

TEST(Selftest, PassesAndIsRepeatable) {
  std::ostringstream a, b;
  EXPECT_EQ(cli::selftest(a), 0);
  EXPECT_EQ(cli::selftest(b), 0);
  EXPECT_EQ(a.str(), b.str());
  EXPECT_NE(a.str().find("all checks passed"), std::string::npos);
}

TEST(Selftest, InjectedWrongChamferFails) {
  cli::SelftestHooks hooks;
  hooks.chamfer = [](const auto& x, const auto& y) { return chamfer_distance(x, y) + 0.25; };
  std::ostringstream out;
  EXPECT_EQ(cli::selftest(out, hooks), 1);
  EXPECT_NE(out.str().find("distance oracle: FAIL"), std::string::npos);
}

TEST(Selftest, ThroughDispatch) {
  const auto r = run({"selftest"});
  EXPECT_EQ(r.code, 0);
  EXPECT_EQ(r.out, run({"selftest"}).out);
}
