#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <thread>

#include "support.hpp"

using namespace geo;

namespace {

Quadruplet entry(const std::string& id, double cd, EntryStatus s = EntryStatus::Pending) {
  Quadruplet q;
  q.id = id;
  q.code = "canvas 1000 1000\n";
  MetricBundle m;
  m.cd = cd;
  m.hd = 2 * cd;
  q.metrics = m;
  q.status = s;
  return q;
}

Manifest sample() {
  Manifest m;
  m.entries = {entry("a", 6.41), entry("b", 10.0), entry("c", 9.999), entry("d", 3.0, EntryStatus::HumanRejected),
               entry("e", 50.0, EntryStatus::HumanApproved)};
  Quadruplet broken;
  broken.id = "f";
  broken.error = "io: cannot read";
  m.entries.push_back(broken);
  return m;
}

std::filesystem::path fresh_dir(const std::string& name) {
  const auto d = std::filesystem::temp_directory_path() / name;
  std::filesystem::remove_all(d);
  std::filesystem::create_directories(d);
  return d;
}

}  // namespace

TEST(Filter, StrictGate) {
  const auto m = filter_manifest(sample(), 10.0);
  EXPECT_EQ(m.find("a")->status, EntryStatus::AutoAccepted);
  EXPECT_EQ(m.find("b")->status, EntryStatus::AutoRejected);
  EXPECT_EQ(m.find("c")->status, EntryStatus::AutoAccepted);
  EXPECT_EQ(m.find("d")->status, EntryStatus::HumanRejected);
  EXPECT_EQ(m.find("e")->status, EntryStatus::HumanApproved);
  EXPECT_EQ(m.find("f")->status, EntryStatus::AutoRejected);
  EXPECT_EQ(m.threshold_px, 10.0);
}

TEST(Filter, PartitionAndCounts) {
  const auto m = filter_manifest(sample());
  for (const auto& e : m.entries) EXPECT_NE(e.status, EntryStatus::Pending);
  const auto c = m.counts();
  EXPECT_EQ(c.at(EntryStatus::AutoAccepted), 2u);
  EXPECT_EQ(c.at(EntryStatus::AutoRejected), 1u);
  EXPECT_EQ(c.at(EntryStatus::HumanApproved), 1u);
  EXPECT_EQ(c.at(EntryStatus::HumanRejected), 1u);
  EXPECT_EQ(c.at(EntryStatus::Pending), 0u);
  EXPECT_EQ(m.failed(), 1u);
  std::size_t sum = m.failed();
  for (const auto& [s, n] : c) sum += n;
  EXPECT_EQ(sum, m.entries.size());
}

TEST(Filter, RefilteringMovesAutoStatuses) {
  auto m = filter_manifest(sample(), 10.0);
  m = filter_manifest(m, 5.0);
  EXPECT_EQ(m.find("a")->status, EntryStatus::AutoRejected);
  EXPECT_EQ(m.threshold_px, 5.0);
}

TEST(Review, ApproveAccepted) {
  auto m = review_mark(filter_manifest(sample()), "a", Verdict::Approve, "ana", "2026-01-01T00:00:00Z");
  const auto* e = m.find("a");
  EXPECT_EQ(e->status, EntryStatus::HumanApproved);
  ASSERT_EQ(e->audit.size(), 1u);
  EXPECT_EQ(e->audit[0], (AuditRecord{"ana", "approve", "2026-01-01T00:00:00Z"}));
}

TEST(Review, ApproveRejectedIsInvalid) {
  EXPECT_THROW(review_mark(filter_manifest(sample()), "b", Verdict::Approve, "ana"), InvalidTransition);
}

TEST(Review, HumanVerdictsAreTerminal) {
  auto m = review_mark(filter_manifest(sample()), "c", Verdict::Reject, "ana");
  EXPECT_EQ(m.find("c")->status, EntryStatus::HumanRejected);
  EXPECT_THROW(review_mark(m, "c", Verdict::Approve, "bo"), InvalidTransition);
  EXPECT_EQ(m.find("c")->audit.size(), 1u);
  // a later filter pass leaves it alone
  m = filter_manifest(m, 100.0);
  EXPECT_EQ(m.find("c")->status, EntryStatus::HumanRejected);
  EXPECT_EQ(m.find("c")->audit.size(), 1u);
}

TEST(Review, UnknownIdAndMissingReviewer) {
  EXPECT_THROW(review_mark(filter_manifest(sample()), "zz", Verdict::Approve, "ana"), UnknownEntry);
  EXPECT_THROW(review_mark(filter_manifest(sample()), "a", Verdict::Approve, ""), Error);
}

TEST(Review, UtcTimestampShape) {
  const auto t = utc_now();
  ASSERT_EQ(t.size(), 20u);
  EXPECT_EQ(t[10], 'T');
  EXPECT_EQ(t.back(), 'Z');
}

TEST(Manifest, JsonlRoundTrip) {
  auto m = review_mark(filter_manifest(sample()), "a", Verdict::Approve, "ana", "t0");
  m.entries[1].judge = nlohmann::json{{"layout", 90}};
  const auto text = manifest_to_jsonl(m);
  const auto back = manifest_from_jsonl(text);
  ASSERT_EQ(back.entries.size(), m.entries.size());
  EXPECT_EQ(manifest_to_jsonl(back), text);
  const auto header = nlohmann::json::parse(text.substr(0, text.find('\n')));
  EXPECT_EQ(header.at("counts").at("human_approved"), 2);
  EXPECT_EQ(header.at("counts").at("failed"), 1);
}

TEST(Manifest, RejectsInconsistentFiles) {
  const auto text = manifest_to_jsonl(filter_manifest(sample()));
  const auto nl = text.find('\n');
  auto header = nlohmann::json::parse(text.substr(0, nl));
  auto tampered = header;
  tampered["counts"]["auto_accepted"] = 7;
  EXPECT_THROW(manifest_from_jsonl(tampered.dump() + text.substr(nl)), Error);
  auto versioned = header;
  versioned["manifest_version"] = 99;
  EXPECT_THROW(manifest_from_jsonl(versioned.dump() + text.substr(nl)), Error);
  const auto first_entry = text.substr(nl + 1, text.find('\n', nl + 1) - nl);
  EXPECT_THROW(manifest_from_jsonl(text + first_entry), Error);
  EXPECT_THROW(manifest_from_jsonl(""), Error);
  EXPECT_THROW(manifest_from_jsonl("{not json"), Error);
}

TEST(Manifest, LockedUpdatesDoNotLoseWrites) {
  const auto dir = fresh_dir("geo_manifest_lock");
  const auto path = dir / "m.jsonl";
  Manifest m;
  for (int i = 0; i < 8; ++i) m.entries.push_back(entry("e" + std::to_string(i), 1.0));
  save_manifest(filter_manifest(m), path);
  std::vector<std::thread> pool;
  for (int i = 0; i < 8; ++i)
    pool.emplace_back([&, i] {
      update_manifest(path, [&](Manifest x) { return review_mark(std::move(x), "e" + std::to_string(i), Verdict::Approve, "r"); });
    });
  for (auto& t : pool) t.join();
  const auto done = load_manifest(path);
  EXPECT_EQ(done.counts().at(EntryStatus::HumanApproved), 8u);
}

TEST(Build, SyntheticFixture) {
  const auto dir = fresh_dir("geo_build_fixture");
  save_raster(render(corpus_program(3, 0)), dir / "fig.png");
  BuildConfig cfg;
  cfg.root = dir;
  int judged = 0;
  cfg.judge = [&](const Raster&, const Raster&) {
    ++judged;
    return nlohmann::json{{"layout", 0}};
  };
  const auto q = build_quadruplet(dir / "fig.png", cfg);
  EXPECT_FALSE(q.failed()) << q.error;
  ASSERT_TRUE(q.metrics.has_value());
  EXPECT_LT(q.metrics->cd, 10.0);
  EXPECT_EQ(q.id, "fig");
  EXPECT_EQ(q.input_image, "fig.png");
  EXPECT_EQ(q.rendered_image, "renders/fig.png");
  EXPECT_EQ(q.status, EntryStatus::Pending);
  EXPECT_EQ(judged, 1);
  EXPECT_TRUE(q.attributes.contains("schema_version"));
  EXPECT_TRUE(verify_entry(q, dir));

  // the judge verdict never moves the gate
  Manifest m;
  m.entries.push_back(q);
  EXPECT_EQ(filter_manifest(m).entries[0].status, EntryStatus::AutoAccepted);
}

TEST(Build, UnreadableFileIsRecorded) {
  const auto dir = fresh_dir("geo_build_broken");
  std::ofstream(dir / "broken.png") << "garbage";
  BuildConfig cfg;
  cfg.root = dir;
  const auto q = build_quadruplet(dir / "broken.png", cfg);
  EXPECT_TRUE(q.failed());
  EXPECT_FALSE(q.metrics.has_value());
  EXPECT_FALSE(verify_entry(q));
}

TEST(Build, BlankImage) {
  const auto dir = fresh_dir("geo_build_blank");
  save_raster(Raster(400, 300), dir / "blank.png");
  BuildConfig cfg;
  cfg.root = dir;
  const auto q = build_quadruplet(dir / "blank.png", cfg);
  EXPECT_FALSE(q.failed());
  EXPECT_EQ(q.status, EntryStatus::Pending);
  EXPECT_TRUE(parse_program(q.code).primitives.empty());
  ASSERT_TRUE(q.metrics.has_value());
  EXPECT_DOUBLE_EQ(q.metrics->cd, canvas_diagonal(400, 300));
  EXPECT_TRUE(q.metrics->empty_edges);
}

TEST(Build, ManifestIsOrderedAndJobIndependent) {
  const auto dir = fresh_dir("geo_build_many");
  for (int i = 0; i < 4; ++i) save_raster(render(corpus_program(14, i)), dir / ("img" + std::to_string(3 - i) + ".png"));
  std::ofstream(dir / "notes.txt") << "ignored";
  BuildConfig cfg;
  cfg.root = dir;
  cfg.loop.max_iterations = 3;
  const auto one = build_manifest(dir, cfg, 1);
  const auto two = build_manifest(dir, cfg, 3);
  ASSERT_EQ(one.entries.size(), 4u);
  EXPECT_EQ(one.entries[0].id, "img0");
  EXPECT_EQ(manifest_to_jsonl(one), manifest_to_jsonl(two));
  for (const auto& e : one.entries) EXPECT_TRUE(verify_entry(e, dir)) << e.id;
  EXPECT_THROW(build_manifest(dir / "nope", cfg), IoFailure);
}
