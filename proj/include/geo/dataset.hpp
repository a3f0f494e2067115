#pragma once

// Quadruplet construction (image, attributes, code, rendering), the CD gate
// over a JSONL manifest, and terminal human review with an audit trail.

#include <fcntl.h>
#include <sys/file.h>
#include <unistd.h>

#include <algorithm>
#include <atomic>
#include <chrono>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <mutex>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "geo/error.hpp"
#include "geo/evolution.hpp"
#include "geo/image_io.hpp"
#include "geo/metrics.hpp"
#include "geo/program.hpp"
#include "geo/render.hpp"
#include "geo/skeleton.hpp"
#include "geo/vep.hpp"

namespace geo {

enum class EntryStatus { Pending, AutoAccepted, AutoRejected, HumanApproved, HumanRejected };

inline const char* to_string(EntryStatus s) {
  switch (s) {
    case EntryStatus::Pending: return "pending";
    case EntryStatus::AutoAccepted: return "auto_accepted";
    case EntryStatus::AutoRejected: return "auto_rejected";
    case EntryStatus::HumanApproved: return "human_approved";
    default: return "human_rejected";
  }
}

inline EntryStatus entry_status_from_string(const std::string& s) {
  for (auto v : {EntryStatus::Pending, EntryStatus::AutoAccepted, EntryStatus::AutoRejected, EntryStatus::HumanApproved,
                 EntryStatus::HumanRejected})
    if (s == to_string(v)) return v;
  throw Error("dataset", "unknown entry status '" + s + "'");
}

struct AuditRecord {
  std::string reviewer;
  std::string verdict;  // "approve" | "reject"
  std::string timestamp;
  friend bool operator==(const AuditRecord&, const AuditRecord&) = default;
};

struct Quadruplet {
  std::string id;
  std::string input_image;  // relative to the manifest directory
  std::string input_hash;
  nlohmann::json attributes;  // skeleton JSON
  std::string code;           // DSL
  std::string rendered_image;
  std::string rendered_hash;
  std::optional<MetricBundle> metrics;
  EntryStatus status = EntryStatus::Pending;
  std::string error;  // non-empty: the pipeline failed on this input
  std::optional<nlohmann::json> judge;
  std::vector<AuditRecord> audit;

  bool failed() const { return !error.empty(); }
};

struct Manifest {
  static constexpr int kFormatVersion = 1;

  std::vector<Quadruplet> entries;
  double threshold_px = 10.0;

  // Per-status tallies over valid entries; failures are counted apart.
  std::map<EntryStatus, std::size_t> counts() const {
    std::map<EntryStatus, std::size_t> c;
    for (auto s : {EntryStatus::Pending, EntryStatus::AutoAccepted, EntryStatus::AutoRejected,
                   EntryStatus::HumanApproved, EntryStatus::HumanRejected})
      c[s] = 0;
    for (const auto& e : entries)
      if (!e.failed()) ++c[e.status];
    return c;
  }
  std::size_t failed() const {
    return static_cast<std::size_t>(std::count_if(entries.begin(), entries.end(), [](const Quadruplet& e) { return e.failed(); }));
  }
  Quadruplet* find(const std::string& id) {
    for (auto& e : entries)
      if (e.id == id) return &e;
    return nullptr;
  }
  const Quadruplet* find(const std::string& id) const {
    for (const auto& e : entries)
      if (e.id == id) return &e;
    return nullptr;
  }
};

// ---------------------------------------------------------------------------
// JSON

inline nlohmann::json to_json(const AuditRecord& a) {
  return {{"reviewer", a.reviewer}, {"verdict", a.verdict}, {"timestamp", a.timestamp}};
}

inline nlohmann::json to_json(const Quadruplet& q) {
  nlohmann::json j{{"id", q.id},
                   {"input_image", q.input_image},
                   {"input_hash", q.input_hash},
                   {"attributes", q.attributes},
                   {"code", q.code},
                   {"rendered_image", q.rendered_image},
                   {"rendered_hash", q.rendered_hash},
                   {"status", to_string(q.status)},
                   {"error", q.error}};
  if (q.metrics) {
    j["metrics"] = to_json(*q.metrics);
    j["metrics"]["empty_edges"] = q.metrics->empty_edges;
  } else {
    j["metrics"] = nullptr;
  }
  if (q.judge) j["judge"] = *q.judge;
  j["audit"] = nlohmann::json::array();
  for (const auto& a : q.audit) j["audit"].push_back(to_json(a));
  return j;
}

inline Quadruplet quadruplet_from_json(const nlohmann::json& j) {
  Quadruplet q;
  try {
    q.id = j.at("id").get<std::string>();
    q.input_image = j.value("input_image", std::string());
    q.input_hash = j.value("input_hash", std::string());
    q.attributes = j.value("attributes", nlohmann::json());
    q.code = j.value("code", std::string());
    q.rendered_image = j.value("rendered_image", std::string());
    q.rendered_hash = j.value("rendered_hash", std::string());
    q.status = entry_status_from_string(j.at("status").get<std::string>());
    q.error = j.value("error", std::string());
    if (j.contains("metrics") && !j["metrics"].is_null()) {
      const auto& m = j["metrics"];
      MetricBundle b;
      b.cd = m.at("cd").get<double>();
      b.hd = m.at("hd").get<double>();
      b.ssim = m.value("ssim", 0.0);
      b.rec_edges = m.value("rec_edges", std::size_t{0});
      b.obs_edges = m.value("obs_edges", std::size_t{0});
      b.empty_edges = m.value("empty_edges", false);
      q.metrics = b;
    }
    if (j.contains("judge")) q.judge = j["judge"];
    if (j.contains("audit"))
      for (const auto& a : j["audit"])
        q.audit.push_back({a.at("reviewer").get<std::string>(), a.at("verdict").get<std::string>(),
                           a.at("timestamp").get<std::string>()});
  } catch (const nlohmann::json::exception& e) {
    throw Error("dataset", std::string("malformed manifest entry: ") + e.what());
  }
  return q;
}

inline nlohmann::json manifest_header(const Manifest& m) {
  nlohmann::json counts;
  for (const auto& [s, n] : m.counts()) counts[to_string(s)] = n;
  counts["failed"] = m.failed();
  return {{"manifest_version", Manifest::kFormatVersion},
          {"threshold_px", m.threshold_px},
          {"entries", m.entries.size()},
          {"counts", counts}};
}

// First line: header with threshold and counts; then one entry per line.
inline std::string manifest_to_jsonl(const Manifest& m) {
  std::string out = manifest_header(m).dump() + "\n";
  for (const auto& e : m.entries) out += to_json(e).dump() + "\n";
  return out;
}

// Parses a manifest and checks that the recorded counts match its entries.
inline Manifest manifest_from_jsonl(const std::string& text, const std::string& origin = "manifest") {
  Manifest m;
  std::istringstream in(text);
  std::string line;
  nlohmann::json header;
  int no = 0;
  std::set<std::string> ids;
  while (std::getline(in, line)) {
    ++no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw Error("dataset", origin + ":" + std::to_string(no) + ": " + e.what());
    }
    if (header.is_null()) {
      if (!j.contains("manifest_version")) throw Error("dataset", origin + ": missing manifest header line");
      if (j["manifest_version"].get<int>() != Manifest::kFormatVersion)
        throw Error("dataset", origin + ": unsupported manifest version");
      header = j;
      m.threshold_px = j.value("threshold_px", 10.0);
      continue;
    }
    auto q = quadruplet_from_json(j);
    if (!ids.insert(q.id).second) throw Error("dataset", origin + ": duplicate entry id '" + q.id + "'");
    m.entries.push_back(std::move(q));
  }
  if (header.is_null()) throw Error("dataset", origin + ": empty manifest");
  if (header.value("entries", m.entries.size()) != m.entries.size() || header["counts"] != manifest_header(m)["counts"])
    throw Error("dataset", origin + ": recorded counts do not reconcile with entries");
  return m;
}

// ---------------------------------------------------------------------------
// File access under an exclusive advisory lock

class ManifestLock {
public:
  explicit ManifestLock(const std::filesystem::path& manifest) {
    lock_path_ = manifest.string() + ".lock";
    fd_ = ::open(lock_path_.c_str(), O_RDWR | O_CREAT, 0644);
    if (fd_ < 0) throw IoFailure("cannot open lock file " + lock_path_);
    if (::flock(fd_, LOCK_EX) != 0) {
      ::close(fd_);
      throw IoFailure("cannot lock " + lock_path_);
    }
  }
  ~ManifestLock() {
    ::flock(fd_, LOCK_UN);
    ::close(fd_);
  }
  ManifestLock(const ManifestLock&) = delete;
  ManifestLock& operator=(const ManifestLock&) = delete;

private:
  std::string lock_path_;
  int fd_ = -1;
};

inline Manifest load_manifest(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoFailure("cannot read manifest " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return manifest_from_jsonl(ss.str(), path.string());
}

// Write-then-rename so readers never see a partial manifest.
inline void save_manifest(const Manifest& m, const std::filesystem::path& path) {
  const auto tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoFailure("cannot write manifest " + tmp);
    out << manifest_to_jsonl(m);
    if (!out) throw IoFailure("short write on " + tmp);
  }
  std::filesystem::rename(tmp, path);
}

// Loads, applies `edit`, and saves while holding the lock.
template <class F>
Manifest update_manifest(const std::filesystem::path& path, F&& edit) {
  ManifestLock lock(path);
  Manifest m = load_manifest(path);
  m = edit(std::move(m));
  save_manifest(m, path);
  return m;
}

// ---------------------------------------------------------------------------
// Construction

struct BuildConfig {
  std::filesystem::path root = ".";  // manifest directory; paths are stored relative to it
  std::filesystem::path render_dir = "renders";
  LoopConfig loop;
  SkeletonConfig skeleton;
  // attaches a judge verdict; never affects status
  std::function<nlohmann::json(const Raster& obs, const Raster& rendered)> judge;
  LoopHooks hooks;
};

namespace dataset_detail {

inline std::string relative_to(const std::filesystem::path& p, const std::filesystem::path& root) {
  std::error_code ec;
  const auto rel = std::filesystem::relative(std::filesystem::absolute(p), std::filesystem::absolute(root), ec);
  return (ec || rel.empty() ? p : rel).generic_string();
}

}  // namespace dataset_detail

// Runs skeleton + loop on one image. Pipeline failures come back as an entry
// with `error` set rather than as an exception.
inline Quadruplet build_quadruplet(const std::filesystem::path& input, const BuildConfig& cfg,
                                   std::string id = {}) {
  Quadruplet q;
  q.id = id.empty() ? input.stem().string() : std::move(id);
  q.input_image = dataset_detail::relative_to(input, cfg.root);
  try {
    const Raster obs = load_raster(input);
    q.input_hash = content_hash(obs);
    const auto skel = build_skeleton(obs, std::nullopt, cfg.skeleton);
    q.attributes = to_json(skel);
    const auto result = run_loop(obs, std::nullopt, skel, cfg.loop, cfg.hooks);
    const Program& best = result.first;
    q.code = serialize_program(best);
    const Raster rendered = render(best);
    q.metrics = measure(rendered, obs, cfg.loop.objective.edge_threshold);
    const auto dir = cfg.root / cfg.render_dir;
    std::filesystem::create_directories(dir);
    const auto out = dir / (q.id + ".png");
    save_raster(rendered, out);
    q.rendered_image = dataset_detail::relative_to(out, cfg.root);
    q.rendered_hash = content_hash(rendered);
    if (cfg.judge) q.judge = cfg.judge(obs, rendered);
  } catch (const Error& e) {
    q.error = e.module() + ": " + e.what();
  } catch (const std::exception& e) {
    q.error = std::string("dataset: ") + e.what();
  }
  q.status = EntryStatus::Pending;
  return q;
}

inline bool is_image_file(const std::filesystem::path& p) {
  const auto ext = detail::lower_ext(p);
  return ext == ".png" || ext == ".pgm" || ext == ".ppm";
}

// Every image in `dir` (sorted by name), processed by `jobs` workers; entry
// order follows file order regardless of scheduling.
inline Manifest build_manifest(const std::filesystem::path& dir, const BuildConfig& cfg, int jobs = 1) {
  if (!std::filesystem::is_directory(dir)) throw IoFailure("not a directory: " + dir.string());
  std::vector<std::filesystem::path> files;
  for (const auto& e : std::filesystem::directory_iterator(dir))
    if (e.is_regular_file() && is_image_file(e.path())) files.push_back(e.path());
  std::sort(files.begin(), files.end());
  std::vector<std::string> ids;
  std::map<std::string, int> seen;
  for (const auto& f : files) {
    std::string id = f.stem().string();
    if (seen[id]++) id += "_" + std::to_string(seen[id] - 1);
    ids.push_back(id);
  }
  Manifest m;
  m.entries.resize(files.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i; (i = next++) < files.size();) m.entries[i] = build_quadruplet(files[i], cfg, ids[i]);
  };
  const int n = std::max(1, std::min<int>(jobs, static_cast<int>(files.size())));
  std::vector<std::thread> pool;
  for (int t = 1; t < n; ++t) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
  return m;
}

// Re-renders an entry's code and compares with the recorded hash and, when
// `root` is given, with the stored rendering.
inline bool verify_entry(const Quadruplet& q, const std::optional<std::filesystem::path>& root = std::nullopt) {
  if (q.failed()) return false;
  const Raster again = render(parse_program(q.code));
  if (content_hash(again) != q.rendered_hash) return false;
  if (root) return content_hash(load_raster(*root / q.rendered_image)) == q.rendered_hash;
  return true;
}

// ---------------------------------------------------------------------------
// Gate and review

// Strict CD gate. Human verdicts are final; failed entries are rejected.
inline Manifest filter_manifest(Manifest m, double threshold_px = 10.0) {
  m.threshold_px = threshold_px;
  for (auto& e : m.entries) {
    if (e.status == EntryStatus::HumanApproved || e.status == EntryStatus::HumanRejected) continue;
    const bool pass = !e.failed() && e.metrics && e.metrics->cd < threshold_px;
    e.status = pass ? EntryStatus::AutoAccepted : EntryStatus::AutoRejected;
  }
  return m;
}

inline std::string utc_now() {
  const auto t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

enum class Verdict { Approve, Reject };

// Only AutoAccepted entries can be reviewed, and only once.
inline Manifest review_mark(Manifest m, const std::string& id, Verdict verdict, const std::string& reviewer,
                            const std::string& timestamp = utc_now()) {
  if (reviewer.empty()) throw Error("dataset", "reviewer name is required");
  Quadruplet* e = m.find(id);
  if (!e) throw UnknownEntry(id);
  const EntryStatus to = verdict == Verdict::Approve ? EntryStatus::HumanApproved : EntryStatus::HumanRejected;
  if (e->status != EntryStatus::AutoAccepted) throw InvalidTransition(id, to_string(e->status), to_string(to));
  e->status = to;
  e->audit.push_back({reviewer, verdict == Verdict::Approve ? "approve" : "reject", timestamp});
  return m;
}

}  // namespace geo
