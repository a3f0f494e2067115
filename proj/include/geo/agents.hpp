#pragma once

// Gateway to a chat-completion endpoint for the extract/verify/generate/
// refine/judge roles, plus a scripted transport for offline runs.

#include <openssl/evp.h>

#include <atomic>
#include <chrono>
#include <condition_variable>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <httplib.h>
#include <json.hpp>

#include "geo/error.hpp"
#include "geo/evolution.hpp"
#include "geo/image_io.hpp"
#include "geo/program.hpp"
#include "geo/prompts.hpp"
#include "geo/skeleton.hpp"
#include "geo/vep.hpp"

namespace geo {

using Bytes = std::vector<unsigned char>;

struct AgentRequest {
  static constexpr std::size_t kMaxImages = 4;
  static constexpr std::size_t kMaxImageBytes = 8u << 20;

  Role role = Role::Generate;
  std::string prompt;
  std::vector<Bytes> images;  // PNG
  int max_tokens = 2048;
  double temperature = 0.0;

  void validate() const {
    if (prompt.empty()) throw Error("agents", "request prompt is empty");
    if (images.size() > kMaxImages) throw Error("agents", "at most 4 images per request");
    for (const auto& im : images)
      if (im.size() > kMaxImageBytes) throw Error("agents", "image attachment exceeds 8 MiB");
    if (max_tokens < 1) throw Error("agents", "max_tokens must be positive");
  }
};

struct TokenUsage {
  int prompt_tokens = 0;
  int completion_tokens = 0;
};

struct AgentResponse {
  std::string text;
  TokenUsage usage;
  long latency_ms = 0;  // the successful exchange only
  int attempts = 1;
};

struct EndpointConfig {
  std::string endpoint;
  std::string key;
  std::string model = "default";
  int timeout_s = 60;
  std::vector<int> backoff_s{1, 2, 4};  // one entry per retry
  int max_in_flight = 4;

  static EndpointConfig from_env() {
    EndpointConfig c;
    if (const char* v = std::getenv("GEO_AGENT_ENDPOINT")) c.endpoint = v;
    if (const char* v = std::getenv("GEO_AGENT_KEY")) c.key = v;
    if (const char* v = std::getenv("GEO_AGENT_MODEL"); v && *v) c.model = v;
    return c;
  }
};

namespace agent_detail {

inline std::string hex(const unsigned char* p, std::size_t n) {
  static const char* digits = "0123456789abcdef";
  std::string s;
  s.reserve(2 * n);
  for (std::size_t i = 0; i < n; ++i) {
    s += digits[p[i] >> 4];
    s += digits[p[i] & 15];
  }
  return s;
}

inline std::string base64(const Bytes& b) {
  std::string out(4 * ((b.size() + 2) / 3), '\0');
  const int n = EVP_EncodeBlock(reinterpret_cast<unsigned char*>(out.data()), b.data(), static_cast<int>(b.size()));
  out.resize(static_cast<std::size_t>(n));
  return out;
}

inline std::string excerpt(const std::string& body, std::size_t n = 200) {
  return body.size() <= n ? body : body.substr(0, n) + "...";
}

// Counting gate on in-flight requests.
class Gate {
public:
  explicit Gate(int cap) : free_(std::max(cap, 1)) {}
  void acquire() {
    std::unique_lock lk(m_);
    cv_.wait(lk, [&] { return free_ > 0; });
    --free_;
  }
  void release() {
    {
      std::lock_guard lk(m_);
      ++free_;
    }
    cv_.notify_one();
  }

private:
  std::mutex m_;
  std::condition_variable cv_;
  int free_;
};

}  // namespace agent_detail

// SHA-256 over role, prompt and attachments; the key of scripted replies.
inline std::string request_hash(const AgentRequest& r) {
  EVP_MD_CTX* ctx = EVP_MD_CTX_new();
  if (!ctx) throw Error("agents", "cannot allocate digest context");
  EVP_DigestInit_ex(ctx, EVP_sha256(), nullptr);
  const std::string head = std::string(to_string(r.role)) + "\n" + r.prompt;
  EVP_DigestUpdate(ctx, head.data(), head.size());
  for (const auto& im : r.images) EVP_DigestUpdate(ctx, im.data(), im.size());
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int n = 0;
  EVP_DigestFinal_ex(ctx, md, &n);
  EVP_MD_CTX_free(ctx);
  return agent_detail::hex(md, n);
}

// Chat-completions wire body with base64 PNG parts.
inline std::string wire_body(const AgentRequest& r, const std::string& model) {
  nlohmann::json content = nlohmann::json::array();
  content.push_back({{"type", "text"}, {"text", r.prompt}});
  for (const auto& im : r.images)
    content.push_back({{"type", "image_url"}, {"image_url", {{"url", "data:image/png;base64," + agent_detail::base64(im)}}}});
  nlohmann::json j{{"model", model},
                   {"temperature", r.temperature},
                   {"max_tokens", r.max_tokens},
                   {"messages", nlohmann::json::array({{{"role", "user"}, {"content", content}}})}};
  return j.dump();
}

// ---------------------------------------------------------------------------
// Transports

struct HttpReply {
  int status = 0;  // 0: no HTTP exchange happened
  std::string body;
  bool timed_out = false;
  std::string error;
  bool final = false;  // a retry cannot change the outcome
};

class Transport {
public:
  virtual ~Transport() = default;
  virtual HttpReply post(const AgentRequest& req, const std::string& body, const EndpointConfig& cfg) = 0;
  virtual bool needs_credentials() const { return true; }
};

class HttpTransport : public Transport {
public:
  HttpReply post(const AgentRequest&, const std::string& body, const EndpointConfig& cfg) override {
    const auto scheme_end = cfg.endpoint.find("://");
    if (scheme_end == std::string::npos) return {0, "", false, "endpoint must be an absolute URL"};
    const auto path_start = cfg.endpoint.find('/', scheme_end + 3);
    const std::string origin = cfg.endpoint.substr(0, path_start);
    const std::string path = path_start == std::string::npos ? "/" : cfg.endpoint.substr(path_start);
    httplib::Client cli(origin);
    cli.set_connection_timeout(cfg.timeout_s, 0);
    cli.set_read_timeout(cfg.timeout_s, 0);
    cli.set_write_timeout(cfg.timeout_s, 0);
    const httplib::Headers headers{{"Authorization", "Bearer " + cfg.key}};
    const auto t0 = std::chrono::steady_clock::now();
    auto res = cli.Post(path, headers, body, "application/json");
    if (!res) {
      const auto err = res.error();
      const double elapsed = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
      const bool timed_out = err == httplib::Error::ConnectionTimeout ||
                             (err == httplib::Error::Read && elapsed >= cfg.timeout_s - 0.5);
      return {0, "", timed_out, httplib::to_string(err)};
    }
    return {res->status, res->body, false, ""};
  }
};

// Canned replies, matched by request hash first and then in file order.
// Script lines (JSONL): {"hash"?: hex, "status"?: int, "reply"?: text,
// "body"?: raw response body, "timeout"?: bool}.
class ScriptedTransport : public Transport {
public:
  struct Entry {
    std::optional<std::string> hash;
    int status = 200;
    std::string reply;
    std::optional<std::string> raw_body;
    bool timeout = false;
    bool used = false;
  };

  ScriptedTransport() = default;
  explicit ScriptedTransport(std::vector<Entry> entries) : entries_(std::move(entries)) {}

  static std::shared_ptr<ScriptedTransport> from_jsonl(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoFailure("cannot read agent script " + path);
    std::vector<Entry> entries;
    std::string line;
    int no = 0;
    while (std::getline(in, line)) {
      ++no;
      if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
      nlohmann::json j;
      try {
        j = nlohmann::json::parse(line);
      } catch (const nlohmann::json::exception& e) {
        throw Error("agents", path + ":" + std::to_string(no) + ": bad script line: " + e.what());
      }
      Entry e;
      if (j.contains("hash")) e.hash = j.at("hash").get<std::string>();
      e.status = j.value("status", 200);
      e.reply = j.value("reply", std::string());
      if (j.contains("body")) e.raw_body = j.at("body").get<std::string>();
      e.timeout = j.value("timeout", false);
      entries.push_back(std::move(e));
    }
    return std::make_shared<ScriptedTransport>(std::move(entries));
  }

  void push(Entry e) {
    std::lock_guard lk(m_);
    entries_.push_back(std::move(e));
  }

  HttpReply post(const AgentRequest& req, const std::string&, const EndpointConfig&) override {
    std::lock_guard lk(m_);
    ++calls_;
    const std::string h = request_hash(req);
    Entry* pick = nullptr;
    for (auto& e : entries_)
      if (!e.used && e.hash && *e.hash == h) {
        pick = &e;
        break;
      }
    if (!pick)
      for (auto& e : entries_)
        if (!e.used && !e.hash) {
          pick = &e;
          break;
        }
    if (!pick) return {0, "", false, "agent script exhausted (request " + h.substr(0, 12) + ")", true};
    pick->used = true;
    if (pick->timeout) return {0, "", true, "scripted timeout"};
    if (pick->raw_body) return {pick->status, *pick->raw_body, false, ""};
    if (pick->status != 200) return {pick->status, pick->reply, false, ""};
    nlohmann::json body{{"choices", nlohmann::json::array({{{"message", {{"role", "assistant"}, {"content", pick->reply}}}}})},
                        {"usage", {{"prompt_tokens", static_cast<int>(req.prompt.size() / 4)},
                                   {"completion_tokens", static_cast<int>(pick->reply.size() / 4)}}}};
    return {200, body.dump(), false, ""};
  }

  bool needs_credentials() const override { return false; }
  int calls() const {
    std::lock_guard lk(m_);
    return calls_;
  }

private:
  mutable std::mutex m_;
  std::vector<Entry> entries_;
  int calls_ = 0;
};

// ---------------------------------------------------------------------------
// Gateway

struct RunLogEntry {
  Role role;
  std::string request_hash;
  std::string template_version;
  double temperature = 0.0;
  std::string prompt;  // verbatim at temperature 0
  std::string reply;
  long latency_ms = 0;
  int attempts = 0;
  std::string error;
};

inline nlohmann::json to_json(const RunLogEntry& e) {
  return {{"role", to_string(e.role)},     {"request_hash", e.request_hash}, {"template_version", e.template_version},
          {"temperature", e.temperature},  {"prompt", e.prompt},             {"reply", e.reply},
          {"latency_ms", e.latency_ms},    {"attempts", e.attempts},         {"error", e.error}};
}

class Gateway {
public:
  using Sleeper = std::function<void(std::chrono::milliseconds)>;

  Gateway(EndpointConfig cfg, std::shared_ptr<Transport> transport, PromptTemplates templates = {})
      : cfg_(std::move(cfg)), transport_(std::move(transport)), templates_(std::move(templates)),
        gate_(cfg_.max_in_flight), sleep_([](std::chrono::milliseconds d) { std::this_thread::sleep_for(d); }) {
    if (!transport_) throw Error("agents", "gateway needs a transport");
  }

  void set_sleeper(Sleeper s) { sleep_ = std::move(s); }
  // Appends each log entry as one JSON line to `path`.
  void set_run_log_path(std::string path) { log_path_ = std::move(path); }

  const EndpointConfig& config() const { return cfg_; }
  const PromptTemplates& templates() const { return templates_; }
  int in_flight_peak() const { return peak_.load(); }

  std::vector<RunLogEntry> run_log() const {
    std::lock_guard lk(log_m_);
    return log_;
  }

  AgentResponse complete(const AgentRequest& req) {
    req.validate();
    if (transport_->needs_credentials()) {
      if (cfg_.endpoint.empty()) throw CredentialMissing("GEO_AGENT_ENDPOINT");
      if (cfg_.key.empty()) throw CredentialMissing("GEO_AGENT_KEY");
    }
    const std::string body = wire_body(req, cfg_.model);
    RunLogEntry entry{req.role, request_hash(req), templates_.version, req.temperature,
                      req.temperature == 0.0 ? req.prompt : std::string(), "", 0, 0, ""};

    gate_.acquire();
    const int now = ++active_;
    for (int p = peak_.load(); now > p && !peak_.compare_exchange_weak(p, now);) {
    }
    struct Leave {
      Gateway& g;
      ~Leave() {
        --g.active_;
        g.gate_.release();
      }
    } leave{*this};

    HttpReply last;
    const int attempts = 1 + static_cast<int>(cfg_.backoff_s.size());
    for (int a = 1; a <= attempts; ++a) {
      const auto t0 = std::chrono::steady_clock::now();
      last = transport_->post(req, body, cfg_);
      const long ms = static_cast<long>(
          std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::steady_clock::now() - t0).count());
      entry.attempts = a;
      if (last.status == 200) {
        AgentResponse out = decode(last);
        out.latency_ms = ms;
        out.attempts = a;
        entry.reply = out.text;
        entry.latency_ms = ms;
        record(entry);
        return out;
      }
      const bool retryable = !last.final && (last.status == 0 || last.status == 429 || last.status >= 500);
      if (!retryable || a == attempts) break;
      sleep_(std::chrono::seconds(cfg_.backoff_s[static_cast<std::size_t>(a - 1)]));
    }
    if (last.timed_out) {
      entry.error = "timeout";
      record(entry);
      throw AgentTimeout(cfg_.timeout_s);
    }
    entry.error = last.status ? "status " + std::to_string(last.status) : last.error;
    record(entry);
    throw TransportError(last.status, agent_detail::excerpt(last.status ? last.body : last.error));
  }

  // Template for `role` with placeholders filled.
  std::string prompt(Role role, const std::map<std::string, std::string>& values) const {
    return fill_template(templates_.text.at(role), values);
  }

private:
  static AgentResponse decode(const HttpReply& r) {
    AgentResponse out;
    try {
      const auto j = nlohmann::json::parse(r.body);
      out.text = j.at("choices").at(0).at("message").at("content").get<std::string>();
      if (j.contains("usage")) {
        out.usage.prompt_tokens = j["usage"].value("prompt_tokens", 0);
        out.usage.completion_tokens = j["usage"].value("completion_tokens", 0);
      }
    } catch (const nlohmann::json::exception&) {
      throw TransportError(r.status, "malformed completion body: " + agent_detail::excerpt(r.body));
    }
    return out;
  }

  void record(const RunLogEntry& e) {
    std::lock_guard lk(log_m_);
    log_.push_back(e);
    if (!log_path_.empty()) {
      std::ofstream out(log_path_, std::ios::app);
      out << to_json(e).dump() << "\n";
    }
  }

  EndpointConfig cfg_;
  std::shared_ptr<Transport> transport_;
  PromptTemplates templates_;
  agent_detail::Gate gate_;
  Sleeper sleep_;
  std::atomic<int> active_{0};
  std::atomic<int> peak_{0};
  mutable std::mutex log_m_;
  std::vector<RunLogEntry> log_;
  std::string log_path_;
};

// ---------------------------------------------------------------------------
// Reply parsing

namespace agent_detail {

inline bool is_statement_keyword(std::string_view w) {
  for (const char* k : {"canvas", "defaults", "style", "point", "segment", "circle", "arc", "polyline", "label", "rightangle", "tick"})
    if (w == k) return true;
  return false;
}

inline std::string first_word(std::string_view line) {
  const auto b = line.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = line.find_first_of(" \t\r", b);
  return std::string(line.substr(b, e == std::string_view::npos ? std::string_view::npos : e - b));
}

// The first fenced block's contents, or the whole text.
inline std::string program_text(const std::string& reply) {
  const auto open = reply.find("```");
  if (open == std::string::npos) return reply;
  const auto nl = reply.find('\n', open);
  if (nl == std::string::npos) return {};
  const auto close = reply.find("```", nl + 1);
  return reply.substr(nl + 1, close == std::string::npos ? std::string::npos : close - nl - 1);
}

}  // namespace agent_detail

// Extracts and parses the program in an agent reply. Text with no DSL
// statement at all is NoProgramFound; malformed DSL raises SyntaxError. When
// `canvas` is given and the program omits its canvas line, one is supplied.
inline Program parse_agent_program(const std::string& reply, std::optional<std::pair<int, int>> canvas = std::nullopt) {
  std::string text = agent_detail::program_text(reply);
  std::istringstream lines(text);
  std::string line, first;
  while (std::getline(lines, line)) {
    const auto w = agent_detail::first_word(line);
    if (w.empty() || w[0] == '#') continue;
    first = w;
    break;
  }
  if (!agent_detail::is_statement_keyword(first)) throw NoProgramFound();
  if (first != "canvas" && canvas)
    text = "canvas " + std::to_string(canvas->first) + " " + std::to_string(canvas->second) + "\n" + text;
  return parse_program(text);
}

struct JudgeScores {
  int structural_consistency = 0;
  int point_positioning = 0;
  int segment_arc_precision = 0;
  int layout = 0;
};

// Reads the judge's JSON object (the first {...} in the reply); each field
// must be an integer in [0, 100].
inline JudgeScores parse_judge_reply(const std::string& reply) {
  const auto b = reply.find('{'), e = reply.rfind('}');
  if (b == std::string::npos || e == std::string::npos || e < b) throw Error("agents", "judge reply has no JSON object");
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(reply.substr(b, e - b + 1));
  } catch (const nlohmann::json::exception& ex) {
    throw Error("agents", std::string("judge reply is not JSON: ") + ex.what());
  }
  auto field = [&](const char* k) {
    if (!j.contains(k) || !j[k].is_number_integer()) throw Error("agents", std::string("judge reply lacks integer ") + k);
    const int v = j[k].get<int>();
    if (v < 0 || v > 100) throw Error("agents", std::string("judge score out of range: ") + k);
    return v;
  };
  return {field("structural_consistency"), field("point_positioning"), field("segment_arc_precision"), field("layout")};
}

inline nlohmann::json to_json(const JudgeScores& s) {
  return {{"structural_consistency", s.structural_consistency},
          {"point_positioning", s.point_positioning},
          {"segment_arc_precision", s.segment_arc_precision},
          {"layout", s.layout}};
}

inline double relation_tolerance(RelationKind k, const SkeletonConfig& cfg) {
  switch (k) {
    case RelationKind::Parallel:
    case RelationKind::Perpendicular: return cfg.angle_tolerance_deg;
    case RelationKind::Collinear: return cfg.collinear_tolerance_px;
    case RelationKind::Tangent: return cfg.tangent_tolerance_px;
    case RelationKind::EqualLength: return cfg.equal_length_tolerance;
    default: return cfg.point_tolerance_px;
  }
}

// ---------------------------------------------------------------------------
// Agent roles over the gateway

class GatewayAgent : public ProgramAgent, public SemanticChannel {
public:
  explicit GatewayAgent(Gateway& g, SkeletonConfig skel_cfg = {}) : g_(g), skel_cfg_(skel_cfg) {}

  Program generate(const GeoSkeleton& skel, const std::optional<std::string>& text, const Raster& obs) override {
    AgentRequest r;
    r.role = Role::Generate;
    r.prompt = g_.prompt(Role::Generate, {{"DSL", prompt_text::kGrammar},
                                          {"SKELETON_JSON", to_json(skel).dump()},
                                          {"TEXT", text.value_or("(none)")}});
    r.images = {encode_png_bytes(obs)};
    return parse_agent_program(g_.complete(r).text, std::pair{obs.width(), obs.height()});
  }

  Program refine(const Program& current, const DiffReport& report, const GeoSkeleton& skel, const Raster& obs) override {
    AgentRequest r;
    r.role = Role::Refine;
    r.prompt = g_.prompt(Role::Refine, {{"DSL", prompt_text::kGrammar},
                                        {"PROGRAM", serialize_program(current)},
                                        {"DIFF_JSON", to_json(report).dump()},
                                        {"SKELETON_JSON", to_json(skel).dump()}});
    r.images = {encode_png_bytes(obs)};
    if (report.diff_image.width() == obs.width()) r.images.push_back(encode_png_bytes(report.diff_image));
    return parse_agent_program(g_.complete(r).text, std::pair{obs.width(), obs.height()});
  }

  // Transport failures leave the deterministic result in place.
  std::optional<std::vector<Anchor>> verify(const std::vector<Anchor>& anchors, const Raster& img) override {
    if (anchors.empty()) return std::nullopt;
    AgentRequest r;
    r.role = Role::Verify;
    r.prompt = g_.prompt(Role::Verify, {{"SKELETON_JSON", anchors_to_json(anchors).dump()}});
    r.images = {encode_png_bytes(img)};
    try {
      const auto text = g_.complete(r).text;
      const auto b = text.find('['), e = text.rfind(']');
      if (b == std::string::npos || e == std::string::npos || e < b) return std::nullopt;
      const auto j = nlohmann::json::parse(text.substr(b, e - b + 1));
      std::vector<Anchor> kept;
      for (const auto& v : j) {
        if (!v.is_number_integer()) return std::nullopt;
        const auto i = v.get<long>();
        if (i < 0 || i >= static_cast<long>(anchors.size())) return std::nullopt;
        kept.push_back(anchors[static_cast<std::size_t>(i)]);
      }
      return kept;
    } catch (const AgentError& e) {
      last_error_ = e.what();
    } catch (const nlohmann::json::exception&) {
    }
    return std::nullopt;
  }

  std::vector<Relation> extract(const GeoSkeleton& skel, const std::string& text, const Raster& img) override {
    AgentRequest r;
    r.role = Role::Extract;
    r.prompt = g_.prompt(Role::Extract, {{"SKELETON_JSON", to_json(skel).dump()}, {"TEXT", text}});
    r.images = {encode_png_bytes(img)};
    std::vector<Relation> out;
    try {
      const auto reply = g_.complete(r).text;
      const auto b = reply.find('['), e = reply.rfind(']');
      if (b == std::string::npos || e == std::string::npos || e < b) return out;
      for (const auto& item : nlohmann::json::parse(reply.substr(b, e - b + 1))) {
        const auto kind = relation_kind_from_string(item.value("kind", std::string()));
        if (!kind || !item.contains("operands")) continue;
        Relation rel{*kind, item["operands"].get<std::vector<std::string>>(), 0.0, relation_tolerance(*kind, skel_cfg_)};
        out.push_back(std::move(rel));
      }
    } catch (const AgentError& e) {
      last_error_ = e.what();
    } catch (const nlohmann::json::exception&) {
    }
    return out;
  }

  JudgeScores judge(const Raster& reference, const Raster& reconstruction) {
    AgentRequest r;
    r.role = Role::Judge;
    r.prompt = g_.prompt(Role::Judge, {});
    r.images = {encode_png_bytes(reference), encode_png_bytes(reconstruction)};
    return parse_judge_reply(g_.complete(r).text);
  }

  const std::string& last_error() const { return last_error_; }

private:
  Gateway& g_;
  SkeletonConfig skel_cfg_;
  std::string last_error_;
};

}  // namespace geo
