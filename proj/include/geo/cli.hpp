#pragma once

// The `geo` command line: subcommand parsing, flat config files, output
// placement and the exit-code contract (0 ok, 1 domain error, 2 usage,
// 3 agent/transport).

#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <iostream>
#include <map>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "geo/agents.hpp"
#include "geo/anchoring.hpp"
#include "geo/corpus.hpp"
#include "geo/dataset.hpp"
#include "geo/error.hpp"
#include "geo/evolution.hpp"
#include "geo/image_io.hpp"
#include "geo/metrics.hpp"
#include "geo/program.hpp"
#include "geo/render.hpp"
#include "geo/skeleton.hpp"
#include "geo/vep.hpp"

namespace geo::cli {

enum ExitCode { kOk = 0, kDomainError = 1, kUsageError = 2, kAgentError = 3 };

class UsageError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

// key=value lines; '#' starts a comment.
inline std::map<std::string, std::string> read_flat_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw UsageError("cannot read config file " + path);
  std::map<std::string, std::string> kv;
  std::string line;
  int no = 0;
  auto trim = [](std::string s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return std::string();
    return s.substr(b, s.find_last_not_of(" \t\r") - b + 1);
  };
  while (std::getline(in, line)) {
    ++no;
    if (const auto h = line.find('#'); h != std::string::npos) line.erase(h);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw UsageError(path + ":" + std::to_string(no) + ": expected key=value");
    kv[trim(line.substr(0, eq))] = trim(line.substr(eq + 1));
  }
  return kv;
}

// Checks run by `geo selftest`. The distance oracle is a plain double loop,
// independent of the distance-transform path it checks.
struct SelftestHooks {
  std::function<double(const std::vector<PixelCoord>&, const std::vector<PixelCoord>&)> chamfer = [](const auto& a, const auto& b) {
    return chamfer_distance(a, b);
  };
  std::function<double(const std::vector<PixelCoord>&, const std::vector<PixelCoord>&)> hausdorff = [](const auto& a, const auto& b) {
    return hausdorff_distance(a, b);
  };
};

namespace detail {

inline std::pair<double, double> oracle_cd_hd(const std::vector<PixelCoord>& a, const std::vector<PixelCoord>& b) {
  auto directed = [](const std::vector<PixelCoord>& from, const std::vector<PixelCoord>& to) {
    double sum = 0, mx = 0;
    for (const auto& p : from) {
      double best = std::numeric_limits<double>::infinity();
      for (const auto& q : to) best = std::min(best, std::hypot(double(p.x - q.x), double(p.y - q.y)));
      sum += best;
      mx = std::max(mx, best);
    }
    return std::pair{sum / static_cast<double>(from.size()), mx};
  };
  const auto [ma, xa] = directed(a, b);
  const auto [mb, xb] = directed(b, a);
  return {0.5 * (ma + mb), std::max(xa, xb)};
}

inline void draw_cross(Raster& r, Point2D p, Rgb c, int arm = 5) {
  const int cx = static_cast<int>(std::lround(p.x)), cy = static_cast<int>(std::lround(p.y));
  for (int d = -arm; d <= arm; ++d) {
    if (r.contains(cx + d, cy)) r.set(cx + d, cy, c);
    if (r.contains(cx, cy + d)) r.set(cx, cy + d, c);
  }
}

inline Rgb anchor_color(AnchorKind k) {
  switch (k) {
    case AnchorKind::Corner: return {230, 30, 30};
    case AnchorKind::Junction: return {30, 160, 30};
    case AnchorKind::Endpoint: return {30, 60, 230};
    default: return {200, 120, 0};
  }
}

inline std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoFailure("cannot read " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void write_text(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoFailure("cannot write " + path.string());
  out << text;
}

}  // namespace detail

// Returns 0 when every check passes; one PASS/FAIL line per check.
inline int selftest(std::ostream& out, const SelftestHooks& hooks = {}) {
  bool all = true;
  auto report = [&](const std::string& name, bool ok, const std::string& detail) {
    out << "[selftest] " << name << ": " << (ok ? "PASS" : "FAIL") << " (" << detail << ")\n";
    all = all && ok;
  };

  {
    corpus_detail::Rng rng(20240611);
    int bad = 0;
    for (int t = 0; t < 50; ++t) {
      std::vector<PixelCoord> a, b;
      const int na = rng.integer(1, 120), nb = rng.integer(1, 120);
      for (int i = 0; i < na; ++i) a.push_back({rng.integer(0, 299), rng.integer(0, 299)});
      for (int i = 0; i < nb; ++i) b.push_back({rng.integer(0, 299), rng.integer(0, 299)});
      const auto [cd, hd] = detail::oracle_cd_hd(a, b);
      const double e = std::max(std::abs(hooks.chamfer(a, b) - cd), std::abs(hooks.hausdorff(a, b) - hd));
      if (e > 1e-9) ++bad;
    }
    std::ostringstream d;
    d << "50 random pairs, " << bad << " mismatches";
    report("distance oracle", bad == 0, d.str());
  }
  {
    const Program p = corpus_program(5, 1);
    const std::string h1 = content_hash(render(p)), h2 = content_hash(render(parse_program(serialize_program(p))));
    report("render determinism", h1 == h2, "hash " + h1);
  }
  {
    const Program truth = corpus_program(5, 0);
    const Raster obs = render(truth);
    const auto skel = build_skeleton(obs);
    const auto [best, st] = run_loop(obs, std::nullopt, skel);
    const auto m = measure(render(best), obs);
    std::ostringstream d;
    d << "cd " << std::fixed << std::setprecision(3) << m.cd << " px, hd " << m.hd << " px";
    report("round trip", m.cd < 10.0, d.str());
  }
  out << "[selftest] " << (all ? "all checks passed" : "FAILED") << "\n";
  return all ? kOk : kDomainError;
}

// ---------------------------------------------------------------------------

inline int dispatch(const std::vector<std::string>& args, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  CLI::App app{"Reconstruct geometric figures as editable programs.", "geo"};
  app.require_subcommand(1);
  app.fallthrough();

  std::string config_path, out_dir = "geo-out", agent_mock;
  bool as_json = false;
  std::uint64_t seed = 0;
  int jobs = 1;
  auto* o_config = app.add_option("--config", config_path, "flat key=value file (flags override it)");
  auto* o_json = app.add_flag("--json", as_json, "structured output");
  auto* o_out_dir = app.add_option("--out-dir", out_dir, "directory for file outputs");
  app.add_option("--seed", seed, "reserved; the pipeline is deterministic");
  auto* o_mock = app.add_option("--agent-mock", agent_mock, "scripted agent replies (JSONL)");
  auto* o_jobs = app.add_option("--jobs", jobs, "parallel samples for dataset build")->check(CLI::PositiveNumber);

  // render
  std::string in_path, out_path;
  auto* c_render = app.add_subcommand("render", "render a .geo program to PNG");
  c_render->add_option("program", in_path, "input .geo")->required();
  c_render->add_option("-o,--output", out_path, "output PNG");

  // anchors / skeleton
  std::string image_path, text_path;
  auto* c_anchors = app.add_subcommand("anchors", "detect and verify anchors; write JSON and an overlay PNG");
  c_anchors->add_option("image", image_path)->required();
  c_anchors->add_option("-o,--output", out_path, "anchors JSON");
  auto* c_skeleton = app.add_subcommand("skeleton", "build the geometric skeleton of an image");
  c_skeleton->add_option("image", image_path)->required();
  c_skeleton->add_option("--text", text_path, "problem text file");
  c_skeleton->add_option("-o,--output", out_path, "skeleton JSON");

  // metrics / diff
  std::string a_path, b_path;
  auto* c_metrics = app.add_subcommand("metrics", "CD, HD and SSIM between two images");
  c_metrics->add_option("a", a_path)->required();
  c_metrics->add_option("b", b_path)->required();
  auto* c_diff = app.add_subcommand("diff", "classified difference map of a rendering against an observation");
  c_diff->add_option("rec", a_path)->required();
  c_diff->add_option("obs", b_path)->required();

  // reconstruct
  std::string mode = "det";
  double eps = 5.0;
  int max_iter = 10;
  auto* c_recon = app.add_subcommand("reconstruct", "image to program via the refinement loop");
  c_recon->add_option("image", image_path)->required();
  c_recon->add_option("--text", text_path, "problem text file");
  auto* o_mode = c_recon->add_option("--mode", mode, "det | agent | hybrid")->check(CLI::IsMember({"det", "agent", "hybrid"}));
  auto* o_eps = c_recon->add_option("--eps", eps, "HD convergence threshold, px")->check(CLI::NonNegativeNumber);
  auto* o_iter = c_recon->add_option("--max-iter", max_iter, "iteration limit")->check(CLI::NonNegativeNumber);
  c_recon->add_option("-o,--output", out_path, "output .geo");

  // dataset
  std::string manifest_path, entry_id, reviewer, dir_path;
  double threshold = 10.0;
  bool approve = false, reject = false;
  auto* c_dataset = app.add_subcommand("dataset", "quadruplet manifest: build, filter, review");
  c_dataset->require_subcommand(1);
  auto* c_build = c_dataset->add_subcommand("build", "run the pipeline over a directory of images");
  c_build->add_option("dir", dir_path)->required();
  c_build->add_option("-o,--output", manifest_path, "manifest JSONL")->required();
  auto* c_filter = c_dataset->add_subcommand("filter", "apply the CD gate");
  c_filter->add_option("manifest", manifest_path)->required();
  auto* o_threshold = c_filter->add_option("--threshold", threshold, "CD threshold, px (strict)")->check(CLI::NonNegativeNumber);
  auto* c_review = c_dataset->add_subcommand("review", "record a human verdict on an accepted entry");
  c_review->add_option("manifest", manifest_path)->required();
  c_review->add_option("--id", entry_id)->required();
  auto* f_approve = c_review->add_flag("--approve", approve);
  auto* f_reject = c_review->add_flag("--reject", reject);
  f_approve->excludes(f_reject);
  c_review->add_option("--reviewer", reviewer)->required();

  auto* c_selftest = app.add_subcommand("selftest", "run the built-in oracle checks");

  std::string current_input;
  try {
    std::vector<const char*> argv{"geo"};
    for (const auto& a : args) argv.push_back(a.c_str());
    app.parse(static_cast<int>(argv.size()), argv.data());
    if (c_review->parsed() && !approve && !reject) throw UsageError("review needs --approve or --reject");

    // config file: applies only where the flag was not given
    std::map<std::string, std::string> conf;
    if (o_config->count()) conf = read_flat_config(config_path);
    auto take = [&](const char* key, CLI::Option* opt, auto& target) {
      auto it = conf.find(key);
      if (it == conf.end()) return;
      const std::string value = it->second;
      conf.erase(it);
      if (opt && opt->count()) return;
      std::istringstream ss(value);
      using T = std::decay_t<decltype(target)>;
      if constexpr (std::is_same_v<T, std::string>) {
        target = value;
      } else if constexpr (std::is_same_v<T, bool>) {
        target = value == "1" || value == "true" || value == "yes";
      } else {
        T v{};
        ss >> v;
        if (!ss || !ss.eof()) throw UsageError(std::string("bad value for config key '") + key + "': " + value);
        target = v;
      }
    };
    LoopConfig loop;
    EndpointConfig endpoint = EndpointConfig::from_env();
    take("json", o_json, as_json);
    take("out_dir", o_out_dir, out_dir);
    take("agent_mock", o_mock, agent_mock);
    take("jobs", o_jobs, jobs);
    take("mode", o_mode, mode);
    take("eps", o_eps, eps);
    take("max_iter", o_iter, max_iter);
    take("threshold", o_threshold, threshold);
    take("alpha", nullptr, loop.objective.alpha);
    take("beta", nullptr, loop.objective.beta);
    take("gamma", nullptr, loop.objective.gamma);
    take("step_init", nullptr, loop.step_init);
    take("step_min", nullptr, loop.step_min);
    take("agent_endpoint", nullptr, endpoint.endpoint);
    take("agent_model", nullptr, endpoint.model);
    take("agent_timeout", nullptr, endpoint.timeout_s);
    if (!conf.empty()) throw UsageError("unknown config key '" + conf.begin()->first + "'");
    if (mode != "det" && mode != "agent" && mode != "hybrid") throw UsageError("mode must be det, agent or hybrid");
    if (jobs < 1) throw UsageError("jobs must be positive");
    loop.epsilon_hd = eps;
    loop.max_iterations = max_iter;
    loop.refiner_mode = *refiner_mode_from_string(mode);
    if (!loop.valid()) throw UsageError("invalid loop settings");

    const std::filesystem::path od(out_dir);
    auto output = [&](const std::string& given, const std::string& fallback) {
      return given.empty() ? od / fallback : std::filesystem::path(given);
    };
    auto stem = [](const std::string& p) { return std::filesystem::path(p).stem().string(); };
    auto read_text = [&]() -> std::optional<std::string> {
      if (text_path.empty()) return std::nullopt;
      current_input = text_path;
      return detail::slurp(text_path);
    };

    if (c_render->parsed()) {
      current_input = in_path;
      const Program p = parse_program(detail::slurp(in_path));
      if (const auto v = validate_consistency(p); !v.empty())
        throw Error("geom_program", "invalid program: '" + v.front().primitive_id + "' " + v.front().reason);
      const Raster r = render(p);
      const auto dest = output(out_path, stem(in_path) + ".png");
      if (dest.has_parent_path()) std::filesystem::create_directories(dest.parent_path());
      save_raster(r, dest);
      if (as_json)
        out << nlohmann::json{{"output", dest.string()}, {"hash", content_hash(r)}}.dump() << "\n";
      else
        out << "wrote " << dest.string() << " (" << content_hash(r) << ")\n";
      return kOk;
    }

    if (c_anchors->parsed()) {
      current_input = image_path;
      const Raster img = load_raster(image_path);
      const SkeletonConfig sc;
      const EdgeMap e = extract_edge_map(img, sc.anchors.edge_threshold);
      const auto anchors = verify_anchors(extract_raw_anchors(e, sc.anchors), e, sc);
      const auto j = anchors_to_json(anchors);
      const auto dest = output(out_path, stem(image_path) + ".anchors.json");
      detail::write_text(dest, j.dump(2) + "\n");
      Raster overlay = img;
      for (const auto& a : anchors) detail::draw_cross(overlay, a.pos, detail::anchor_color(a.kind));
      const auto ov = od / (stem(image_path) + ".anchors.png");
      std::filesystem::create_directories(od);
      save_raster(overlay, ov);
      if (as_json)
        out << j.dump() << "\n";
      else
        out << anchors.size() << " anchors -> " << dest.string() << ", overlay " << ov.string() << "\n";
      return kOk;
    }

    if (c_skeleton->parsed()) {
      const auto text = read_text();
      current_input = image_path;
      const auto skel = build_skeleton(load_raster(image_path), text);
      const auto j = to_json(skel);
      const auto dest = output(out_path, stem(image_path) + ".skeleton.json");
      detail::write_text(dest, j.dump(2) + "\n");
      if (as_json)
        out << j.dump() << "\n";
      else
        out << skel.anchors.size() << " anchors, " << skel.segments.size() << " segments, " << skel.circles.size()
            << " circles, " << skel.relations.size() << " relations -> " << dest.string() << "\n";
      return kOk;
    }

    if (c_metrics->parsed()) {
      current_input = a_path;
      const Raster a = load_raster(a_path);
      current_input = b_path;
      const Raster b = load_raster(b_path);
      current_input = a_path + ", " + b_path;
      const auto m = measure(a, b);
      out << nlohmann::json{{"cd", m.cd}, {"hd", m.hd}, {"ssim", m.ssim}}.dump() << "\n";
      return kOk;
    }

    if (c_diff->parsed()) {
      current_input = a_path;
      const Raster rec = load_raster(a_path);
      current_input = b_path;
      const Raster obs = load_raster(b_path);
      current_input = a_path + ", " + b_path;
      const auto report = project_errors(rec, obs);
      const auto j = to_json(report);
      std::filesystem::create_directories(od);
      detail::write_text(od / (stem(a_path) + ".diff.json"), j.dump(2) + "\n");
      save_raster(report.diff_image, od / (stem(a_path) + ".diff.png"));
      if (as_json) {
        out << j.dump() << "\n";
      } else {
        out << report.regions.size() << " regions (cd " << report.metrics.cd << ", hd " << report.metrics.hd << ")\n";
        for (const auto& r : report.regions)
          out << "  " << to_string(r.classification) << " " << r.pixel_count << " px at (" << r.centroid.x << ", "
              << r.centroid.y << ")\n";
      }
      return kOk;
    }

    if (c_recon->parsed()) {
      const auto text = read_text();
      current_input = image_path;
      const Raster obs = load_raster(image_path);
      std::unique_ptr<Gateway> gateway;
      std::unique_ptr<GatewayAgent> agent;
      if (loop.refiner_mode != RefinerMode::Deterministic) {
        std::shared_ptr<Transport> transport;
        if (!agent_mock.empty())
          transport = ScriptedTransport::from_jsonl(agent_mock);
        else if (endpoint.endpoint.empty())
          throw CredentialMissing("GEO_AGENT_ENDPOINT");
        else if (endpoint.key.empty())
          throw CredentialMissing("GEO_AGENT_KEY");
        else
          transport = std::make_shared<HttpTransport>();
        gateway = std::make_unique<Gateway>(endpoint, transport);
        gateway->set_run_log_path((od / "agent_log.jsonl").string());
        agent = std::make_unique<GatewayAgent>(*gateway);
      }
      std::filesystem::create_directories(od);
      const std::string base = stem(image_path);
      const auto skel = build_skeleton(obs, text, {}, agent.get());
      LoopHooks hooks;
      hooks.agent = agent.get();
      std::string history;
      hooks.on_iteration = [&](const LoopState& st, const Raster&) {
        history += to_json(st.history.back()).dump() + "\n";
        save_raster(st.report.diff_image, od / (base + ".diff_t" + std::to_string(st.iteration) + ".png"));
      };
      const auto [best, st] = run_loop(obs, text, skel, loop, hooks);
      const auto dest = output(out_path, base + ".geo");
      detail::write_text(dest, serialize_program(best));
      const Raster final_render = render(best);
      save_raster(final_render, od / (base + ".render.png"));
      detail::write_text(od / (base + ".history.jsonl"), history);
      nlohmann::json summary{{"output", dest.string()},
                             {"cd", st.best_metrics.cd},
                             {"hd", st.best_metrics.hd},
                             {"ssim", st.best_metrics.ssim},
                             {"iterations", st.history.size()},
                             {"stop_reason", st.stop_reason}};
      if (as_json)
        out << summary.dump() << "\n";
      else
        out << "wrote " << dest.string() << ": cd " << st.best_metrics.cd << " px, hd " << st.best_metrics.hd
            << " px after " << st.history.size() << " iterations (" << st.stop_reason << ")\n";
      return kOk;
    }

    if (c_build->parsed()) {
      current_input = dir_path;
      BuildConfig bc;
      const std::filesystem::path mp(manifest_path);
      bc.root = mp.has_parent_path() ? mp.parent_path() : std::filesystem::path(".");
      bc.loop = loop;
      std::filesystem::create_directories(bc.root);
      Manifest m = build_manifest(dir_path, bc, jobs);
      {
        ManifestLock lock(mp);
        save_manifest(m, mp);
      }
      if (as_json)
        out << manifest_header(m).dump() << "\n";
      else
        out << m.entries.size() << " entries (" << m.failed() << " failed) -> " << mp.string() << "\n";
      return kOk;
    }

    if (c_filter->parsed()) {
      current_input = manifest_path;
      const auto m = update_manifest(manifest_path, [&](Manifest x) { return filter_manifest(std::move(x), threshold); });
      const auto c = m.counts();
      if (as_json)
        out << manifest_header(m).dump() << "\n";
      else
        out << c.at(EntryStatus::AutoAccepted) << " accepted, " << c.at(EntryStatus::AutoRejected)
            << " rejected at cd < " << threshold << "\n";
      return kOk;
    }

    if (c_review->parsed()) {
      current_input = manifest_path;
      const auto verdict = approve ? Verdict::Approve : Verdict::Reject;
      auto m = update_manifest(manifest_path, [&](Manifest x) { return review_mark(std::move(x), entry_id, verdict, reviewer); });
      const auto* e = m.find(entry_id);
      if (as_json)
        out << to_json(*e).dump() << "\n";
      else
        out << entry_id << ": " << to_string(e->status) << "\n";
      return kOk;
    }

    if (c_selftest->parsed()) return selftest(out);
    throw UsageError("no subcommand");
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kOk;
  } catch (const CLI::ParseError& e) {
    err << "geo: usage: " << e.what() << "\n" << app.help();
    return kUsageError;
  } catch (const UsageError& e) {
    err << "geo: usage: " << e.what() << "\n";
    return kUsageError;
  } catch (const AgentError& e) {
    err << "geo: " << e.module() << ": " << e.what() << " [input: " << current_input << "]\n";
    return kAgentError;
  } catch (const Error& e) {
    err << "geo: " << e.module() << ": " << e.what() << " [input: " << current_input << "]\n";
    return kDomainError;
  } catch (const std::filesystem::filesystem_error& e) {
    err << "geo: io: " << e.what() << " [input: " << current_input << "]\n";
    return kDomainError;
  }
}

inline int dispatch(int argc, char** argv) {
  return dispatch(std::vector<std::string>(argv + 1, argv + argc));
}

}  // namespace geo::cli
