// usim: drive desktops over RFB, record demonstrations, analyze screens,
// and generate system-scale life scenarios.

#include <atomic>
#include <chrono>
#include <csignal>
#include <fstream>
#include <iostream>
#include <map>
#include <memory>
#include <sstream>
#include <thread>

#include <CLI11.hpp>
#include <json.hpp>

#include "usim/actions.hpp"
#include "usim/channel.hpp"
#include "usim/clock.hpp"
#include "usim/error.hpp"
#include "usim/image_io.hpp"
#include "usim/recorder.hpp"
#include "usim/scenario.hpp"
#include "usim/simdesk.hpp"
#include "usim/textgen.hpp"
#include "usim/vision.hpp"

using nlohmann::json;

namespace {

std::atomic<bool> g_interrupted{false};

void on_signal(int) { g_interrupted = true; }

uint64_t resolve_seed(int64_t given) {
  uint64_t seed;
  if (given >= 0) {
    seed = static_cast<uint64_t>(given);
  } else {
    seed = static_cast<uint64_t>(
        std::chrono::system_clock::now().time_since_epoch().count());
  }
  std::cerr << "seed: " << seed << "\n";
  return seed;
}

usim::channel::Endpoint parse_endpoint_flag(const std::string& text) {
  auto colon = text.find_last_of(':');
  if (colon == std::string::npos || colon == 0)
    throw usim::Error(usim::ErrorCode::parse_error,
                      "--connect expects host:port, got \"" + text + "\"");
  usim::channel::Endpoint ep;
  ep.host = text.substr(0, colon);
  ep.port = std::stoi(text.substr(colon + 1));
  return ep;
}

int cmd_simdesk_serve(const std::string& scene_file, int port) {
  usim::simdesk::Scene scene = usim::simdesk::load_scene(scene_file);
  auto server = usim::simdesk::serve(std::move(scene), port);
  std::cerr << "simdesk: serving \"" << scene_file << "\" on port "
            << server->port() << "\n";
  std::signal(SIGINT, on_signal);
  std::signal(SIGTERM, on_signal);
  while (!g_interrupted)
    std::this_thread::sleep_for(std::chrono::milliseconds(50));
  server->stop();
  std::cerr << "simdesk: stopped\n";
  return 0;
}

int cmd_vision_analyze(const std::string& image_file, const std::string& profile_dir,
                       const std::string& out_file) {
  usim::Frame frame = usim::read_ppm(image_file);
  usim::vision::GeometryRules rules = usim::vision::GeometryRules::defaults();
  usim::vision::RuleTrustingClassifier trusting;
  std::unique_ptr<usim::actions::EnvironmentProfile> profile;
  const usim::vision::ZoneClassifier* classifier = &trusting;
  if (!profile_dir.empty()) {
    profile = std::make_unique<usim::actions::EnvironmentProfile>(
        usim::actions::load_profile(profile_dir));
    rules = profile->rules;
    if (!profile->prototypes.empty()) classifier = &profile->prototypes;
  }
  auto zones = usim::vision::detect_zones(frame, rules, *classifier);
  json out = json::array();
  for (const auto& zone : zones) {
    out.push_back({{"rect", {zone.rect.x, zone.rect.y, zone.rect.w, zone.rect.h}},
                   {"kind", usim::vision::to_string(zone.kind)},
                   {"confidence", zone.confidence}});
  }
  std::string text = out.dump(2) + "\n";
  if (!out_file.empty()) {
    std::ofstream f(out_file);
    if (!f) throw usim::Error(usim::ErrorCode::io_error, "cannot write " + out_file);
    f << text;
  }
  std::cout << text;
  std::cerr << "vision: " << zones.size() << " zones\n";
  return 0;
}

int cmd_agent_run(const std::string& scenario_file, const std::string& connect,
                  const std::string& profile_dir, int64_t seed_flag) {
  uint64_t seed = resolve_seed(seed_flag);
  auto script = usim::actions::load_script(scenario_file);
  auto profile = usim::actions::load_profile(profile_dir);
  auto session = usim::channel::connect(parse_endpoint_flag(connect));
  usim::actions::Executor executor(*session, profile, seed);
  auto reports = executor.run_script(script);
  std::cout << usim::actions::report_to_json(reports) << "\n";
  bool all_ok = true;
  for (const auto& r : reports)
    all_ok = all_ok && r.status == usim::actions::ActionReport::Status::ok;
  std::cerr << "agent: " << reports.size() << "/" << script.size()
            << " actions ran, " << (all_ok ? "all ok" : "with failures") << "\n";
  return all_ok && reports.size() == script.size() ? 0 : 1;
}

// Demonstration commands, one per line:
//   move X Y | click [left|right|middle] [count] | key TEXT | pause MS
int cmd_agent_record(const std::string& connect, const std::string& out_dir,
                     const std::string& drive_file, int64_t seed_flag) {
  uint64_t seed = resolve_seed(seed_flag);
  auto session = usim::channel::connect(parse_endpoint_flag(connect));

  std::ifstream drive_stream;
  std::istream* input = &std::cin;
  if (!drive_file.empty()) {
    drive_stream.open(drive_file);
    if (!drive_stream)
      throw usim::Error(usim::ErrorCode::io_error, "cannot read " + drive_file);
    input = &drive_stream;
  }

  usim::human::HumanizerConfig cfg;
  usim::human::Rng rng(seed);
  usim::Point cursor{0, 0};

  auto recording = usim::recorder::record(*session, [&](usim::recorder::RecordingTap& tap) {
    std::string line;
    while (std::getline(*input, line)) {
      std::istringstream ss(line);
      std::string op;
      ss >> op;
      if (op.empty() || op[0] == '#') continue;
      if (op == "move") {
        int x = 0, y = 0;
        ss >> x >> y;
        auto traj = usim::human::plan_trajectory(cursor, {x, y}, cfg, rng);
        int64_t prev = 0;
        for (const auto& s : traj.samples) {
          std::this_thread::sleep_for(std::chrono::milliseconds(s.at - prev));
          prev = s.at;
          tap.send_pointer({s.x, s.y, 0, 0});
        }
        cursor = {x, y};
      } else if (op == "click") {
        std::string btn = "left";
        int count = 1;
        ss >> btn >> count;
        if (count <= 0) count = 1;
        uint8_t mask = btn == "right" ? usim::button::right
                                      : (btn == "middle" ? usim::button::middle
                                                         : usim::button::left);
        std::uniform_int_distribution<int> hold(cfg.key_hold_min_ms, cfg.key_hold_max_ms);
        std::uniform_int_distribution<int> gap(cfg.click_gap_min_ms, cfg.click_gap_max_ms);
        for (int i = 0; i < count; ++i) {
          if (i) std::this_thread::sleep_for(std::chrono::milliseconds(gap(rng)));
          tap.send_pointer({cursor.x, cursor.y, mask, 0});
          std::this_thread::sleep_for(std::chrono::milliseconds(hold(rng)));
          tap.send_pointer({cursor.x, cursor.y, 0, 0});
        }
      } else if (op == "key") {
        std::string text;
        std::getline(ss, text);
        if (!text.empty() && text.front() == ' ') text.erase(0, 1);
        auto events = usim::human::keystroke_schedule(text, cfg, rng);
        int64_t prev = 0;
        for (const auto& e : events) {
          std::this_thread::sleep_for(std::chrono::milliseconds(e.at - prev));
          prev = e.at;
          tap.send_key({e.keysym, e.pressed, 0});
        }
      } else if (op == "pause") {
        int64_t ms = 0;
        ss >> ms;
        std::this_thread::sleep_for(std::chrono::milliseconds(ms));
      } else {
        std::cerr << "record: ignoring \"" << line << "\"\n";
      }
    }
  });

  usim::recorder::save_recording(out_dir, recording);
  auto segments = usim::recorder::segment(recording);
  auto bundle = usim::recorder::compile_replay(recording, segments);
  usim::recorder::save_replay(out_dir + "/replay", bundle);
  if (!recording.keyframes.empty()) {
    auto proposals = usim::recorder::propose_annotations(recording.keyframes.back().frame);
    usim::recorder::save_annotations(out_dir + "/annotations.json", proposals);
  }
  std::cerr << "record: " << recording.events.size() << " events, "
            << recording.keyframes.size() << " keyframes, " << segments.size()
            << " segments -> " << out_dir << "\n";
  return 0;
}

int cmd_canvas_generate(const std::string& graph_file, const std::string& from,
                        const std::string& to, int64_t seed_flag,
                        const std::string& out_file, double rate, double reply_prob) {
  uint64_t seed = resolve_seed(seed_flag);
  auto graph = usim::scenario::load_graph(graph_file);
  usim::scenario::CanvasParams params;
  params.rate_base_per_hour = rate;
  params.reply_prob = reply_prob;
  auto canvas = usim::scenario::generate_canvas(graph, usim::scenario::parse_iso_datetime(from),
                                                usim::scenario::parse_iso_datetime(to),
                                                params, seed);
  if (!out_file.empty()) usim::scenario::save_canvas(out_file, canvas);
  std::cout << usim::scenario::canvas_to_json_text(canvas);
  std::cerr << "canvas: " << canvas.interactions.size() << " interactions\n";
  return 0;
}

int cmd_text_generate(const std::string& context_file, int n, const std::string& provider,
                      int64_t seed_flag, const std::string& corpus_file,
                      const std::string& endpoint) {
  uint64_t seed = resolve_seed(seed_flag);
  std::ifstream in(context_file);
  if (!in) throw usim::Error(usim::ErrorCode::io_error, "cannot read " + context_file);
  json jc;
  try {
    in >> jc;
  } catch (const json::exception& e) {
    throw usim::Error(usim::ErrorCode::parse_error, context_file + ": " + e.what());
  }
  usim::scenario::TextContext ctx;
  ctx.tone = usim::scenario::tone_from_string(jc.at("tone").get<std::string>());
  ctx.polarity = usim::scenario::polarity_from_string(jc.at("polarity").get<std::string>());
  ctx.keywords = jc.at("keywords").get<std::vector<std::string>>();
  if (jc.contains("relation"))
    ctx.relation = usim::scenario::relation_kind_from_string(jc["relation"].get<std::string>());

  usim::textgen::GenerateOptions options;
  options.n = n;
  options.seed = seed;

  std::vector<usim::textgen::Candidate> candidates;
  if (provider == "builtin") {
    if (corpus_file.empty())
      throw usim::Error(usim::ErrorCode::empty_corpus,
                        "builtin provider needs --corpus");
    auto model = usim::textgen::train(usim::textgen::load_corpus(corpus_file));
    candidates = usim::textgen::generate(model, ctx, options);
  } else {
    auto ep = parse_endpoint_flag(endpoint);
    usim::textgen::HttpProvider http(ep.host, ep.port);
    candidates = usim::textgen::generate(http, ctx, options);
  }
  candidates = usim::textgen::score_candidates(std::move(candidates), ctx);

  json out = json::array();
  for (const auto& c : candidates) {
    out.push_back({{"text", c.text},
                   {"score", c.score},
                   {"provenance",
                    c.provenance == usim::textgen::Candidate::Provenance::builtin
                        ? "builtin"
                        : "remote"}});
  }
  std::cout << out.dump(2) << "\n";
  std::cerr << "text: " << candidates.size() << " candidates\n";
  return 0;
}

// Connects each avatar's agent lazily; a dead agent fails its own
// actions without stopping the others.
class LiveAgents final : public usim::scenario::AgentExecutor {
 public:
  LiveAgents(const usim::scenario::AvatarGraph& graph, uint64_t seed,
             usim::Clock* clock)
      : graph_(graph), seed_(seed), clock_(clock) {}

  bool execute(const std::string& agent, const usim::actions::UnitAction& action) override {
    Entry* entry = nullptr;
    {
      std::lock_guard lock(mu_);
      auto [it, inserted] = agents_.try_emplace(agent);
      entry = &it->second;
      if (inserted) {
        try {
          const usim::scenario::Avatar* avatar = graph_.find(agent);
          entry->profile = usim::actions::load_profile(avatar->profile);
          entry->session = usim::channel::connect(avatar->endpoint);
          entry->executor = std::make_unique<usim::actions::Executor>(
              *entry->session, entry->profile, seed_ ^ std::hash<std::string>{}(agent),
              clock_);
        } catch (const usim::Error& e) {
          std::cerr << "orchestrate: agent " << agent << " unavailable: " << e.what()
                    << "\n";
          entry->dead = true;
        }
      }
    }
    if (entry->dead) return false;
    try {
      auto report = entry->executor->execute(action);
      return report.status == usim::actions::ActionReport::Status::ok;
    } catch (const usim::Error& e) {
      std::cerr << "orchestrate: agent " << agent << " lost: " << e.what() << "\n";
      std::lock_guard lock(mu_);
      entry->dead = true;
      return false;
    }
  }

 private:
  struct Entry {
    usim::actions::EnvironmentProfile profile;
    std::unique_ptr<usim::channel::Session> session;
    std::unique_ptr<usim::actions::Executor> executor;
    bool dead = false;
  };
  const usim::scenario::AvatarGraph& graph_;
  uint64_t seed_;
  usim::Clock* clock_;
  std::mutex mu_;
  std::map<std::string, Entry> agents_;
};

int cmd_orchestrate_run(const std::string& canvas_file, const std::string& graph_file,
                        double accel, const std::string& corpus_file, int64_t seed_flag) {
  uint64_t seed = resolve_seed(seed_flag);
  auto canvas = usim::scenario::load_canvas(canvas_file);
  auto graph = usim::scenario::load_graph(graph_file);

  std::function<std::string(const usim::scenario::TextContext&)> body_gen;
  std::unique_ptr<usim::textgen::MarkovModel> model;
  if (!corpus_file.empty()) {
    model = std::make_unique<usim::textgen::MarkovModel>(
        usim::textgen::train(usim::textgen::load_corpus(corpus_file)));
    body_gen = [&model, seed](const usim::scenario::TextContext& ctx) {
      usim::textgen::GenerateOptions options;
      options.n = 1;
      options.seed = seed;
      try {
        auto candidates = usim::textgen::generate(*model, ctx, options);
        return candidates.front().text;
      } catch (const usim::Error&) {
        return std::string("(no text available)");
      }
    };
  }

  auto compiled = usim::scenario::compile_canvas(canvas, graph, body_gen);
  usim::AcceleratedClock clock(accel, canvas.t_start);
  LiveAgents agents(graph, seed, &clock);
  auto report = usim::scenario::orchestrate(compiled, agents, clock);

  json out = json::array();
  int ok = 0, failed = 0, skipped = 0;
  for (const auto& r : report.records) {
    const char* outcome = r.outcome == usim::scenario::DispatchRecord::Outcome::ok
                              ? (ok++, "ok")
                              : (r.outcome == usim::scenario::DispatchRecord::Outcome::failed
                                     ? (failed++, "failed")
                                     : (skipped++, "skipped"));
    out.push_back({{"seq", r.seq},
                   {"agent", r.agent},
                   {"interaction", r.interaction_id},
                   {"scheduled_at", r.scheduled_at},
                   {"dispatched_at", r.dispatched_at},
                   {"outcome", outcome}});
  }
  std::cout << out.dump(2) << "\n";
  std::cerr << "orchestrate: " << ok << " ok, " << failed << " failed, " << skipped
            << " skipped\n";
  return failed == 0 ? 0 : 1;
}

} // namespace

int main(int argc, char** argv) {
  CLI::App app{"user-simulation toolkit: external desktop agents, synthetic "
               "desktop server, and scenario generation"};
  app.require_subcommand(1);

  // simdesk serve
  auto* simdesk_cmd = app.add_subcommand("simdesk", "synthetic desktop server");
  simdesk_cmd->require_subcommand(1);
  auto* serve_cmd = simdesk_cmd->add_subcommand("serve", "serve a scene over RFB");
  std::string scene_file;
  int port = 5901;
  serve_cmd->add_option("--scene", scene_file, "scene JSON file")->required();
  serve_cmd->add_option("--port", port, "TCP port (0 = ephemeral)");

  // vision analyze
  auto* vision_cmd = app.add_subcommand("vision", "screen analysis");
  vision_cmd->require_subcommand(1);
  auto* analyze_cmd = vision_cmd->add_subcommand("analyze", "detect zones in an image");
  std::string image_file, profile_dir_flag, out_file;
  analyze_cmd->add_option("--image", image_file, "PPM image")->required();
  analyze_cmd->add_option("--profile", profile_dir_flag, "environment profile dir");
  analyze_cmd->add_option("--out", out_file, "output file for zone JSON");

  // agent run / record
  auto* agent_cmd = app.add_subcommand("agent", "drive one instrumented machine");
  agent_cmd->require_subcommand(1);
  auto* run_cmd = agent_cmd->add_subcommand("run", "execute a unit-action script");
  std::string scenario_file, connect_flag, agent_profile_dir;
  int64_t seed_flag = -1;
  run_cmd->add_option("--scenario", scenario_file, "script JSON file")->required();
  run_cmd->add_option("--connect", connect_flag, "host:port of the RFB server")->required();
  run_cmd->add_option("--profile", agent_profile_dir, "environment profile dir")->required();
  run_cmd->add_option("--seed", seed_flag, "RNG seed (default: time-derived)");

  auto* record_cmd = agent_cmd->add_subcommand("record", "record a demonstration");
  std::string record_connect, record_out, drive_file;
  int64_t record_seed = -1;
  record_cmd->add_option("--connect", record_connect, "host:port of the RFB server")
      ->required();
  record_cmd->add_option("--out", record_out, "output directory")->required();
  record_cmd->add_option("--drive", drive_file,
                         "demonstration command file (default: stdin)");
  record_cmd->add_option("--seed", record_seed, "RNG seed (default: time-derived)");

  // canvas generate
  auto* canvas_cmd = app.add_subcommand("canvas", "scenario canvases");
  canvas_cmd->require_subcommand(1);
  auto* generate_cmd = canvas_cmd->add_subcommand("generate", "generate a canvas");
  std::string graph_file, from_iso, to_iso, canvas_out;
  int64_t canvas_seed = -1;
  double rate = 0.5, reply_prob = 0.4;
  generate_cmd->add_option("--graph", graph_file, "avatar graph JSON")->required();
  generate_cmd->add_option("--from", from_iso, "window start (ISO datetime)")->required();
  generate_cmd->add_option("--to", to_iso, "window end (ISO datetime)")->required();
  generate_cmd->add_option("--seed", canvas_seed, "RNG seed (default: time-derived)");
  generate_cmd->add_option("--out", canvas_out, "output canvas file");
  generate_cmd->add_option("--rate", rate, "emails/hour per unit weight");
  generate_cmd->add_option("--reply-prob", reply_prob, "reply probability");

  // text generate
  auto* text_cmd = app.add_subcommand("text", "conditional text generation");
  text_cmd->require_subcommand(1);
  auto* tgen_cmd = text_cmd->add_subcommand("generate", "generate candidates");
  std::string context_file, provider = "builtin", corpus_file, endpoint;
  int n_candidates = 3;
  int64_t text_seed = -1;
  tgen_cmd->add_option("--context", context_file, "TextContext JSON file")->required();
  tgen_cmd->add_option("--n", n_candidates, "number of candidates");
  tgen_cmd->add_option("--provider", provider, "builtin|remote")
      ->check(CLI::IsMember({"builtin", "remote"}));
  tgen_cmd->add_option("--seed", text_seed, "RNG seed (default: time-derived)");
  tgen_cmd->add_option("--corpus", corpus_file, "training corpus (JSONL)");
  tgen_cmd->add_option("--endpoint", endpoint, "remote provider host:port");

  // orchestrate run
  auto* orch_cmd = app.add_subcommand("orchestrate", "multi-agent execution");
  orch_cmd->require_subcommand(1);
  auto* orun_cmd = orch_cmd->add_subcommand("run", "run a compiled canvas");
  std::string orch_canvas, orch_graph, orch_corpus;
  double accel = 1.0;
  int64_t orch_seed = -1;
  orun_cmd->add_option("--canvas", orch_canvas, "canvas JSON file")->required();
  orun_cmd->add_option("--graph", orch_graph, "avatar graph JSON")->required();
  orun_cmd->add_option("--accel", accel, "clock acceleration factor");
  orun_cmd->add_option("--corpus", orch_corpus, "corpus for missing bodies (JSONL)");
  orun_cmd->add_option("--seed", orch_seed, "RNG seed (default: time-derived)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (serve_cmd->parsed()) return cmd_simdesk_serve(scene_file, port);
    if (analyze_cmd->parsed())
      return cmd_vision_analyze(image_file, profile_dir_flag, out_file);
    if (run_cmd->parsed())
      return cmd_agent_run(scenario_file, connect_flag, agent_profile_dir, seed_flag);
    if (record_cmd->parsed())
      return cmd_agent_record(record_connect, record_out, drive_file, record_seed);
    if (generate_cmd->parsed())
      return cmd_canvas_generate(graph_file, from_iso, to_iso, canvas_seed, canvas_out,
                                 rate, reply_prob);
    if (tgen_cmd->parsed())
      return cmd_text_generate(context_file, n_candidates, provider, text_seed,
                               corpus_file, endpoint);
    if (orun_cmd->parsed())
      return cmd_orchestrate_run(orch_canvas, orch_graph, accel, orch_corpus, orch_seed);
  } catch (const usim::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 2;
}
