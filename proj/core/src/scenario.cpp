#include "usim/scenario.hpp"

#include <algorithm>
#include <cmath>
#include <condition_variable>
#include <cstdio>
#include <fstream>
#include <limits>
#include <map>
#include <mutex>
#include <random>
#include <set>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "usim/error.hpp"

namespace usim::scenario {

using nlohmann::json;

const char* to_string(RelationKind kind) {
  switch (kind) {
    case RelationKind::friendship: return "friend";
    case RelationKind::colleague: return "colleague";
    case RelationKind::hierarchy: return "hierarchy";
    case RelationKind::client_supplier: return "client-supplier";
    case RelationKind::partner: return "partner";
  }
  return "colleague";
}

const char* to_string(Tone tone) {
  return tone == Tone::formel ? "formel" : "informel";
}

const char* to_string(Polarity polarity) {
  switch (polarity) {
    case Polarity::positif: return "positif";
    case Polarity::negatif: return "négatif";
    case Polarity::neutre: return "neutre";
  }
  return "neutre";
}

RelationKind relation_kind_from_string(const std::string& name) {
  if (name == "friend") return RelationKind::friendship;
  if (name == "colleague") return RelationKind::colleague;
  if (name == "hierarchy") return RelationKind::hierarchy;
  if (name == "client-supplier") return RelationKind::client_supplier;
  if (name == "partner") return RelationKind::partner;
  throw Error(ErrorCode::parse_error, "unknown relation kind \"" + name + "\"");
}

Tone tone_from_string(const std::string& name) {
  if (name == "formel") return Tone::formel;
  if (name == "informel") return Tone::informel;
  throw Error(ErrorCode::parse_error, "unknown tone \"" + name + "\"");
}

Polarity polarity_from_string(const std::string& name) {
  if (name == "positif") return Polarity::positif;
  if (name == "négatif" || name == "negatif") return Polarity::negatif;
  if (name == "neutre") return Polarity::neutre;
  throw Error(ErrorCode::parse_error, "unknown polarity \"" + name + "\"");
}

const Avatar* AvatarGraph::find(const std::string& id) const {
  for (const Avatar& a : avatars)
    if (a.id == id) return &a;
  return nullptr;
}

bool AvatarGraph::related(const std::string& a, const std::string& b) const {
  for (const Relation& r : relations)
    if ((r.a == a && r.b == b) || (r.a == b && r.b == a)) return true;
  return false;
}

bool AvatarGraph::share_group(const std::string& a, const std::string& b) const {
  for (const Group& g : groups) {
    bool has_a = std::find(g.members.begin(), g.members.end(), a) != g.members.end();
    bool has_b = std::find(g.members.begin(), g.members.end(), b) != g.members.end();
    if (has_a && has_b) return true;
  }
  return false;
}

const Project* AvatarGraph::shared_project(const std::string& a,
                                           const std::string& b) const {
  for (const Project& p : projects) {
    bool has_a = std::find(p.members.begin(), p.members.end(), a) != p.members.end();
    bool has_b = std::find(p.members.begin(), p.members.end(), b) != p.members.end();
    if (has_a && has_b) return &p;
  }
  return nullptr;
}

namespace {

channel::Endpoint parse_endpoint(const std::string& text) {
  channel::Endpoint ep;
  auto colon = text.find_last_of(':');
  if (colon == std::string::npos || colon == 0) return ep;
  ep.host = text.substr(0, colon);
  try {
    ep.port = std::stoi(text.substr(colon + 1));
  } catch (...) {
    ep.port = 0;
  }
  return ep;
}

} // namespace

AvatarGraph parse_graph_text(const std::string& text, const std::string& origin) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::parse_error, origin + ": " + e.what());
  }

  AvatarGraph graph;
  try {
    for (const json& j : doc.value("avatars", json::array())) {
      Avatar a;
      a.id = j.at("id").get<std::string>();
      a.name = j.value("name", a.id);
      a.role = j.value("role", std::string());
      if (j.contains("endpoint")) a.endpoint = parse_endpoint(j["endpoint"].get<std::string>());
      a.profile = j.value("profile", std::string());
      graph.avatars.push_back(std::move(a));
    }
    for (const json& j : doc.value("groups", json::array())) {
      Group g;
      g.id = j.at("id").get<std::string>();
      g.members = j.value("members", std::vector<std::string>{});
      graph.groups.push_back(std::move(g));
    }
    for (const json& j : doc.value("projects", json::array())) {
      Project p;
      p.id = j.at("id").get<std::string>();
      p.keywords = j.value("keywords", std::vector<std::string>{});
      p.members = j.value("members", std::vector<std::string>{});
      graph.projects.push_back(std::move(p));
    }
    for (const json& j : doc.value("relations", json::array())) {
      Relation r;
      const json& pair = j.at("pair");
      r.a = pair.at(0).get<std::string>();
      r.b = pair.at(1).get<std::string>();
      r.kind = relation_kind_from_string(j.at("kind").get<std::string>());
      r.weight = j.at("weight").get<double>();
      graph.relations.push_back(std::move(r));
    }
  } catch (const json::exception& e) {
    throw Error(ErrorCode::parse_error, origin + ": " + e.what());
  }

  // referential checks
  auto require_avatar = [&](const std::string& id, const std::string& where) {
    if (!graph.find(id))
      throw Error(ErrorCode::dangling_reference, where + " references unknown avatar " + id);
  };
  for (const Group& g : graph.groups)
    for (const std::string& m : g.members) require_avatar(m, "group " + g.id);
  for (const Project& p : graph.projects)
    for (const std::string& m : p.members) require_avatar(m, "project " + p.id);
  for (size_t i = 0; i < graph.relations.size(); ++i) {
    const Relation& r = graph.relations[i];
    require_avatar(r.a, "relation");
    require_avatar(r.b, "relation");
    if (r.a == r.b)
      throw Error(ErrorCode::parse_error, origin + ": self-relation on " + r.a);
    if (r.weight <= 0.0 || r.weight > 1.0)
      throw Error(ErrorCode::weight_out_of_range,
                  r.a + "-" + r.b + " weight " + std::to_string(r.weight));
    for (size_t k = i + 1; k < graph.relations.size(); ++k) {
      const Relation& o = graph.relations[k];
      if ((o.a == r.a && o.b == r.b) || (o.a == r.b && o.b == r.a))
        throw Error(ErrorCode::parse_error,
                    origin + ": duplicate relation " + r.a + "-" + r.b);
    }
  }
  return graph;
}

AvatarGraph load_graph(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::io_error, "cannot read graph " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_graph_text(buf.str(), path);
}

// ---------------------------------------------------------------------------
// civil time

namespace {

constexpr int64_t ms_per_day = 86400000;

// Howard Hinnant's days-from-civil.
int64_t days_from_civil(int y, int m, int d) {
  y -= m <= 2;
  int era = (y >= 0 ? y : y - 399) / 400;
  unsigned yoe = static_cast<unsigned>(y - era * 400);
  unsigned doy = (153 * (m + (m > 2 ? -3 : 9)) + 2) / 5 + d - 1;
  unsigned doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
  return static_cast<int64_t>(era) * 146097 + doe - 719468;
}

void civil_from_days(int64_t z, int& y, int& m, int& d) {
  z += 719468;
  int64_t era = (z >= 0 ? z : z - 146096) / 146097;
  unsigned doe = static_cast<unsigned>(z - era * 146097);
  unsigned yoe = (doe - doe / 1460 + doe / 36524 - doe / 146096) / 365;
  int yy = static_cast<int>(yoe) + static_cast<int>(era) * 400;
  unsigned doy = doe - (365 * yoe + yoe / 4 - yoe / 100);
  unsigned mp = (5 * doy + 2) / 153;
  d = static_cast<int>(doy - (153 * mp + 2) / 5 + 1);
  m = static_cast<int>(mp + (mp < 10 ? 3 : -9));
  y = yy + (m <= 2);
}

int weekday(int64_t days) {
  // 1970-01-01 was a Thursday; 0 = Sunday
  return static_cast<int>(((days % 7) + 11) % 7);
}

} // namespace

int64_t parse_iso_datetime(const std::string& text) {
  int y = 0, mo = 0, d = 0, h = 0, mi = 0, s = 0;
  int n = std::sscanf(text.c_str(), "%d-%d-%dT%d:%d:%d", &y, &mo, &d, &h, &mi, &s);
  if (n < 3)
    throw Error(ErrorCode::parse_error, "bad ISO datetime \"" + text + "\"");
  return days_from_civil(y, mo, d) * ms_per_day +
         ((static_cast<int64_t>(h) * 60 + mi) * 60 + s) * 1000;
}

std::string format_iso_datetime(int64_t ms) {
  int64_t days = ms / ms_per_day;
  int64_t rem = ms % ms_per_day;
  if (rem < 0) {
    rem += ms_per_day;
    days -= 1;
  }
  int y, mo, d;
  civil_from_days(days, y, mo, d);
  int s = static_cast<int>(rem / 1000);
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%04d-%02d-%02dT%02d:%02d:%02d", y, mo, d,
                s / 3600, (s / 60) % 60, s % 60);
  return buf;
}

std::vector<std::pair<int64_t, int64_t>> workday_slices(int64_t t0, int64_t t1) {
  std::vector<std::pair<int64_t, int64_t>> slices;
  if (t1 <= t0) return slices;
  int64_t day = t0 / ms_per_day;
  if (t0 < 0 && t0 % ms_per_day != 0) day -= 1;
  for (; day * ms_per_day < t1; ++day) {
    int dow = weekday(day);
    if (dow == 0 || dow == 6) continue; // weekend
    int64_t start = day * ms_per_day + 9 * 3600000;
    int64_t end = day * ms_per_day + 18 * 3600000;
    int64_t lo = std::max(start, t0);
    int64_t hi = std::min(end, t1);
    if (lo < hi) slices.emplace_back(lo, hi);
  }
  return slices;
}

// ---------------------------------------------------------------------------
// canvas generation

ScenarioCanvas generate_canvas(const AvatarGraph& graph, int64_t t_start, int64_t t_end,
                               const CanvasParams& params, uint64_t seed) {
  auto slices = workday_slices(t_start, t_end);
  int64_t total_ms = 0;
  for (auto& [lo, hi] : slices) total_ms += hi - lo;
  if (total_ms <= 0)
    throw Error(ErrorCode::empty_window,
                format_iso_datetime(t_start) + " .. " + format_iso_datetime(t_end) +
                    " contains no workday time");

  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  auto offset_to_abs = [&](double offset) {
    int64_t off = static_cast<int64_t>(offset);
    for (auto& [lo, hi] : slices) {
      int64_t len = hi - lo;
      if (off < len) return lo + off;
      off -= len;
    }
    return slices.back().second - 1;
  };

  ScenarioCanvas canvas;
  canvas.t_start = t_start;
  canvas.t_end = t_end;

  double hours = static_cast<double>(total_ms) / 3600000.0;
  for (const Relation& rel : graph.relations) {
    double lambda = params.rate_base_per_hour * rel.weight * hours;
    std::poisson_distribution<int> poisson(lambda);
    int count = poisson(rng);
    for (int i = 0; i < count; ++i) {
      Interaction email;
      email.at = offset_to_abs(unit(rng) * static_cast<double>(total_ms));
      bool a_sends = unit(rng) < 0.5;
      email.sender = a_sends ? rel.a : rel.b;
      email.recipients = {a_sends ? rel.b : rel.a};
      email.context.relation = rel.kind;
      email.context.tone =
          rel.kind == RelationKind::friendship ? Tone::informel : Tone::formel;
      if (const Project* p = graph.shared_project(rel.a, rel.b); p && !p->keywords.empty()) {
        email.context.keywords = p->keywords;
      } else {
        bool found = false;
        for (const Group& g : graph.groups) {
          bool has_a = std::find(g.members.begin(), g.members.end(), rel.a) != g.members.end();
          bool has_b = std::find(g.members.begin(), g.members.end(), rel.b) != g.members.end();
          if (has_a && has_b) {
            email.context.keywords = {g.id};
            found = true;
            break;
          }
        }
        if (!found) email.context.keywords = {to_string(rel.kind)};
      }
      double p = unit(rng);
      email.context.polarity = p < params.p_neutre
                                   ? Polarity::neutre
                                   : (p < params.p_neutre + params.p_positif
                                          ? Polarity::positif
                                          : Polarity::negatif);
      email.subject = email.context.keywords.front();
      canvas.interactions.push_back(std::move(email));
    }
  }

  std::stable_sort(canvas.interactions.begin(), canvas.interactions.end(),
                   [](const Interaction& a, const Interaction& b) { return a.at < b.at; });
  for (size_t i = 0; i < canvas.interactions.size(); ++i)
    canvas.interactions[i].id = static_cast<int>(i);

  // replies
  const double mu = std::log(params.reply_median_minutes * 60000.0);
  std::lognormal_distribution<double> delay(mu, params.reply_sigma);
  size_t original_count = canvas.interactions.size();
  std::vector<Interaction> replies;
  for (size_t i = 0; i < original_count; ++i) {
    const Interaction& original = canvas.interactions[i];
    if (unit(rng) >= params.reply_prob) continue;
    Interaction reply;
    int64_t when = original.at + std::max<int64_t>(60000, static_cast<int64_t>(delay(rng)));
    reply.at = std::min(when, t_end - 1);
    if (reply.at <= original.at) reply.at = original.at + 1; // strictly later
    if (reply.at >= t_end) continue;                         // no room in the window
    reply.sender = original.recipients.front();
    reply.recipients = {original.sender};
    reply.context = original.context;
    reply.reply_to = original.id;
    reply.subject = "Re: " + original.subject;
    replies.push_back(std::move(reply));
  }
  for (Interaction& reply : replies) {
    reply.id = static_cast<int>(canvas.interactions.size());
    canvas.interactions.push_back(std::move(reply));
  }
  std::stable_sort(canvas.interactions.begin(), canvas.interactions.end(),
                   [](const Interaction& a, const Interaction& b) {
                     if (a.at != b.at) return a.at < b.at;
                     return a.id < b.id;
                   });
  return canvas;
}

// ---------------------------------------------------------------------------
// canvas (de)serialization

std::string canvas_to_json_text(const ScenarioCanvas& canvas) {
  json doc;
  doc["window"] = {{"from", canvas.t_start},
                   {"to", canvas.t_end},
                   {"from_iso", format_iso_datetime(canvas.t_start)},
                   {"to_iso", format_iso_datetime(canvas.t_end)}};
  json list = json::array();
  for (const Interaction& it : canvas.interactions) {
    json j;
    j["id"] = it.id;
    j["at"] = it.at;
    j["at_iso"] = format_iso_datetime(it.at);
    j["kind"] = "email";
    j["sender"] = it.sender;
    j["recipients"] = it.recipients;
    j["context"] = {{"tone", to_string(it.context.tone)},
                    {"polarity", to_string(it.context.polarity)},
                    {"keywords", it.context.keywords},
                    {"relation", to_string(it.context.relation)}};
    if (it.reply_to) j["reply_to"] = *it.reply_to;
    j["subject"] = it.subject;
    if (!it.body.empty()) j["body"] = it.body;
    list.push_back(j);
  }
  doc["interactions"] = list;
  return doc.dump(2) + "\n";
}

ScenarioCanvas parse_canvas_text(const std::string& text, const std::string& origin) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::parse_error, origin + ": " + e.what());
  }
  ScenarioCanvas canvas;
  try {
    canvas.t_start = doc.at("window").at("from").get<int64_t>();
    canvas.t_end = doc.at("window").at("to").get<int64_t>();
    for (const json& j : doc.at("interactions")) {
      Interaction it;
      it.id = j.at("id").get<int>();
      it.at = j.at("at").get<int64_t>();
      it.sender = j.at("sender").get<std::string>();
      it.recipients = j.at("recipients").get<std::vector<std::string>>();
      const json& ctx = j.at("context");
      it.context.tone = tone_from_string(ctx.at("tone").get<std::string>());
      it.context.polarity = polarity_from_string(ctx.at("polarity").get<std::string>());
      it.context.keywords = ctx.at("keywords").get<std::vector<std::string>>();
      it.context.relation =
          relation_kind_from_string(ctx.at("relation").get<std::string>());
      if (j.contains("reply_to") && !j["reply_to"].is_null())
        it.reply_to = j["reply_to"].get<int>();
      it.subject = j.value("subject", std::string());
      it.body = j.value("body", std::string());
      canvas.interactions.push_back(std::move(it));
    }
  } catch (const json::exception& e) {
    throw Error(ErrorCode::parse_error, origin + ": " + e.what());
  }
  return canvas;
}

void save_canvas(const std::string& path, const ScenarioCanvas& canvas) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::io_error, "cannot write canvas " + path);
  out << canvas_to_json_text(canvas);
}

ScenarioCanvas load_canvas(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::io_error, "cannot read canvas " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_canvas_text(buf.str(), path);
}

// ---------------------------------------------------------------------------
// compilation

CompiledScenario compile_canvas(
    const ScenarioCanvas& canvas, const AvatarGraph& graph,
    const std::function<std::string(const TextContext&)>& generate_body) {
  CompiledScenario compiled;
  int seq = 0;
  std::map<std::string, int64_t> agent_busy_until;

  for (const Interaction& it : canvas.interactions) {
    const Avatar* sender = graph.find(it.sender);
    if (!sender)
      throw Error(ErrorCode::dangling_reference,
                  "canvas sender " + it.sender + " not in graph");
    if (!sender->endpoint.valid())
      throw Error(ErrorCode::missing_endpoint, "avatar " + it.sender);

    std::string body = it.body;
    if (body.empty()) {
      if (!generate_body)
        throw Error(ErrorCode::missing_body,
                    "interaction " + std::to_string(it.id) + " has no text attached");
      body = generate_body(it.context);
    }

    // fill the gap since this agent's previous action with an idle wait
    auto busy = agent_busy_until.find(it.sender);
    int64_t prev_end = busy == agent_busy_until.end() ? canvas.t_start : busy->second;
    if (it.at > prev_end) {
      ScheduledAction idle;
      idle.seq = seq++;
      idle.agent = it.sender;
      idle.at = prev_end;
      idle.action.op = actions::UnitAction::Op::wait;
      idle.action.wait_ms = it.at - prev_end;
      compiled.actions.push_back(std::move(idle));
    }

    ScheduledAction send;
    send.seq = seq++;
    send.agent = it.sender;
    send.at = it.at;
    send.interaction_id = it.id;
    send.action.op = actions::UnitAction::Op::send_mail;
    send.action.to = it.recipients.front();
    send.action.subject = it.subject;
    send.action.body = body;
    if (it.reply_to) send.deps.push_back(*it.reply_to);
    compiled.actions.push_back(std::move(send));
    agent_busy_until[it.sender] = it.at;
  }
  return compiled;
}

// ---------------------------------------------------------------------------
// orchestration

namespace {

struct ActionState {
  enum class Phase { pending, running, ok, failed, skipped };
  Phase phase = Phase::pending;
};

} // namespace

OrchestrationReport orchestrate(const CompiledScenario& scenario, AgentExecutor& executor,
                                Clock& clock) {
  // cycle check over interaction ids (Kahn)
  {
    std::map<int, std::vector<int>> edges; // dep -> dependents
    std::map<int, int> indegree;
    for (const ScheduledAction& a : scenario.actions) {
      if (a.interaction_id >= 0 && !indegree.count(a.interaction_id))
        indegree[a.interaction_id] = 0;
      for (int dep : a.deps) {
        edges[dep].push_back(a.interaction_id);
        indegree[a.interaction_id]++;
      }
    }
    std::vector<int> queue;
    for (auto& [id, deg] : indegree)
      if (deg == 0) queue.push_back(id);
    size_t visited = 0;
    while (!queue.empty()) {
      int id = queue.back();
      queue.pop_back();
      visited++;
      for (int next : edges[id])
        if (--indegree[next] == 0) queue.push_back(next);
    }
    if (visited != indegree.size())
      throw Error(ErrorCode::cyclic_dependencies, "dependency graph has a cycle");
  }

  OrchestrationReport report;
  std::vector<ActionState> state(scenario.actions.size());
  std::map<int, ActionState::Phase> interaction_phase; // completions by interaction id
  std::set<int> known_interactions;
  for (const ScheduledAction& a : scenario.actions)
    if (a.interaction_id >= 0) known_interactions.insert(a.interaction_id);

  // per-agent queues in listed order
  std::map<std::string, std::vector<size_t>> agent_actions;
  for (size_t i = 0; i < scenario.actions.size(); ++i)
    agent_actions[scenario.actions[i].agent].push_back(i);
  std::map<std::string, size_t> agent_next;
  std::map<std::string, bool> agent_busy;
  for (auto& [agent, _] : agent_actions) {
    agent_next[agent] = 0;
    agent_busy[agent] = false;
  }

  std::mutex mu;
  std::condition_variable done_cv;
  struct Completion {
    size_t index;
    bool ok;
  };
  std::vector<Completion> completions;
  std::vector<std::thread> workers;

  auto record = [&](size_t i, DispatchRecord::Outcome outcome, int64_t now) {
    const ScheduledAction& a = scenario.actions[i];
    report.records.push_back(
        {a.seq, a.agent, a.interaction_id, a.at, now, outcome});
  };

  auto deps_status = [&](const ScheduledAction& a) {
    // all ok -> 1; any failed/skipped/unknown -> -1; else still pending -> 0
    bool dead = false, pending = false;
    for (int dep : a.deps) {
      if (!known_interactions.count(dep)) {
        dead = true; // dep not in the scenario at all
        continue;
      }
      auto it = interaction_phase.find(dep);
      if (it == interaction_phase.end()) {
        pending = true; // scheduled but not finished yet
      } else if (it->second == ActionState::Phase::failed ||
                 it->second == ActionState::Phase::skipped) {
        dead = true;
      } else if (it->second != ActionState::Phase::ok) {
        pending = true;
      }
    }
    if (dead) return -1;
    return pending ? 0 : 1;
  };

  std::unique_lock lock(mu);
  size_t unfinished = scenario.actions.size();
  while (unfinished > 0) {
    // drain completions
    for (const Completion& c : completions) {
      const ScheduledAction& a = scenario.actions[c.index];
      state[c.index].phase = c.ok ? ActionState::Phase::ok : ActionState::Phase::failed;
      if (a.interaction_id >= 0) interaction_phase[a.interaction_id] = state[c.index].phase;
      agent_busy[a.agent] = false;
      unfinished--;
    }
    completions.clear();
    if (unfinished == 0) break;

    bool progressed = false;
    bool any_running = false;
    int64_t next_time = std::numeric_limits<int64_t>::max();
    int64_t now = clock.now_ms();

    for (auto& [agent, queue] : agent_actions) {
      if (agent_busy[agent]) {
        any_running = true;
        continue;
      }
      size_t& cursor = agent_next[agent];
      if (cursor >= queue.size()) continue;
      size_t index = queue[cursor];
      const ScheduledAction& a = scenario.actions[index];
      int ds = deps_status(a);
      if (ds < 0) {
        state[index].phase = ActionState::Phase::skipped;
        if (a.interaction_id >= 0)
          interaction_phase[a.interaction_id] = ActionState::Phase::skipped;
        record(index, DispatchRecord::Outcome::skipped, now);
        cursor++;
        unfinished--;
        progressed = true;
        continue;
      }
      if (ds == 0) continue; // wait for dependency
      if (a.at > now) {
        next_time = std::min(next_time, a.at);
        continue;
      }
      // dispatch
      state[index].phase = ActionState::Phase::running;
      agent_busy[agent] = true;
      cursor++;
      progressed = true;
      workers.emplace_back([&, index] {
        bool ok = false;
        try {
          ok = executor.execute(scenario.actions[index].agent,
                                scenario.actions[index].action);
        } catch (...) {
          ok = false;
        }
        std::lock_guard inner(mu);
        completions.push_back({index, ok});
        done_cv.notify_all();
      });
      // the dispatch itself, recorded at dispatch time
      DispatchRecord::Outcome outcome = DispatchRecord::Outcome::ok; // provisional
      record(index, outcome, now);
    }

    if (progressed) continue;
    if (!completions.empty()) continue;
    if (any_running || std::any_of(agent_busy.begin(), agent_busy.end(),
                                   [](auto& kv) { return kv.second; })) {
      done_cv.wait_for(lock, std::chrono::milliseconds(20));
      continue;
    }
    if (next_time != std::numeric_limits<int64_t>::max()) {
      lock.unlock();
      clock.sleep_until(next_time);
      lock.lock();
      continue;
    }
    break; // nothing runnable
  }
  lock.unlock();

  for (std::thread& t : workers)
    if (t.joinable()) t.join();

  // fold execution results into the dispatch records
  {
    std::lock_guard inner(mu);
    for (DispatchRecord& r : report.records) {
      if (r.outcome == DispatchRecord::Outcome::skipped) continue;
      for (size_t i = 0; i < scenario.actions.size(); ++i) {
        if (scenario.actions[i].seq != r.seq) continue;
        r.outcome = state[i].phase == ActionState::Phase::ok
                        ? DispatchRecord::Outcome::ok
                        : DispatchRecord::Outcome::failed;
        break;
      }
    }
  }
  return report;
}

} // namespace usim::scenario
