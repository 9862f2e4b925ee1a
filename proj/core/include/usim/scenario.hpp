#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "usim/actions.hpp"
#include "usim/channel.hpp"
#include "usim/clock.hpp"

namespace usim::scenario {

enum class RelationKind { friendship, colleague, hierarchy, client_supplier, partner };
enum class Tone { formel, informel };
enum class Polarity { positif, negatif, neutre };

const char* to_string(RelationKind kind);
const char* to_string(Tone tone);
const char* to_string(Polarity polarity);
RelationKind relation_kind_from_string(const std::string& name);
Tone tone_from_string(const std::string& name);
Polarity polarity_from_string(const std::string& name);

struct Avatar {
  std::string id;
  std::string name;
  std::string role;
  channel::Endpoint endpoint; // may be empty until deployment
  std::string profile;
};

struct Group {
  std::string id;
  std::vector<std::string> members;
};

struct Project {
  std::string id;
  std::vector<std::string> keywords;
  std::vector<std::string> members;
};

struct Relation {
  std::string a;
  std::string b;
  RelationKind kind = RelationKind::colleague;
  double weight = 1.0; // (0,1]
};

struct AvatarGraph {
  std::vector<Avatar> avatars;
  std::vector<Group> groups;
  std::vector<Project> projects;
  std::vector<Relation> relations;

  const Avatar* find(const std::string& id) const;
  bool related(const std::string& a, const std::string& b) const;
  bool share_group(const std::string& a, const std::string& b) const;
  const Project* shared_project(const std::string& a, const std::string& b) const;
};

AvatarGraph load_graph(const std::string& path);
AvatarGraph parse_graph_text(const std::string& text, const std::string& origin);

struct TextContext {
  Tone tone = Tone::formel;
  Polarity polarity = Polarity::neutre;
  std::vector<std::string> keywords; // non-empty
  RelationKind relation = RelationKind::colleague;
};

struct Interaction {
  int id = 0;
  int64_t at = 0; // epoch milliseconds
  std::string sender;
  std::vector<std::string> recipients;
  TextContext context;
  std::optional<int> reply_to;
  std::string subject;
  std::string body; // attached by compile or operator
};

struct ScenarioCanvas {
  int64_t t_start = 0;
  int64_t t_end = 0;
  std::vector<Interaction> interactions; // time-ordered
};

struct CanvasParams {
  double rate_base_per_hour = 0.5; // emails/hour per unit weight
  double reply_prob = 0.4;
  double reply_median_minutes = 20.0;
  double reply_sigma = 0.5;
  double p_neutre = 0.6;
  double p_positif = 0.3;
  double p_negatif = 0.1;
};

// Civil time helpers ("YYYY-MM-DDTHH:MM:SS"; no timezone handling).
int64_t parse_iso_datetime(const std::string& text);
std::string format_iso_datetime(int64_t ms);

// Monday-to-Friday 09:00-18:00 portions of [t0, t1).
std::vector<std::pair<int64_t, int64_t>> workday_slices(int64_t t0, int64_t t1);

// Poisson interactions per related pair, rate scaled by the relation
// weight; friends talk informally, everyone else formally; keywords come
// from a shared project, then a shared group, then the relation kind.
// Deterministic under seed. Throws Error{empty_window} when the window
// misses all workday slices.
ScenarioCanvas generate_canvas(const AvatarGraph& graph, int64_t t_start, int64_t t_end,
                               const CanvasParams& params, uint64_t seed);

std::string canvas_to_json_text(const ScenarioCanvas& canvas);
ScenarioCanvas parse_canvas_text(const std::string& text, const std::string& origin);
void save_canvas(const std::string& path, const ScenarioCanvas& canvas);
ScenarioCanvas load_canvas(const std::string& path);

struct ScheduledAction {
  int seq = 0; // global order of creation
  std::string agent;
  int64_t at = 0; // epoch ms on the shared clock
  actions::UnitAction action;
  int interaction_id = -1;    // -1 for filler waits
  std::vector<int> deps;      // interaction ids that must succeed first
};

struct CompiledScenario {
  std::vector<ScheduledAction> actions; // per-agent order == listed order
};

// Each interaction becomes a send_mail on the sender's agent; replies
// gain a happens-before edge on their original; idle gaps between an
// agent's sends become wait actions. Bodies come from the interaction or
// the generator. Throws missing-endpoint / missing-body.
CompiledScenario compile_canvas(
    const ScenarioCanvas& canvas, const AvatarGraph& graph,
    const std::function<std::string(const TextContext&)>& generate_body = nullptr);

// Execution seam: the orchestrator dispatches, executors do the work.
// The CLI backs this with a channel session + actions::Executor per
// agent; tests use stubs.
class AgentExecutor {
 public:
  virtual ~AgentExecutor() = default;
  virtual bool execute(const std::string& agent, const actions::UnitAction& action) = 0;
};

struct DispatchRecord {
  int seq = 0;
  std::string agent;
  int interaction_id = -1;
  int64_t scheduled_at = 0;
  int64_t dispatched_at = 0;
  enum class Outcome { ok, failed, skipped } outcome = Outcome::ok;
};

struct OrchestrationReport {
  std::vector<DispatchRecord> records; // in dispatch order
};

// Dispatches each action once its scheduled time is reached and its
// dependencies succeeded; failures mark dependents skipped; per-agent
// order is preserved; agents fail independently. Throws
// Error{cyclic_dependencies}.
OrchestrationReport orchestrate(const CompiledScenario& scenario, AgentExecutor& executor,
                                Clock& clock);

} // namespace usim::scenario
