#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "usim/channel.hpp"
#include "usim/clock.hpp"
#include "usim/frame.hpp"
#include "usim/humanizer.hpp"
#include "usim/vision.hpp"

namespace usim::actions {

// One way of locating an element on screen. Strategies are tried in
// manifest order; the first one that produces a hit wins.
struct LocatorStrategy {
  enum class Type { template_match, zone, abs_rect };
  Type type = Type::abs_rect;

  // template_match
  std::string image_path;
  Frame image;
  double threshold = 0.8;

  // zone (kind plus optional exact OCR label)
  vision::ZoneKind kind = vision::ZoneKind::unknown;
  std::string label;

  // abs_rect
  Rect rect;
};

struct ElementLocator {
  std::vector<LocatorStrategy> strategies;
  std::string verify_appears; // element expected on screen after activation
  int clicks = 1;             // gesture for open_app / default click count
};

// Maps functional element identities to the visual cues valid in one
// desktop environment (the Thunderbird-vs-Outlook seam).
struct EnvironmentProfile {
  std::string name;
  std::map<std::string, ElementLocator> elements;
  vision::PrototypeClassifier prototypes; // may be empty
  Rgb link_colour{0, 0, 238};
  int link_tolerance = 16;
  vision::GeometryRules rules = vision::GeometryRules::defaults();
  human::HumanizerConfig humanizer;

  bool has(const std::string& id) const { return elements.count(id) > 0; }
};

// Reads <dir>/manifest.json and decodes every referenced image. Throws
// Error with missing-manifest, missing-image or dangling-element-id.
EnvironmentProfile load_profile(const std::string& dir);

// First strategy with a hit wins; multiple hits resolve to the highest
// score, ties to the top-left. Throws Error{element_not_found} when all
// strategies are exhausted.
Rect resolve_element(const Frame& frame, const EnvironmentProfile& profile,
                     const std::string& element_id);

struct UnitAction {
  enum class Op { open_app, click, type_text, read_text, find_links, wait, send_mail };
  Op op = Op::wait;
  std::string element;
  uint8_t button = button::left;
  int clicks = 0; // 0 = profile default
  std::string text;
  int64_t wait_ms = 0;
  std::string to, subject, body; // send_mail
  bool best_effort = false;

  std::string describe() const;
};

// Element ids the send_mail composite expects a profile to define.
namespace mail_elements {
inline const std::string client = "mail-client";
inline const std::string compose = "compose";
inline const std::string to_field = "to-field";
inline const std::string subject_field = "subject-field";
inline const std::string body_area = "body-area";
inline const std::string send_button = "send-button";
} // namespace mail_elements

std::vector<UnitAction> send_mail_expansion(const UnitAction& mail);

struct ActionReport {
  UnitAction action;
  enum class Status { ok, failed } status = Status::ok;
  int retries = 0; // extra attempts before the final one
  std::string failure;
  int64_t wall_ms = 0;
  int frames_examined = 0;
  std::string value; // read_text output, find_links JSON
};

struct ExecBudget {
  int retries = 3;
  int64_t recheck_ms = 250;
};

// Drives one session: capture -> resolve -> humanized gesture ->
// post-verification, with bounded retries. All device output flows
// through the channel session fed by humanizer streams.
class Executor {
 public:
  Executor(channel::Session& session, const EnvironmentProfile& profile,
           uint64_t seed, Clock* clock = nullptr);

  ActionReport execute(const UnitAction& action, const ExecBudget& budget = {});

  // Sequential; stops at the first failure unless best_effort.
  // Throws Error{empty_script} on an empty list.
  std::vector<ActionReport> run_script(const std::vector<UnitAction>& script,
                                       const ExecBudget& budget = {});

  Point cursor() const { return cursor_; }

 private:
  struct Attempt {
    bool ok = false;
    std::string failure;
    int frames = 0;
  };

  Attempt attempt_activation(const UnitAction& action, const ElementLocator& locator);
  void play_trajectory(const human::Trajectory& traj);
  void play_keys(const std::vector<KeyEvent>& events);
  void click_at(Point p, uint8_t btn, int count);
  Frame capture();

  channel::Session& session_;
  const EnvironmentProfile& profile_;
  human::Rng rng_;
  WallClock wall_clock_;
  Clock* clock_;
  Point cursor_{0, 0};
};

// Script files are JSON arrays of unit actions.
std::vector<UnitAction> load_script(const std::string& path);
std::vector<UnitAction> parse_script_text(const std::string& text,
                                          const std::string& origin);

std::string report_to_json(const std::vector<ActionReport>& reports);

} // namespace usim::actions
