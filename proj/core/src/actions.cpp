#include "usim/actions.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "usim/error.hpp"
#include "usim/image_io.hpp"

namespace usim::actions {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

Rgb parse_rgb(const json& j) {
  return {static_cast<uint8_t>(j.at(0).get<int>()),
          static_cast<uint8_t>(j.at(1).get<int>()),
          static_cast<uint8_t>(j.at(2).get<int>())};
}

void apply_humanizer_overrides(human::HumanizerConfig& cfg, const json& j) {
  cfg.tick_ms = j.value("tick_ms", cfg.tick_ms);
  cfg.duration_base_ms = j.value("duration_base_ms", cfg.duration_base_ms);
  cfg.duration_gain = j.value("duration_gain", cfg.duration_gain);
  cfg.curvature = j.value("curvature", cfg.curvature);
  cfg.jitter_sigma = j.value("jitter_sigma", cfg.jitter_sigma);
  cfg.inertia_alpha = j.value("inertia_alpha", cfg.inertia_alpha);
  cfg.vmax_px_per_ms = j.value("vmax_px_per_ms", cfg.vmax_px_per_ms);
  cfg.key_latency_mu = j.value("key_latency_mu", cfg.key_latency_mu);
  cfg.key_latency_sigma = j.value("key_latency_sigma", cfg.key_latency_sigma);
  cfg.key_latency_min_ms = j.value("key_latency_min_ms", cfg.key_latency_min_ms);
  cfg.key_latency_max_ms = j.value("key_latency_max_ms", cfg.key_latency_max_ms);
  cfg.idle_amplitude_px = j.value("idle_amplitude_px", cfg.idle_amplitude_px);
}

} // namespace

EnvironmentProfile load_profile(const std::string& dir) {
  fs::path manifest_path = fs::path(dir) / "manifest.json";
  std::ifstream in(manifest_path);
  if (!in)
    throw Error(ErrorCode::missing_manifest, manifest_path.string());
  json doc;
  try {
    in >> doc;
  } catch (const json::exception& e) {
    throw Error(ErrorCode::parse_error, manifest_path.string() + ": " + e.what());
  }

  EnvironmentProfile profile;
  try {
    profile.name = doc.value("name", fs::path(dir).filename().string());
    if (doc.contains("link_colour")) profile.link_colour = parse_rgb(doc["link_colour"]);
    profile.link_tolerance = doc.value("link_tolerance", 16);
    if (doc.contains("humanizer"))
      apply_humanizer_overrides(profile.humanizer, doc["humanizer"]);

    for (auto& [id, je] : doc.at("elements").items()) {
      ElementLocator locator;
      locator.verify_appears = je.value("verify_appears", std::string());
      locator.clicks = je.value("clicks", 1);
      for (const json& js : je.at("strategies")) {
        LocatorStrategy s;
        std::string type = js.at("type").get<std::string>();
        if (type == "template") {
          s.type = LocatorStrategy::Type::template_match;
          s.image_path = (fs::path(dir) / js.at("image").get<std::string>()).string();
          s.threshold = js.value("threshold", 0.8);
          if (!fs::exists(s.image_path))
            throw Error(ErrorCode::missing_image, s.image_path);
          s.image = read_ppm(s.image_path);
        } else if (type == "zone") {
          s.type = LocatorStrategy::Type::zone;
          s.kind = vision::zone_kind_from_string(js.at("kind").get<std::string>());
          s.label = js.value("label", std::string());
        } else if (type == "rect") {
          s.type = LocatorStrategy::Type::abs_rect;
          const json& jr = js.at("rect");
          s.rect = {jr.at(0).get<int>(), jr.at(1).get<int>(), jr.at(2).get<int>(),
                    jr.at(3).get<int>()};
        } else {
          throw Error(ErrorCode::parse_error, "unknown strategy type \"" + type + "\"");
        }
        locator.strategies.push_back(std::move(s));
      }
      if (locator.strategies.empty())
        throw Error(ErrorCode::parse_error, "element " + id + " has no strategies");
      profile.elements.emplace(id, std::move(locator));
    }

    if (doc.contains("prototypes")) {
      for (auto& [kind_name, files] : doc["prototypes"].items()) {
        vision::ZoneKind kind = vision::zone_kind_from_string(kind_name);
        for (const json& jf : files) {
          fs::path p = fs::path(dir) / jf.get<std::string>();
          if (!fs::exists(p)) throw Error(ErrorCode::missing_image, p.string());
          profile.prototypes.add_prototype(kind, read_ppm(p.string()));
        }
      }
    }
  } catch (const json::exception& e) {
    throw Error(ErrorCode::parse_error, manifest_path.string() + ": " + e.what());
  }

  // Cross-references must land on declared elements.
  for (const auto& [id, locator] : profile.elements) {
    if (!locator.verify_appears.empty() && !profile.has(locator.verify_appears))
      throw Error(ErrorCode::dangling_element_id,
                  id + " verify_appears -> " + locator.verify_appears);
  }
  return profile;
}

Rect resolve_element(const Frame& frame, const EnvironmentProfile& profile,
                     const std::string& element_id) {
  auto it = profile.elements.find(element_id);
  if (it == profile.elements.end())
    throw Error(ErrorCode::element_not_found, element_id + " not in profile");

  for (const LocatorStrategy& s : it->second.strategies) {
    switch (s.type) {
      case LocatorStrategy::Type::template_match: {
        auto hits = vision::match_template(frame, s.image, s.threshold);
        if (!hits.empty()) return hits.front().rect; // score desc, ties top-left
        break;
      }
      case LocatorStrategy::Type::zone: {
        vision::RuleTrustingClassifier trusting;
        const vision::ZoneClassifier& classifier =
            profile.prototypes.empty()
                ? static_cast<const vision::ZoneClassifier&>(trusting)
                : static_cast<const vision::ZoneClassifier&>(profile.prototypes);
        auto zones = vision::detect_zones(frame, profile.rules, classifier);
        const vision::ZoneOfInterest* best = nullptr;
        for (const auto& zone : zones) {
          if (zone.kind != s.kind) continue;
          if (!s.label.empty() && vision::ocr_line(frame, zone.rect) != s.label)
            continue;
          if (!best || zone.confidence > best->confidence ||
              (zone.confidence == best->confidence &&
               (zone.rect.y < best->rect.y ||
                (zone.rect.y == best->rect.y && zone.rect.x < best->rect.x))))
            best = &zone;
        }
        if (best) return best->rect;
        break;
      }
      case LocatorStrategy::Type::abs_rect:
        if (!s.rect.empty() && s.rect.right() <= frame.width &&
            s.rect.bottom() <= frame.height)
          return s.rect;
        break;
    }
  }
  throw Error(ErrorCode::element_not_found,
              element_id + ": all strategies exhausted");
}

std::string UnitAction::describe() const {
  switch (op) {
    case Op::open_app: return "open_app(" + element + ")";
    case Op::click: return "click(" + element + ")";
    case Op::type_text: return "type_text(" + std::to_string(text.size()) + " chars)";
    case Op::read_text: return "read_text(" + element + ")";
    case Op::find_links: return "find_links()";
    case Op::wait: return "wait(" + std::to_string(wait_ms) + ")";
    case Op::send_mail: return "send_mail(to=" + to + ")";
  }
  return "?";
}

std::vector<UnitAction> send_mail_expansion(const UnitAction& mail) {
  auto click = [](const std::string& id) {
    UnitAction a;
    a.op = UnitAction::Op::click;
    a.element = id;
    return a;
  };
  auto type = [](const std::string& text) {
    UnitAction a;
    a.op = UnitAction::Op::type_text;
    a.text = text;
    return a;
  };
  UnitAction open;
  open.op = UnitAction::Op::open_app;
  open.element = mail_elements::client;
  return {open,
          click(mail_elements::compose),
          click(mail_elements::to_field),
          type(mail.to),
          click(mail_elements::subject_field),
          type(mail.subject),
          click(mail_elements::body_area),
          type(mail.body),
          click(mail_elements::send_button)};
}

Executor::Executor(channel::Session& session, const EnvironmentProfile& profile,
                   uint64_t seed, Clock* clock)
    : session_(session), profile_(profile), rng_(seed),
      clock_(clock ? clock : &wall_clock_) {}

Frame Executor::capture() { return session_.capture_frame(); }

void Executor::play_trajectory(const human::Trajectory& traj) {
  int64_t prev = 0;
  uint8_t held = 0; // gestures play with no buttons down
  for (const auto& sample : traj.samples) {
    clock_->sleep_for(sample.at - prev);
    prev = sample.at;
    session_.send_pointer({sample.x, sample.y, held, clock_->now_ms()});
    cursor_ = {sample.x, sample.y};
  }
}

void Executor::play_keys(const std::vector<KeyEvent>& events) {
  int64_t prev = 0;
  for (const KeyEvent& event : events) {
    clock_->sleep_for(event.at - prev);
    prev = event.at;
    session_.send_key({event.keysym, event.pressed, clock_->now_ms()});
  }
}

void Executor::click_at(Point p, uint8_t btn, int count) {
  std::uniform_int_distribution<int> hold(profile_.humanizer.key_hold_min_ms,
                                          profile_.humanizer.key_hold_max_ms);
  std::uniform_int_distribution<int> gap(profile_.humanizer.click_gap_min_ms,
                                         profile_.humanizer.click_gap_max_ms);
  for (int i = 0; i < count; ++i) {
    if (i > 0) clock_->sleep_for(gap(rng_));
    session_.send_pointer({p.x, p.y, btn, clock_->now_ms()});
    clock_->sleep_for(hold(rng_));
    session_.send_pointer({p.x, p.y, 0, clock_->now_ms()});
  }
}

Executor::Attempt Executor::attempt_activation(const UnitAction& action,
                                               const ElementLocator& locator) {
  Attempt attempt;
  Frame pre = capture();
  attempt.frames++;
  Rect rect;
  try {
    rect = resolve_element(pre, profile_, action.element);
  } catch (const Error& e) {
    attempt.failure = e.what();
    return attempt;
  }

  int clicks = action.clicks > 0 ? action.clicks : locator.clicks;
  if (action.op == UnitAction::Op::open_app && action.clicks == 0)
    clicks = std::max(clicks, locator.clicks);
  play_trajectory(human::plan_trajectory(cursor_, rect.center(), profile_.humanizer, rng_));
  click_at(rect.center(), action.button, clicks);

  Frame post = capture();
  attempt.frames++;
  if (!locator.verify_appears.empty()) {
    try {
      resolve_element(post, profile_, locator.verify_appears);
      attempt.ok = true;
    } catch (const Error&) {
      attempt.failure = "expected element " + locator.verify_appears + " absent";
    }
    return attempt;
  }
  // Fallback predicate: the click must have produced some visual
  // response inside the target rect (hover highlight at minimum).
  for (int y = rect.y; y < rect.bottom() && !attempt.ok; ++y)
    for (int x = rect.x; x < rect.right(); ++x)
      if (!(pre.at(x, y) == post.at(x, y))) {
        attempt.ok = true;
        break;
      }
  if (!attempt.ok) attempt.failure = "no visual response in target rect";
  return attempt;
}

ActionReport Executor::execute(const UnitAction& action, const ExecBudget& budget) {
  ActionReport report;
  report.action = action;
  int64_t t0 = wall_clock_.now_ms();

  auto finish = [&](ActionReport::Status status, const std::string& why = "") {
    report.status = status;
    report.failure = why;
    report.wall_ms = wall_clock_.now_ms() - t0;
    return report;
  };

  try {
    switch (action.op) {
      case UnitAction::Op::open_app:
      case UnitAction::Op::click: {
        auto it = profile_.elements.find(action.element);
        if (it == profile_.elements.end())
          return finish(ActionReport::Status::failed,
                        "element-not-found: " + action.element + " not in profile");
        std::string last_failure;
        for (int attempt_no = 0; attempt_no <= budget.retries; ++attempt_no) {
          if (attempt_no > 0) clock_->sleep_for(budget.recheck_ms);
          Attempt attempt = attempt_activation(action, it->second);
          report.frames_examined += attempt.frames;
          if (attempt.ok) {
            report.retries = attempt_no;
            return finish(ActionReport::Status::ok);
          }
          last_failure = attempt.failure;
        }
        report.retries = budget.retries;
        return finish(ActionReport::Status::failed, last_failure);
      }
      case UnitAction::Op::type_text: {
        play_keys(human::keystroke_schedule(action.text, profile_.humanizer, rng_));
        return finish(ActionReport::Status::ok);
      }
      case UnitAction::Op::read_text: {
        std::string last_failure;
        for (int attempt_no = 0; attempt_no <= budget.retries; ++attempt_no) {
          if (attempt_no > 0) clock_->sleep_for(budget.recheck_ms);
          Frame frame = capture();
          report.frames_examined++;
          try {
            Rect rect = resolve_element(frame, profile_, action.element);
            // inset past widget borders before reading
            Rect inner{rect.x + 2, rect.y + 2, rect.w - 4, rect.h - 4};
            report.value = vision::ocr_line(frame, inner.empty() ? rect : inner);
            report.retries = attempt_no;
            return finish(ActionReport::Status::ok);
          } catch (const Error& e) {
            last_failure = e.what();
          }
        }
        report.retries = budget.retries;
        return finish(ActionReport::Status::failed, last_failure);
      }
      case UnitAction::Op::find_links: {
        Frame frame = capture();
        report.frames_examined++;
        auto links = vision::find_links(frame, profile_.link_colour,
                                        profile_.link_tolerance);
        json out = json::array();
        for (const auto& link : links) {
          out.push_back({{"rect", {link.rect.x, link.rect.y, link.rect.w, link.rect.h}},
                         {"text", link.text}});
        }
        report.value = out.dump();
        return finish(ActionReport::Status::ok);
      }
      case UnitAction::Op::wait: {
        // Short waits wiggle the pointer the whole time; long waits get
        // a jitter burst then a quiet stretch, repeated.
        int64_t remaining = action.wait_ms;
        while (remaining > 0) {
          int64_t burst = std::min<int64_t>(remaining, 1000);
          human::Trajectory traj =
              human::idle_jitter(cursor_, burst, profile_.humanizer, rng_);
          play_trajectory(traj);
          int64_t covered = traj.samples.empty() ? 0 : traj.samples.back().at;
          clock_->sleep_for(burst - covered);
          remaining -= burst;
          if (remaining > 0) {
            int64_t quiet = std::min<int64_t>(remaining, 30000);
            clock_->sleep_for(quiet);
            remaining -= quiet;
          }
        }
        return finish(ActionReport::Status::ok);
      }
      case UnitAction::Op::send_mail: {
        for (const UnitAction& sub : send_mail_expansion(action)) {
          ActionReport sub_report = execute(sub, budget);
          report.frames_examined += sub_report.frames_examined;
          report.retries += sub_report.retries;
          if (sub_report.status != ActionReport::Status::ok)
            return finish(ActionReport::Status::failed,
                          sub.describe() + ": " + sub_report.failure);
        }
        return finish(ActionReport::Status::ok);
      }
    }
  } catch (const Error& e) {
    if (e.code() == ErrorCode::session_closed) throw;
    return finish(ActionReport::Status::failed, e.what());
  }
  return finish(ActionReport::Status::failed, "unhandled action");
}

std::vector<ActionReport> Executor::run_script(const std::vector<UnitAction>& script,
                                               const ExecBudget& budget) {
  if (script.empty()) throw Error(ErrorCode::empty_script, "script has no actions");
  std::vector<ActionReport> reports;
  for (const UnitAction& action : script) {
    reports.push_back(execute(action, budget));
    if (reports.back().status == ActionReport::Status::failed && !action.best_effort)
      break;
  }
  return reports;
}

namespace {

UnitAction parse_action(const json& j) {
  UnitAction a;
  std::string op = j.at("op").get<std::string>();
  if (op == "open_app") {
    a.op = UnitAction::Op::open_app;
    a.element = j.at("element").get<std::string>();
  } else if (op == "click") {
    a.op = UnitAction::Op::click;
    a.element = j.at("element").get<std::string>();
    std::string btn = j.value("button", std::string("left"));
    a.button = btn == "right" ? button::right
                              : (btn == "middle" ? button::middle : button::left);
    a.clicks = j.value("clicks", 0);
  } else if (op == "type_text") {
    a.op = UnitAction::Op::type_text;
    a.text = j.at("text").get<std::string>();
  } else if (op == "read_text") {
    a.op = UnitAction::Op::read_text;
    a.element = j.at("element").get<std::string>();
  } else if (op == "find_links") {
    a.op = UnitAction::Op::find_links;
  } else if (op == "wait") {
    a.op = UnitAction::Op::wait;
    a.wait_ms = j.at("ms").get<int64_t>();
  } else if (op == "send_mail") {
    a.op = UnitAction::Op::send_mail;
    a.to = j.at("to").get<std::string>();
    a.subject = j.at("subject").get<std::string>();
    a.body = j.at("body").get<std::string>();
  } else {
    throw Error(ErrorCode::parse_error, "unknown action op \"" + op + "\"");
  }
  a.best_effort = j.value("best_effort", false);
  return a;
}

} // namespace

std::vector<UnitAction> parse_script_text(const std::string& text,
                                          const std::string& origin) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::parse_error, origin + ": " + e.what());
  }
  if (!doc.is_array())
    throw Error(ErrorCode::parse_error, origin + ": script must be a JSON array");
  std::vector<UnitAction> script;
  try {
    for (const json& j : doc) script.push_back(parse_action(j));
  } catch (const json::exception& e) {
    throw Error(ErrorCode::parse_error, origin + ": " + e.what());
  }
  return script;
}

std::vector<UnitAction> load_script(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::io_error, "cannot read script " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_script_text(buf.str(), path);
}

std::string report_to_json(const std::vector<ActionReport>& reports) {
  json out = json::array();
  for (const ActionReport& r : reports) {
    json jr;
    jr["action"] = r.action.describe();
    jr["outcome"] = r.status == ActionReport::Status::ok
                        ? (r.retries > 0 ? "retried" : "ok")
                        : "failed";
    jr["retries"] = r.retries;
    if (!r.failure.empty()) jr["reason"] = r.failure;
    jr["wall_ms"] = r.wall_ms;
    jr["frames_examined"] = r.frames_examined;
    if (!r.value.empty()) jr["value"] = r.value;
    out.push_back(jr);
  }
  return out.dump(2);
}

} // namespace usim::actions
