#include "usim/recorder.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>

#include <json.hpp>

#include "usim/error.hpp"
#include "usim/image_io.hpp"
#include "usim/keysym.hpp"
#include "usim/simdesk.hpp"

namespace usim::recorder {

namespace fs = std::filesystem;
using nlohmann::json;

RecordingTap::RecordingTap(channel::Session& session, Clock* clock,
                           RecorderOptions options)
    : session_(session), clock_(clock ? clock : &wall_clock_), options_(options) {
  {
    std::lock_guard lock(mu_);
    capture_keyframe_locked(); // initial state
  }
  cadence_ = std::thread([this] {
    for (;;) {
      {
        std::unique_lock lock(mu_);
        if (stopping_) return;
        int64_t last = recording_.keyframes.empty() ? 0 : recording_.keyframes.back().at;
        if (clock_->now_ms() - last >= options_.keyframe_interval_ms)
          capture_keyframe_locked();
      }
      std::this_thread::sleep_for(std::chrono::milliseconds(20));
    }
  });
}

RecordingTap::~RecordingTap() {
  {
    std::lock_guard lock(mu_);
    stopping_ = true;
  }
  if (cadence_.joinable()) cadence_.join();
}

void RecordingTap::capture_keyframe_locked() {
  Frame frame = session_.capture_frame();
  recording_.keyframes.push_back({clock_->now_ms(), std::move(frame)});
}

void RecordingTap::send_pointer(const PointerEvent& event) {
  std::lock_guard lock(mu_);
  int64_t now = clock_->now_ms();
  uint8_t newly_pressed = event.buttons & static_cast<uint8_t>(~button_state_);
  bool is_move = event.buttons == button_state_;

  if (newly_pressed) {
    capture_keyframe_locked(); // the frame "at the moment of the click"
    in_motion_ = false;
  } else if (is_move) {
    bool starts_movement = !in_motion_ || now - last_move_at_ >= options_.movement_gap_ms;
    if (starts_movement) capture_keyframe_locked(); // pre-movement frame
    in_motion_ = true;
    last_move_at_ = now;
  }
  button_state_ = event.buttons;

  PointerEvent stamped = event;
  stamped.at = now;
  session_.send_pointer(stamped);
  RecordedEvent rec;
  rec.kind = RecordedEvent::Kind::pointer;
  rec.pointer = stamped;
  recording_.events.push_back(rec);
}

void RecordingTap::send_key(const KeyEvent& event) {
  std::lock_guard lock(mu_);
  KeyEvent stamped = event;
  stamped.at = clock_->now_ms();
  session_.send_key(stamped);
  RecordedEvent rec;
  rec.kind = RecordedEvent::Kind::key;
  rec.key = stamped;
  recording_.events.push_back(rec);
  in_motion_ = false;
}

Frame RecordingTap::capture_frame() {
  std::lock_guard lock(mu_);
  return session_.capture_frame();
}

Recording RecordingTap::finish() {
  {
    std::lock_guard lock(mu_);
    stopping_ = true;
  }
  if (cadence_.joinable()) cadence_.join();
  std::lock_guard lock(mu_);
  return std::move(recording_);
}

Recording record(channel::Session& session,
                 const std::function<void(RecordingTap&)>& driver, Clock* clock,
                 RecorderOptions options) {
  RecordingTap tap(session, clock, options);
  driver(tap);
  return tap.finish();
}

std::vector<ActionSegment> segment(const Recording& recording, int64_t gap_ms) {
  if (recording.events.empty())
    throw Error(ErrorCode::empty_recording, "no events to segment");

  std::vector<ActionSegment> segments;
  ActionSegment current;
  bool open = false;
  int64_t prev_at = recording.events.front().at();
  uint8_t buttons = 0;
  bool shift = false;

  auto close = [&](int64_t end) {
    if (!open) return;
    current.t1 = end;
    segments.push_back(current);
    open = false;
  };
  auto start = [&](ActionSegment::Kind kind, int64_t t0) {
    current = ActionSegment{};
    current.kind = kind;
    current.t0 = t0;
    current.t1 = t0;
    open = true;
  };

  for (const RecordedEvent& event : recording.events) {
    int64_t at = event.at();
    if (open && at - prev_at >= gap_ms) {
      int64_t idle_start = current.t1;
      close(current.t1);
      start(ActionSegment::Kind::idle, idle_start);
      close(at);
    }

    if (event.kind == RecordedEvent::Kind::pointer) {
      const PointerEvent& p = event.pointer;
      uint8_t newly_pressed = p.buttons & static_cast<uint8_t>(~buttons);
      uint8_t released = buttons & static_cast<uint8_t>(~p.buttons);
      buttons = p.buttons;
      if (newly_pressed) {
        bool merge_click =
            open && current.kind == ActionSegment::Kind::click &&
            at - current.first_press_at <= simdesk::double_click_ms &&
            std::abs(p.x - current.click_pos.x) <= simdesk::double_click_slop_px &&
            std::abs(p.y - current.click_pos.y) <= simdesk::double_click_slop_px &&
            (newly_pressed & current.button) != 0;
        if (merge_click) {
          current.click_count++;
          current.t1 = at;
        } else {
          int64_t t0 = open ? current.t1 : at;
          close(current.t1);
          start(ActionSegment::Kind::click, t0);
          current.click_count = 1;
          current.button = newly_pressed;
          current.click_pos = {p.x, p.y};
          current.first_press_at = at;
          current.t1 = at;
        }
      } else if (released) {
        if (open) current.t1 = at; // release closes out the press
      } else {
        if (!open || current.kind != ActionSegment::Kind::move) {
          int64_t t0 = open ? current.t1 : at;
          close(current.t1);
          start(ActionSegment::Kind::move, t0);
        }
        current.t1 = at;
      }
    } else {
      const KeyEvent& k = event.key;
      if (k.keysym == keysym::shift_left || k.keysym == 0xFFE2) {
        shift = k.pressed;
      }
      if (!open || current.kind != ActionSegment::Kind::type) {
        int64_t t0 = open ? current.t1 : at;
        close(current.t1);
        start(ActionSegment::Kind::type, t0);
      }
      if (k.pressed && k.keysym != keysym::shift_left && k.keysym != 0xFFE2) {
        if (auto c = char_for_keysym(k.keysym, shift)) current.text.push_back(*c);
      }
      current.t1 = at;
    }
    prev_at = at;
  }
  close(recording.events.back().at());
  return segments;
}

namespace {

const Keyframe* latest_keyframe_at_or_before(const Recording& recording, int64_t t) {
  const Keyframe* best = nullptr;
  for (const Keyframe& kf : recording.keyframes)
    if (kf.at <= t && (!best || kf.at >= best->at)) best = &kf;
  return best;
}

const Keyframe* pre_movement_keyframe(const Recording& recording,
                                      const ActionSegment& click_segment) {
  // Keyframe at the start of the movement preceding the click; the
  // initial keyframe covers clicks without a prior move.
  const Keyframe* kf = latest_keyframe_at_or_before(recording, click_segment.t0);
  if (!kf && !recording.keyframes.empty()) kf = &recording.keyframes.front();
  return kf;
}

int rect_distance(const Rect& rect, Point p) {
  int dx = std::max({rect.x - p.x, 0, p.x - (rect.right() - 1)});
  int dy = std::max({rect.y - p.y, 0, p.y - (rect.bottom() - 1)});
  return static_cast<int>(std::llround(std::hypot(dx, dy)));
}

constexpr int kDiffThreshold = 12;
constexpr int kProximityPx = 100;

} // namespace

ExtractedTarget extract_target(const Recording& recording,
                               const ActionSegment& click_segment) {
  const Keyframe* before_move = pre_movement_keyframe(recording, click_segment);
  const Keyframe* at_click =
      latest_keyframe_at_or_before(recording, click_segment.first_press_at);
  if (!before_move || !at_click)
    throw Error(ErrorCode::no_diff_found, "keyframes missing around click");

  const Frame& a = before_move->frame;
  const Frame& b = at_click->frame;
  if (a.width != b.width || a.height != b.height)
    throw Error(ErrorCode::no_diff_found, "keyframe geometry changed");

  vision::GrayImage ga = vision::to_gray(a);
  vision::GrayImage gb = vision::to_gray(b);
  vision::Mask mask(ga.intensities.size(), 0);
  for (size_t i = 0; i < mask.size(); ++i)
    if (std::abs(static_cast<int>(ga.intensities[i]) - gb.intensities[i]) > kDiffThreshold)
      mask[i] = 1;

  auto comps = vision::connected_components(mask, a.width, a.height);
  const vision::Component* chosen = nullptr;
  int chosen_dist = kProximityPx + 1;
  for (const auto& comp : comps) {
    int dist = rect_distance(comp.rect, click_segment.click_pos);
    if (dist < chosen_dist) {
      chosen = &comp;
      chosen_dist = dist;
    }
  }
  if (!chosen || chosen_dist > kProximityPx)
    throw Error(ErrorCode::no_diff_found, "no changed component near click");

  ExtractedTarget target;
  target.rect = chosen->rect;
  target.image = Frame(target.rect.w, target.rect.h);
  for (int y = 0; y < target.rect.h; ++y)
    for (int x = 0; x < target.rect.w; ++x)
      target.image.at(x, y) = a.at(target.rect.x + x, target.rect.y + y);
  return target;
}

ExtractedTarget fallback_target(const Recording& recording,
                                const ActionSegment& click_segment, int size) {
  const Keyframe* before_move = pre_movement_keyframe(recording, click_segment);
  if (!before_move)
    throw Error(ErrorCode::no_diff_found, "no keyframe for fallback crop");
  const Frame& a = before_move->frame;
  Rect rect{click_segment.click_pos.x - size / 2, click_segment.click_pos.y - size / 2,
            size, size};
  rect = rect.intersect({0, 0, a.width, a.height});
  ExtractedTarget target;
  target.rect = rect;
  target.image = Frame(rect.w, rect.h);
  for (int y = 0; y < rect.h; ++y)
    for (int x = 0; x < rect.w; ++x)
      target.image.at(x, y) = a.at(rect.x + x, rect.y + y);
  return target;
}

std::vector<vision::ZoneOfInterest> propose_annotations(const Frame& frame) {
  vision::RuleTrustingClassifier trusting;
  return vision::detect_zones(frame, vision::GeometryRules::defaults(), trusting);
}

void save_annotations(const std::string& path,
                      const std::vector<vision::ZoneOfInterest>& zones) {
  json out = json::array();
  for (const auto& zone : zones) {
    out.push_back({{"rect", {zone.rect.x, zone.rect.y, zone.rect.w, zone.rect.h}},
                   {"kind", vision::to_string(zone.kind)},
                   {"confidence", zone.confidence}});
  }
  std::ofstream file(path);
  if (!file) throw Error(ErrorCode::io_error, "cannot write " + path);
  file << out.dump(2) << "\n";
}

std::vector<vision::ZoneOfInterest> load_annotations(const std::string& path) {
  std::ifstream file(path);
  if (!file) throw Error(ErrorCode::io_error, "cannot read " + path);
  json doc;
  try {
    file >> doc;
  } catch (const json::exception& e) {
    throw Error(ErrorCode::parse_error, path + ": " + e.what());
  }
  std::vector<vision::ZoneOfInterest> zones;
  for (const json& j : doc) {
    vision::ZoneOfInterest zone;
    zone.rect = {j.at("rect").at(0).get<int>(), j.at("rect").at(1).get<int>(),
                 j.at("rect").at(2).get<int>(), j.at("rect").at(3).get<int>()};
    zone.kind = vision::zone_kind_from_string(j.at("kind").get<std::string>());
    zone.confidence = j.at("confidence").get<double>();
    zones.push_back(zone);
  }
  return zones;
}

void save_recording(const std::string& dir, const Recording& recording) {
  fs::create_directories(dir);
  std::ofstream events(fs::path(dir) / "events.jsonl");
  if (!events) throw Error(ErrorCode::io_error, "cannot write events in " + dir);
  for (const RecordedEvent& event : recording.events) {
    json j;
    if (event.kind == RecordedEvent::Kind::pointer) {
      j = {{"at", event.pointer.at},
           {"type", "pointer"},
           {"x", event.pointer.x},
           {"y", event.pointer.y},
           {"buttons", event.pointer.buttons}};
    } else {
      j = {{"at", event.key.at},
           {"type", "key"},
           {"keysym", event.key.keysym},
           {"pressed", event.key.pressed}};
    }
    events << j.dump() << "\n";
  }
  char name[64];
  for (size_t i = 0; i < recording.keyframes.size(); ++i) {
    std::snprintf(name, sizeof(name), "keyframe_%06zu_%lld.ppm", i,
                  static_cast<long long>(recording.keyframes[i].at));
    write_ppm((fs::path(dir) / name).string(), recording.keyframes[i].frame);
  }
}

Recording load_recording(const std::string& dir) {
  Recording recording;
  std::ifstream events(fs::path(dir) / "events.jsonl");
  if (!events) throw Error(ErrorCode::io_error, "cannot read events in " + dir);
  std::string line;
  while (std::getline(events, line)) {
    if (line.empty()) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::exception& e) {
      throw Error(ErrorCode::parse_error, dir + "/events.jsonl: " + e.what());
    }
    RecordedEvent event;
    if (j.at("type") == "pointer") {
      event.kind = RecordedEvent::Kind::pointer;
      event.pointer = {j.at("x").get<int>(), j.at("y").get<int>(),
                       j.at("buttons").get<uint8_t>(), j.at("at").get<int64_t>()};
    } else {
      event.kind = RecordedEvent::Kind::key;
      event.key = {j.at("keysym").get<uint32_t>(), j.at("pressed").get<bool>(),
                   j.at("at").get<int64_t>()};
    }
    recording.events.push_back(event);
  }
  std::vector<fs::path> frames;
  for (const auto& entry : fs::directory_iterator(dir))
    if (entry.path().filename().string().starts_with("keyframe_")) frames.push_back(entry.path());
  std::sort(frames.begin(), frames.end());
  for (const fs::path& p : frames) {
    std::string stem = p.stem().string(); // keyframe_NNNNNN_AT
    auto last = stem.find_last_of('_');
    Keyframe kf;
    kf.at = std::stoll(stem.substr(last + 1));
    kf.frame = read_ppm(p.string());
    recording.keyframes.push_back(std::move(kf));
  }
  return recording;
}

ReplayBundle compile_replay(const Recording& recording,
                            const std::vector<ActionSegment>& segments) {
  ReplayBundle bundle;
  bundle.profile.name = "recorded";
  int target_no = 0;
  for (const ActionSegment& seg : segments) {
    switch (seg.kind) {
      case ActionSegment::Kind::move:
        break; // movement is implicit in the following click
      case ActionSegment::Kind::click: {
        ExtractedTarget target;
        try {
          target = extract_target(recording, seg);
        } catch (const Error& e) {
          if (e.code() != ErrorCode::no_diff_found) throw;
          target = fallback_target(recording, seg);
        }
        std::string id = "target-" + std::to_string(target_no++);
        actions::ElementLocator locator;
        actions::LocatorStrategy strategy;
        strategy.type = actions::LocatorStrategy::Type::template_match;
        strategy.image = target.image;
        strategy.threshold = 0.9;
        locator.strategies.push_back(std::move(strategy));
        locator.clicks = seg.click_count;
        bundle.profile.elements.emplace(id, std::move(locator));

        actions::UnitAction action;
        action.op = actions::UnitAction::Op::click;
        action.element = id;
        action.button = seg.button;
        action.clicks = seg.click_count;
        bundle.script.push_back(action);
        break;
      }
      case ActionSegment::Kind::type: {
        actions::UnitAction action;
        action.op = actions::UnitAction::Op::type_text;
        action.text = seg.text;
        bundle.script.push_back(action);
        break;
      }
      case ActionSegment::Kind::idle: {
        actions::UnitAction action;
        action.op = actions::UnitAction::Op::wait;
        action.wait_ms = seg.t1 - seg.t0;
        bundle.script.push_back(action);
        break;
      }
    }
  }
  return bundle;
}

void save_replay(const std::string& dir, const ReplayBundle& bundle) {
  fs::create_directories(dir);
  json manifest;
  manifest["name"] = bundle.profile.name;
  json elements = json::object();
  for (const auto& [id, locator] : bundle.profile.elements) {
    json strategies = json::array();
    int image_no = 0;
    for (const auto& s : locator.strategies) {
      if (s.type != actions::LocatorStrategy::Type::template_match) continue;
      std::string file = id + "_" + std::to_string(image_no++) + ".ppm";
      write_ppm((fs::path(dir) / file).string(), s.image);
      strategies.push_back({{"type", "template"}, {"image", file}, {"threshold", s.threshold}});
    }
    elements[id] = {{"strategies", strategies}, {"clicks", locator.clicks}};
  }
  manifest["elements"] = elements;
  std::ofstream mf(fs::path(dir) / "manifest.json");
  mf << manifest.dump(2) << "\n";

  json script = json::array();
  for (const auto& action : bundle.script) {
    switch (action.op) {
      case actions::UnitAction::Op::click:
        script.push_back({{"op", "click"},
                          {"element", action.element},
                          {"clicks", action.clicks},
                          {"button", action.button == button::right
                                         ? "right"
                                         : (action.button == button::middle ? "middle"
                                                                            : "left")}});
        break;
      case actions::UnitAction::Op::type_text:
        script.push_back({{"op", "type_text"}, {"text", action.text}});
        break;
      case actions::UnitAction::Op::wait:
        script.push_back({{"op", "wait"}, {"ms", action.wait_ms}});
        break;
      default:
        break;
    }
  }
  std::ofstream sf(fs::path(dir) / "script.json");
  sf << script.dump(2) << "\n";
}

} // namespace usim::recorder
