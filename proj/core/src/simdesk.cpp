#include "usim/simdesk.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "usim/error.hpp"
#include "usim/font5x7.hpp"
#include "usim/keysym.hpp"

namespace usim::simdesk {

using nlohmann::json;

const char* to_string(ElementKind kind) {
  switch (kind) {
    case ElementKind::icon: return "icon";
    case ElementKind::button: return "button";
    case ElementKind::window: return "window";
    case ElementKind::text_area: return "text-area";
    case ElementKind::text_label: return "text-label";
    case ElementKind::link: return "link";
  }
  return "icon";
}

ElementKind element_kind_from_string(const std::string& name) {
  if (name == "icon") return ElementKind::icon;
  if (name == "button") return ElementKind::button;
  if (name == "window") return ElementKind::window;
  if (name == "text-area") return ElementKind::text_area;
  if (name == "text-label") return ElementKind::text_label;
  if (name == "link") return ElementKind::link;
  throw Error(ErrorCode::parse_error, "unknown element kind \"" + name + "\"");
}

Element* Scene::find(const std::string& id) {
  for (Element& e : elements)
    if (e.id == id) return &e;
  return nullptr;
}

const Element* Scene::find(const std::string& id) const {
  for (const Element& e : elements)
    if (e.id == id) return &e;
  return nullptr;
}

const Element* Scene::hit_test(Point p) const {
  const Element* hit = nullptr;
  for (const Element& e : elements)
    if (e.visible && e.rect.contains(p)) hit = &e; // later paint wins
  return hit;
}

namespace {

Rgb parse_rgb(const json& j, const std::string& what) {
  if (!j.is_array() || j.size() != 3)
    throw Error(ErrorCode::parse_error, what + " must be [r,g,b]");
  int r = j[0].get<int>(), g = j[1].get<int>(), b = j[2].get<int>();
  if (r < 0 || r > 255 || g < 0 || g > 255 || b < 0 || b > 255)
    throw Error(ErrorCode::parse_error, what + " channel out of range");
  return {static_cast<uint8_t>(r), static_cast<uint8_t>(g), static_cast<uint8_t>(b)};
}

Rect parse_rect(const json& j, const std::string& what) {
  if (!j.is_array() || j.size() != 4)
    throw Error(ErrorCode::parse_error, what + " must be [x,y,w,h]");
  return {j[0].get<int>(), j[1].get<int>(), j[2].get<int>(), j[3].get<int>()};
}

} // namespace

Scene parse_scene_text(const std::string& text, const std::string& origin) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::parse_error, origin + ": " + e.what());
  }

  Scene scene;
  try {
    scene.width = doc.at("width").get<int>();
    scene.height = doc.at("height").get<int>();
    scene.background = parse_rgb(doc.at("background"), "background");
    scene.name = doc.value("name", std::string("simdesk"));
    scene.rng_seed = doc.value("rng_seed", 0ULL);
    for (const json& je : doc.value("elements", json::array())) {
      Element e;
      e.id = je.at("id").get<std::string>();
      e.kind = element_kind_from_string(je.at("kind").get<std::string>());
      e.rect = parse_rect(je.at("rect"), "rect of " + e.id);
      e.label = je.value("label", std::string());
      e.visible = je.value("visible", true);
      e.text = je.value("text", std::string());
      if (je.contains("style")) {
        const json& js = je["style"];
        if (js.contains("fill")) e.style.fill = parse_rgb(js["fill"], "fill of " + e.id);
        if (js.contains("text")) e.style.text = parse_rgb(js["text"], "text of " + e.id);
        e.style.highlight_delta = js.value("highlight_delta", 24);
        e.style.link = js.value("link", false);
      }
      if (e.kind == ElementKind::link) e.style.link = true;
      if (je.contains("behaviour") && !je["behaviour"].is_null()) {
        const json& jb = je["behaviour"];
        std::string trigger = jb.value("trigger", std::string("none"));
        if (trigger == "click") {
          e.behaviour.trigger = Behaviour::Trigger::click;
        } else if (trigger == "double-click") {
          e.behaviour.trigger = Behaviour::Trigger::double_click;
        } else if (trigger != "none") {
          throw Error(ErrorCode::parse_error,
                      "unknown trigger \"" + trigger + "\" on " + e.id);
        }
        e.behaviour.reveals = jb.value("reveals", std::vector<std::string>{});
        e.behaviour.hides = jb.value("hides", std::vector<std::string>{});
        e.behaviour.focuses = jb.value("focuses", std::string());
        e.behaviour.latency_ms = jb.value("latency_ms", 0);
      }
      scene.elements.push_back(std::move(e));
    }
  } catch (const json::exception& e) {
    throw Error(ErrorCode::parse_error, origin + ": " + e.what());
  }

  if (scene.width <= 0 || scene.height <= 0)
    throw Error(ErrorCode::parse_error, origin + ": non-positive scene size");
  Rect bounds{0, 0, scene.width, scene.height};
  for (size_t i = 0; i < scene.elements.size(); ++i) {
    const Element& e = scene.elements[i];
    if (e.rect.empty() || !bounds.contains(e.rect))
      throw Error(ErrorCode::parse_error,
                  origin + ": element " + e.id + " outside scene bounds");
    for (size_t j = i + 1; j < scene.elements.size(); ++j)
      if (scene.elements[j].id == e.id)
        throw Error(ErrorCode::parse_error, origin + ": duplicate id " + e.id);
    auto check_ref = [&](const std::string& id) {
      if (!id.empty() && !scene.find(id))
        throw Error(ErrorCode::parse_error,
                    origin + ": behaviour of " + e.id + " references unknown id " + id);
    };
    for (const auto& id : e.behaviour.reveals) check_ref(id);
    for (const auto& id : e.behaviour.hides) check_ref(id);
    check_ref(e.behaviour.focuses);
  }
  return scene;
}

Scene load_scene(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::io_error, "cannot read scene file " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_scene_text(buf.str(), path);
}

namespace {

uint8_t lighten(uint8_t v, int delta) {
  int out = v + delta;
  return static_cast<uint8_t>(std::clamp(out, 0, 255));
}

uint8_t darken(uint8_t v, int delta) {
  int out = v - delta;
  return static_cast<uint8_t>(std::clamp(out, 0, 255));
}

void fill_rect(Frame& frame, const Rect& rect, Rgb colour) {
  for (int y = rect.y; y < rect.bottom(); ++y)
    for (int x = rect.x; x < rect.right(); ++x)
      frame.at(x, y) = {colour.r, colour.g, colour.b, 255};
}

void outline_rect(Frame& frame, const Rect& rect, Rgb colour) {
  for (int x = rect.x; x < rect.right(); ++x) {
    frame.at(x, rect.y) = {colour.r, colour.g, colour.b, 255};
    frame.at(x, rect.bottom() - 1) = {colour.r, colour.g, colour.b, 255};
  }
  for (int y = rect.y; y < rect.bottom(); ++y) {
    frame.at(rect.x, y) = {colour.r, colour.g, colour.b, 255};
    frame.at(rect.right() - 1, y) = {colour.r, colour.g, colour.b, 255};
  }
}

void draw_text(Frame& frame, int x, int y, const std::string& text, Rgb colour,
               const Rect& clip) {
  int pen_x = x;
  for (char c : text) {
    const font5x7::Glyph* glyph = font5x7::find(c);
    if (glyph) {
      for (int row = 0; row < font5x7::cell_height; ++row) {
        for (int col = 0; col < font5x7::cell_width; ++col) {
          if (glyph->rows[row][col] != '#') continue;
          int px = pen_x + col, py = y + row;
          if (clip.contains(px, py) && frame.in_bounds(px, py))
            frame.at(px, py) = {colour.r, colour.g, colour.b, 255};
        }
      }
    }
    pen_x += font5x7::advance;
  }
}

int text_width(const std::string& text) {
  if (text.empty()) return 0;
  return static_cast<int>(text.size()) * font5x7::advance - 1;
}

} // namespace

Frame render(const Scene& scene) {
  Frame frame(scene.width, scene.height,
              {scene.background.r, scene.background.g, scene.background.b, 255});
  const Element* hovered = scene.hit_test(scene.cursor);

  for (const Element& e : scene.elements) {
    if (!e.visible) continue;
    bool hover = hovered == &e;
    Rgb fill = e.style.fill;
    if (hover) {
      fill = {lighten(fill.r, e.style.highlight_delta),
              lighten(fill.g, e.style.highlight_delta),
              lighten(fill.b, e.style.highlight_delta)};
    }
    switch (e.kind) {
      case ElementKind::icon:
        fill_rect(frame, e.rect, fill);
        if (!e.label.empty()) {
          int lx = e.rect.x + (e.rect.w - text_width(e.label)) / 2;
          draw_text(frame, lx, e.rect.bottom() + 2, e.label, e.style.text,
                    {0, 0, scene.width, scene.height});
        }
        break;
      case ElementKind::button: {
        fill_rect(frame, e.rect, fill);
        int lx = e.rect.x + (e.rect.w - text_width(e.label)) / 2;
        int ly = e.rect.y + (e.rect.h - font5x7::cell_height) / 2;
        draw_text(frame, lx, ly, e.label, e.style.text, e.rect);
        break;
      }
      case ElementKind::window: {
        fill_rect(frame, e.rect, fill);
        Rgb border{darken(e.style.fill.r, 90), darken(e.style.fill.g, 90),
                   darken(e.style.fill.b, 90)};
        outline_rect(frame, e.rect, border);
        draw_text(frame, e.rect.x + 3, e.rect.y + 2, e.label, e.style.text, e.rect);
        break;
      }
      case ElementKind::text_area: {
        fill_rect(frame, e.rect, fill);
        Rgb border = scene.focus == e.id
                         ? e.style.text
                         : Rgb{darken(e.style.fill.r, 60), darken(e.style.fill.g, 60),
                               darken(e.style.fill.b, 60)};
        outline_rect(frame, e.rect, border);
        // single-line tail of the content, 2 px padding
        std::string line = e.text;
        if (auto nl = line.find_last_of('\n'); nl != std::string::npos)
          line = line.substr(nl + 1);
        int fit = std::max(0, (e.rect.w - 4) / font5x7::advance);
        if (static_cast<int>(line.size()) > fit)
          line = line.substr(line.size() - static_cast<size_t>(fit));
        int ly = e.rect.y + (e.rect.h - font5x7::cell_height) / 2;
        draw_text(frame, e.rect.x + 2, ly, line, e.style.text, e.rect);
        break;
      }
      case ElementKind::text_label:
      case ElementKind::link:
        draw_text(frame, e.rect.x, e.rect.y, e.label, e.style.text, e.rect);
        break;
    }
  }
  return frame;
}

namespace {

void apply_transition(Scene& scene, const Scene::PendingTransition& t) {
  for (const std::string& id : t.behaviour.reveals) {
    if (Element* e = scene.find(id)) e->visible = true;
  }
  for (const std::string& id : t.behaviour.hides) {
    if (Element* e = scene.find(id)) e->visible = false;
  }
  if (!t.behaviour.focuses.empty()) scene.focus = t.behaviour.focuses;
  LogEntry entry;
  entry.kind = LogEntry::Kind::transition;
  entry.at = t.due;
  entry.note = "activate " + t.source;
  scene.event_log.push_back(entry);
}

void schedule_behaviour(Scene& scene, const Element& e, int64_t at) {
  if (e.behaviour.reveals.empty() && e.behaviour.hides.empty() &&
      e.behaviour.focuses.empty())
    return;
  scene.pending.push_back({at + e.behaviour.latency_ms, e.behaviour, e.id});
}

} // namespace

void advance_to(Scene& scene, int64_t t) {
  std::stable_sort(scene.pending.begin(), scene.pending.end(),
                   [](const auto& a, const auto& b) { return a.due < b.due; });
  while (!scene.pending.empty() && scene.pending.front().due <= t) {
    Scene::PendingTransition next = scene.pending.front();
    scene.pending.erase(scene.pending.begin());
    apply_transition(scene, next);
  }
}

void scene_step(Scene& scene, const PointerEvent& event) {
  advance_to(scene, event.at);

  LogEntry entry;
  entry.kind = LogEntry::Kind::pointer;
  entry.at = event.at;
  entry.pointer = event;
  scene.event_log.push_back(entry);

  scene.cursor = {event.x, event.y};
  uint8_t newly_pressed = event.buttons & static_cast<uint8_t>(~scene.button_state);
  scene.button_state = event.buttons;
  if (!(newly_pressed & button::left)) return;

  const Element* target = scene.hit_test(scene.cursor);
  std::string target_id = target ? target->id : std::string();

  bool is_double = event.at - scene.last_press_at <= double_click_ms &&
                   std::abs(event.x - scene.last_press_pos.x) <= double_click_slop_px &&
                   std::abs(event.y - scene.last_press_pos.y) <= double_click_slop_px &&
                   target_id == scene.last_press_target && !target_id.empty();

  if (is_double) {
    // consume the pair so a third press starts fresh
    scene.last_press_at = std::numeric_limits<int64_t>::min();
    scene.last_press_target.clear();
    if (target->behaviour.trigger == Behaviour::Trigger::double_click)
      schedule_behaviour(scene, *target, event.at);
  } else {
    scene.last_press_at = event.at;
    scene.last_press_pos = {event.x, event.y};
    scene.last_press_target = target_id;
  }

  if (target) {
    if (target->kind == ElementKind::text_area && scene.focus != target->id) {
      scene.focus = target->id;
      LogEntry focus_entry;
      focus_entry.kind = LogEntry::Kind::transition;
      focus_entry.at = event.at;
      focus_entry.note = "focus " + target->id;
      scene.event_log.push_back(focus_entry);
    }
    if (target->behaviour.trigger == Behaviour::Trigger::click)
      schedule_behaviour(scene, *target, event.at);
  }
}

void scene_step(Scene& scene, const KeyEvent& event) {
  advance_to(scene, event.at);

  LogEntry entry;
  entry.kind = LogEntry::Kind::key;
  entry.at = event.at;
  entry.key = event;
  scene.event_log.push_back(entry);

  if (event.keysym == keysym::shift_left || event.keysym == 0xFFE2) {
    scene.shift_held = event.pressed;
    return;
  }
  if (!event.pressed || scene.focus.empty()) return;
  Element* focused = scene.find(scene.focus);
  if (!focused || !focused->visible || focused->kind != ElementKind::text_area)
    return;
  if (event.keysym == keysym::backspace) {
    if (!focused->text.empty()) focused->text.pop_back();
    return;
  }
  if (auto c = char_for_keysym(event.keysym, scene.shift_held)) focused->text.push_back(*c);
}

std::string state_digest(const Scene& scene) {
  std::ostringstream out;
  out << "focus=" << scene.focus << ";";
  const Element* hovered = scene.hit_test(scene.cursor);
  out << "hover=" << (hovered ? hovered->id : "") << ";";
  for (const Element& e : scene.elements)
    out << e.id << ":" << (e.visible ? 1 : 0) << ":" << e.text << ";";
  return out.str();
}

} // namespace usim::simdesk
