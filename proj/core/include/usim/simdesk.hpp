#pragma once

#include <cstdint>
#include <limits>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "usim/frame.hpp"
#include "usim/geometry.hpp"

namespace usim::simdesk {

enum class ElementKind { icon, button, window, text_area, text_label, link };

const char* to_string(ElementKind kind);
ElementKind element_kind_from_string(const std::string& name);

struct Style {
  Rgb fill{200, 200, 200};
  Rgb text{20, 20, 20};
  int highlight_delta = 24;
  bool link = false; // marks link-coloured text for profiles/tests
};

// Optional timed transition an element runs when activated: icons on
// double click, buttons on single click.
struct Behaviour {
  enum class Trigger { none, click, double_click };
  Trigger trigger = Trigger::none;
  std::vector<std::string> reveals;
  std::vector<std::string> hides;
  std::string focuses;
  int latency_ms = 0;
};

struct Element {
  std::string id;
  ElementKind kind = ElementKind::icon;
  Rect rect;
  std::string label;
  Style style;
  Behaviour behaviour;
  bool visible = true;
  std::string text; // text-area content
};

struct LogEntry {
  enum class Kind { pointer, key, transition };
  Kind kind = Kind::transition;
  int64_t at = 0;
  PointerEvent pointer;
  KeyEvent key;
  std::string note;
};

// Double-click window: common desktop default, and safely above the
// humanizer's multi-click gap.
constexpr int64_t double_click_ms = 400;
constexpr int double_click_slop_px = 3;

struct Scene {
  int width = 0;
  int height = 0;
  Rgb background;
  std::string name = "simdesk";
  std::vector<Element> elements; // paint order
  std::string focus;
  Point cursor{0, 0};
  uint64_t rng_seed = 0;
  std::vector<LogEntry> event_log;

  // input-state tracking
  uint8_t button_state = 0;
  bool shift_held = false;
  int64_t last_press_at = std::numeric_limits<int64_t>::min();
  Point last_press_pos{-1000, -1000};
  std::string last_press_target;

  struct PendingTransition {
    int64_t due = 0;
    Behaviour behaviour; // reveals/hides/focuses payload
    std::string source;
  };
  std::vector<PendingTransition> pending;

  Element* find(const std::string& id);
  const Element* find(const std::string& id) const;

  // Topmost visible element under the point, painter's order.
  const Element* hit_test(Point p) const;
};

// Scene files are JSON documents; see load_scene for the field set.
Scene load_scene(const std::string& path);
Scene parse_scene_text(const std::string& text, const std::string& origin);

// Pure render of the current state: background, elements in order,
// labels in the built-in 5x7 face, hovered fill lightened by the
// element's highlight delta. No cursor sprite.
Frame render(const Scene& scene);

// Applies due timed transitions up to and including `t`.
void advance_to(Scene& scene, int64_t t);

// Deterministic transition function; appends to event_log.
void scene_step(Scene& scene, const PointerEvent& event);
void scene_step(Scene& scene, const KeyEvent& event);

// Canonical state string: focus, hovered element, and per-element
// visibility and text. Two scenes with equal digests render equal
// frames.
std::string state_digest(const Scene& scene);

struct ServerStats {
  std::map<int, int> message_histogram; // client message type -> count
  int connections = 0;
};

// One-client RFB server over the scene. Messages are processed
// sequentially in arrival order; a second client may connect after the
// first disconnects.
class Server {
 public:
  virtual ~Server() = default;

  virtual int port() const = 0;
  virtual void stop() = 0;

  virtual std::vector<LogEntry> event_log() const = 0;
  virtual ServerStats stats() const = 0;
  virtual Scene scene_snapshot() const = 0;
  virtual std::string scene_digest() const = 0;
};

// Throws Error{port_in_use}. port 0 binds an ephemeral port.
std::unique_ptr<Server> serve(Scene scene, int port);

} // namespace usim::simdesk
