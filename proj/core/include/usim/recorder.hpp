#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "usim/actions.hpp"
#include "usim/channel.hpp"
#include "usim/clock.hpp"
#include "usim/frame.hpp"
#include "usim/vision.hpp"

namespace usim::recorder {

struct RecordedEvent {
  enum class Kind { pointer, key };
  Kind kind = Kind::pointer;
  PointerEvent pointer;
  KeyEvent key;

  int64_t at() const { return kind == Kind::pointer ? pointer.at : key.at; }
};

struct Keyframe {
  int64_t at = 0;
  Frame frame;
};

struct Recording {
  std::vector<RecordedEvent> events;    // time-ordered
  std::vector<Keyframe> keyframes;      // movement starts, clicks, cadence
};

struct RecorderOptions {
  int64_t keyframe_interval_ms = 1000; // cadence captures
  int64_t movement_gap_ms = 300;       // pause that makes the next move a new movement
};

// Wraps a session while a human (or scripted stand-in) drives it: events
// pass through to the machine, and frames are captured at movement
// starts, right before clicks, and on a steady cadence.
class RecordingTap {
 public:
  explicit RecordingTap(channel::Session& session, Clock* clock = nullptr,
                        RecorderOptions options = {});
  ~RecordingTap();

  void send_pointer(const PointerEvent& event);
  void send_key(const KeyEvent& event);
  Frame capture_frame();

  // Stops the cadence thread and hands over the recording.
  Recording finish();

 private:
  void capture_keyframe_locked();

  channel::Session& session_;
  WallClock wall_clock_;
  Clock* clock_;
  RecorderOptions options_;

  std::mutex mu_;
  Recording recording_;
  bool in_motion_ = false;
  int64_t last_move_at_ = 0;
  uint8_t button_state_ = 0;

  std::thread cadence_;
  bool stopping_ = false;
};

// Runs the driver against a tap and returns the recording; the driver
// returning is the stop condition.
Recording record(channel::Session& session,
                 const std::function<void(RecordingTap&)>& driver,
                 Clock* clock = nullptr, RecorderOptions options = {});

struct ActionSegment {
  enum class Kind { move, click, type, idle };
  Kind kind = Kind::move;
  int64_t t0 = 0;
  int64_t t1 = 0;

  // click
  int click_count = 0;
  uint8_t button = 0;
  Point click_pos;
  int64_t first_press_at = 0;

  // type
  std::string text;
};

// Aggregates raw events into move / click(n) / type / idle segments.
// Segment spans partition [first event, last event]. Throws
// Error{empty_recording}.
std::vector<ActionSegment> segment(const Recording& recording, int64_t gap_ms = 800);

struct ExtractedTarget {
  Frame image; // un-highlighted appearance, cut from the pre-movement frame
  Rect rect;
};

// Hover-highlight differencing between the click keyframe and the
// keyframe at the start of the preceding movement. Throws
// Error{no_diff_found} when no changed component lies within 100 px of
// the click.
ExtractedTarget extract_target(const Recording& recording,
                               const ActionSegment& click_segment);

// Fallback when extraction finds no diff: fixed crop centred on the
// click, from the same pre-movement frame.
ExtractedTarget fallback_target(const Recording& recording,
                                const ActionSegment& click_segment, int size = 24);

// Zone proposals for dataset labelling; kinds are candidate labels for
// a human to confirm.
std::vector<vision::ZoneOfInterest> propose_annotations(const Frame& frame);

void save_annotations(const std::string& path,
                      const std::vector<vision::ZoneOfInterest>& zones);
std::vector<vision::ZoneOfInterest> load_annotations(const std::string& path);

// A recording on disk: events.jsonl plus numbered PPM keyframes.
void save_recording(const std::string& dir, const Recording& recording);
Recording load_recording(const std::string& dir);

// Replayable form: unit actions plus an in-memory profile whose click
// targets are the extracted templates.
struct ReplayBundle {
  std::vector<actions::UnitAction> script;
  actions::EnvironmentProfile profile;
};

ReplayBundle compile_replay(const Recording& recording,
                            const std::vector<ActionSegment>& segments);

void save_replay(const std::string& dir, const ReplayBundle& bundle);

} // namespace usim::recorder
