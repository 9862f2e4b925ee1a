#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <random>
#include <thread>

#include "support/test_support.hpp"
#include "usim/actions.hpp"
#include "usim/channel.hpp"
#include "usim/error.hpp"
#include "usim/recorder.hpp"
#include "usim/simdesk.hpp"

using namespace usim;
using test_support::TempDir;

namespace {

const std::string kAssets = USIM_ASSETS_DIR;

void sleep_ms(int64_t ms) {
  std::this_thread::sleep_for(std::chrono::milliseconds(ms));
}

// Straight-line synthetic human: fast but still multi-sample.
void drive_move(recorder::RecordingTap& tap, Point from, Point to, int steps = 8,
                int64_t step_ms = 12) {
  for (int i = 1; i <= steps; ++i) {
    int x = from.x + (to.x - from.x) * i / steps;
    int y = from.y + (to.y - from.y) * i / steps;
    tap.send_pointer({x, y, 0, 0});
    sleep_ms(step_ms);
  }
}

void drive_click(recorder::RecordingTap& tap, Point at, int count = 1) {
  for (int i = 0; i < count; ++i) {
    if (i) sleep_ms(70);
    tap.send_pointer({at.x, at.y, button::left, 0});
    sleep_ms(40);
    tap.send_pointer({at.x, at.y, 0, 0});
  }
}

void drive_keys(recorder::RecordingTap& tap, const std::string& text) {
  human::HumanizerConfig cfg;
  cfg.key_latency_mu = 3.3;
  cfg.key_latency_min_ms = 20;
  cfg.key_latency_max_ms = 50;
  cfg.key_hold_min_ms = 10;
  cfg.key_hold_max_ms = 20;
  human::Rng rng(5);
  auto events = human::keystroke_schedule(text, cfg, rng);
  int64_t prev = 0;
  for (const auto& e : events) {
    sleep_ms(e.at - prev);
    prev = e.at;
    tap.send_key({e.keysym, e.pressed, 0});
  }
}

// Events-only recording for segmentation tests; no session involved.
recorder::Recording synthetic_recording() {
  recorder::Recording rec;
  auto move = [&](int x, int y, int64_t at) {
    recorder::RecordedEvent e;
    e.kind = recorder::RecordedEvent::Kind::pointer;
    e.pointer = {x, y, 0, at};
    rec.events.push_back(e);
  };
  auto press = [&](int x, int y, int64_t at) {
    recorder::RecordedEvent e;
    e.kind = recorder::RecordedEvent::Kind::pointer;
    e.pointer = {x, y, button::left, at};
    rec.events.push_back(e);
  };
  auto release = [&](int x, int y, int64_t at) { move(x, y, at); };
  auto key = [&](uint32_t sym, bool pressed, int64_t at) {
    recorder::RecordedEvent e;
    e.kind = recorder::RecordedEvent::Kind::key;
    e.key = {sym, pressed, at};
    rec.events.push_back(e);
  };

  // move A -> B over 100 ms
  for (int i = 0; i <= 5; ++i) move(10 + i * 8, 10 + i * 4, i * 20);
  // double click at B
  press(50, 30, 140);
  release(50, 30, 180);
  press(50, 30, 260);
  release(50, 30, 300);
  // type "hi"
  key('h', true, 400);
  key('h', false, 430);
  key('i', true, 480);
  key('i', false, 510);
  return rec;
}

} // namespace

TEST_CASE("segmentation of move, double click and typing") {
  auto segments = recorder::segment(synthetic_recording());
  REQUIRE(segments.size() == 3);
  CHECK(segments[0].kind == recorder::ActionSegment::Kind::move);
  CHECK(segments[1].kind == recorder::ActionSegment::Kind::click);
  CHECK(segments[1].click_count == 2);
  CHECK(segments[1].button == button::left);
  CHECK(segments[2].kind == recorder::ActionSegment::Kind::type);
  CHECK(segments[2].text == "hi");
}

TEST_CASE("a lone click segments alone") {
  recorder::Recording rec;
  recorder::RecordedEvent press;
  press.kind = recorder::RecordedEvent::Kind::pointer;
  press.pointer = {5, 5, button::left, 100};
  rec.events.push_back(press);
  recorder::RecordedEvent release;
  release.kind = recorder::RecordedEvent::Kind::pointer;
  release.pointer = {5, 5, 0, 150};
  rec.events.push_back(release);

  auto segments = recorder::segment(rec);
  REQUIRE(segments.size() == 1);
  CHECK(segments[0].kind == recorder::ActionSegment::Kind::click);
  CHECK(segments[0].click_count == 1);
}

TEST_CASE("a long pause splits typing with an idle segment") {
  recorder::Recording rec;
  auto key = [&](uint32_t sym, bool pressed, int64_t at) {
    recorder::RecordedEvent e;
    e.kind = recorder::RecordedEvent::Kind::key;
    e.key = {sym, pressed, at};
    rec.events.push_back(e);
  };
  key('a', true, 0);
  key('a', false, 40);
  key('b', true, 2040); // 2 s gap
  key('b', false, 2080);

  auto segments = recorder::segment(rec);
  REQUIRE(segments.size() == 3);
  CHECK(segments[0].kind == recorder::ActionSegment::Kind::type);
  CHECK(segments[0].text == "a");
  CHECK(segments[1].kind == recorder::ActionSegment::Kind::idle);
  CHECK(segments[2].kind == recorder::ActionSegment::Kind::type);
  CHECK(segments[2].text == "b");
}

TEST_CASE("segment spans partition the recording timeline") {
  auto rec = synthetic_recording();
  auto segments = recorder::segment(rec);
  REQUIRE_FALSE(segments.empty());
  CHECK(segments.front().t0 == rec.events.front().at());
  CHECK(segments.back().t1 == rec.events.back().at());
  for (size_t i = 1; i < segments.size(); ++i)
    CHECK(segments[i].t0 == segments[i - 1].t1);
}

TEST_CASE("an empty recording cannot be segmented") {
  CHECK_THROWS_AS(recorder::segment({}), Error);
}

TEST_CASE("recording a scripted demonstration captures keyframes and events") {
  auto scene = simdesk::load_scene(kAssets + "/scenes/office.json");
  auto server = simdesk::serve(scene, 0);
  auto session = channel::connect({"127.0.0.1", server->port()});

  auto recording = recorder::record(*session, [&](recorder::RecordingTap& tap) {
    drive_move(tap, {0, 0}, {42, 52});
    drive_click(tap, {42, 52});
  });

  CHECK(recording.keyframes.size() >= 2);
  bool saw_click = false;
  for (const auto& event : recording.events)
    if (event.kind == recorder::RecordedEvent::Kind::pointer &&
        (event.pointer.buttons & button::left))
      saw_click = true;
  CHECK(saw_click);

  // every click has a keyframe at most 50 ms older
  for (const auto& event : recording.events) {
    if (event.kind != recorder::RecordedEvent::Kind::pointer) continue;
    if (!(event.pointer.buttons & button::left)) continue;
    bool close = false;
    for (const auto& kf : recording.keyframes)
      if (kf.at <= event.pointer.at && event.pointer.at - kf.at <= 50) close = true;
    CHECK(close);
  }
}

TEST_CASE("an idle recording still keyframes on the cadence") {
  auto scene = simdesk::load_scene(kAssets + "/scenes/office.json");
  auto server = simdesk::serve(scene, 0);
  auto session = channel::connect({"127.0.0.1", server->port()});

  recorder::RecorderOptions options;
  options.keyframe_interval_ms = 100; // scaled-down cadence, same rule
  auto recording = recorder::record(
      *session, [&](recorder::RecordingTap&) { sleep_ms(550); }, nullptr, options);
  CHECK(recording.events.empty());
  CHECK(recording.keyframes.size() >= 4);
  CHECK(recording.keyframes.size() <= 8);
}

TEST_CASE("key press and release are recorded in order") {
  auto scene = simdesk::load_scene(kAssets + "/scenes/office.json");
  auto server = simdesk::serve(scene, 0);
  auto session = channel::connect({"127.0.0.1", server->port()});

  auto recording = recorder::record(*session, [&](recorder::RecordingTap& tap) {
    tap.send_key({'z', true, 0});
    sleep_ms(30);
    tap.send_key({'z', false, 0});
  });
  REQUIRE(recording.events.size() == 2);
  CHECK(recording.events[0].key.pressed);
  CHECK_FALSE(recording.events[1].key.pressed);
  CHECK(recording.events[1].key.at >= recording.events[0].key.at);
}

TEST_CASE("hover differencing recovers the clicked element and its calm look") {
  auto scene = simdesk::load_scene(kAssets + "/scenes/office.json");
  Rect icon_rect = scene.find("mail-icon")->rect;
  Frame calm = simdesk::render(scene); // cursor at origin: not hovering

  auto server = simdesk::serve(scene, 0);
  auto session = channel::connect({"127.0.0.1", server->port()});
  auto recording = recorder::record(*session, [&](recorder::RecordingTap& tap) {
    drive_move(tap, {0, 0}, {icon_rect.x + 10, icon_rect.y + 12});
    drive_click(tap, {icon_rect.x + 10, icon_rect.y + 12});
  });

  auto segments = recorder::segment(recording);
  const recorder::ActionSegment* click = nullptr;
  for (const auto& seg : segments)
    if (seg.kind == recorder::ActionSegment::Kind::click) click = &seg;
  REQUIRE(click);

  auto target = recorder::extract_target(recording, *click);
  CHECK(test_support::rect_close(target.rect, icon_rect, 2));
  // template cut from the pre-movement frame equals the base-colour render
  for (int y = 0; y < target.image.height; ++y)
    for (int x = 0; x < target.image.width; ++x)
      CHECK(target.image.at(x, y) ==
            calm.at(target.rect.x + x, target.rect.y + y));
}

TEST_CASE("clicking inert background yields no-diff-found") {
  auto scene = simdesk::load_scene(kAssets + "/scenes/office.json");
  auto server = simdesk::serve(scene, 0);
  auto session = channel::connect({"127.0.0.1", server->port()});
  auto recording = recorder::record(*session, [&](recorder::RecordingTap& tap) {
    drive_move(tap, {0, 0}, {300, 20}); // empty desktop area
    drive_click(tap, {300, 20});
  });
  auto segments = recorder::segment(recording);
  const recorder::ActionSegment* click = nullptr;
  for (const auto& seg : segments)
    if (seg.kind == recorder::ActionSegment::Kind::click) click = &seg;
  REQUIRE(click);
  try {
    recorder::extract_target(recording, *click);
    FAIL("expected no-diff-found");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::no_diff_found);
  }
  // the caller-side fallback still produces a usable crop
  auto fallback = recorder::fallback_target(recording, *click);
  CHECK(fallback.rect.w == 24);
  CHECK(fallback.rect.h == 24);
}

TEST_CASE("of two changed regions the one near the cursor wins") {
  // hand-built keyframes: near-button highlight plus a far blinking box
  Frame before(200, 120, {230, 230, 230, 255});
  Frame after = before;
  for (int y = 40; y < 60; ++y)
    for (int x = 30; x < 80; ++x) {
      before.at(x, y) = {100, 100, 100, 255};
      after.at(x, y) = {124, 124, 124, 255}; // hover highlight
    }
  for (int y = 10; y < 30; ++y)
    for (int x = 160; x < 190; ++x) after.at(x, y) = {20, 20, 20, 255}; // blinker

  recorder::Recording rec;
  rec.keyframes.push_back({0, before});
  rec.keyframes.push_back({100, after});
  recorder::RecordedEvent press;
  press.kind = recorder::RecordedEvent::Kind::pointer;
  press.pointer = {50, 50, button::left, 100};
  rec.events.push_back(press);

  auto segments = recorder::segment(rec);
  REQUIRE(segments.size() == 1);
  auto target = recorder::extract_target(rec, segments[0]);
  CHECK(target.rect == Rect{30, 40, 50, 20});
}

TEST_CASE("extraction is idempotent on identical inputs") {
  auto scene = simdesk::load_scene(kAssets + "/scenes/office.json");
  Rect icon_rect = scene.find("mail-icon")->rect;
  auto server = simdesk::serve(scene, 0);
  auto session = channel::connect({"127.0.0.1", server->port()});
  auto recording = recorder::record(*session, [&](recorder::RecordingTap& tap) {
    drive_move(tap, {0, 0}, {icon_rect.x + 8, icon_rect.y + 8});
    drive_click(tap, {icon_rect.x + 8, icon_rect.y + 8});
  });
  auto segments = recorder::segment(recording);
  const recorder::ActionSegment* click = nullptr;
  for (const auto& seg : segments)
    if (seg.kind == recorder::ActionSegment::Kind::click) click = &seg;
  REQUIRE(click);
  auto a = recorder::extract_target(recording, *click);
  auto b = recorder::extract_target(recording, *click);
  CHECK(a.rect == b.rect);
  CHECK(a.image.same_pixels(b.image));
}

TEST_CASE("annotation proposals cover scene elements and round-trip a file") {
  std::mt19937_64 rng(87);
  std::vector<test_support::GroundTruth> truth;
  simdesk::Scene scene = test_support::random_detectable_scene(rng, &truth);
  Frame frame = simdesk::render(scene);
  auto proposals = recorder::propose_annotations(frame);
  for (const auto& gt : truth) {
    bool covered = false;
    for (const auto& zone : proposals)
      if (zone.kind == gt.kind && test_support::rect_close(zone.rect, gt.visual_rect, 2))
        covered = true;
    CHECK(covered);
  }

  TempDir dir;
  std::string path = (dir.path() / "annotations.json").string();
  recorder::save_annotations(path, proposals);
  auto loaded = recorder::load_annotations(path);
  REQUIRE(loaded.size() == proposals.size());
  for (size_t i = 0; i < loaded.size(); ++i) {
    CHECK(loaded[i].rect == proposals[i].rect);
    CHECK(loaded[i].kind == proposals[i].kind);
    CHECK(loaded[i].confidence == doctest::Approx(proposals[i].confidence));
  }

  Frame blank(100, 60, {230, 230, 230, 255});
  CHECK(recorder::propose_annotations(blank).empty());
}

TEST_CASE("recordings persist as an events file plus numbered keyframes") {
  auto scene = simdesk::load_scene(kAssets + "/scenes/office.json");
  auto server = simdesk::serve(scene, 0);
  auto session = channel::connect({"127.0.0.1", server->port()});
  auto recording = recorder::record(*session, [&](recorder::RecordingTap& tap) {
    drive_move(tap, {0, 0}, {42, 52}, 4);
    drive_click(tap, {42, 52});
    tap.send_key({'q', true, 0});
    tap.send_key({'q', false, 0});
  });

  TempDir dir;
  recorder::save_recording(dir.str(), recording);
  auto loaded = recorder::load_recording(dir.str());
  REQUIRE(loaded.events.size() == recording.events.size());
  REQUIRE(loaded.keyframes.size() == recording.keyframes.size());
  for (size_t i = 0; i < loaded.events.size(); ++i)
    CHECK(loaded.events[i].at() == recording.events[i].at());
  for (size_t i = 0; i < loaded.keyframes.size(); ++i) {
    CHECK(loaded.keyframes[i].at == recording.keyframes[i].at);
    CHECK(loaded.keyframes[i].frame.same_pixels(recording.keyframes[i].frame));
  }
}

TEST_CASE("record-replay reproduces the final scene state") {
  auto scene = simdesk::load_scene(kAssets + "/scenes/office.json");
  Rect icon_rect = scene.find("mail-icon")->rect;

  // demonstration: open the mail window with a double click
  std::string final_digest;
  recorder::Recording recording;
  {
    auto server = simdesk::serve(scene, 0);
    auto session = channel::connect({"127.0.0.1", server->port()});
    recording = recorder::record(*session, [&](recorder::RecordingTap& tap) {
      drive_move(tap, {0, 0}, {icon_rect.x + 9, icon_rect.y + 11});
      drive_click(tap, {icon_rect.x + 9, icon_rect.y + 11}, 2);
      sleep_ms(300); // let the reveal land
      tap.capture_frame();
    });
    final_digest = server->scene_digest();
    server->stop();
  }

  auto segments = recorder::segment(recording);
  auto bundle = recorder::compile_replay(recording, segments);
  REQUIRE_FALSE(bundle.script.empty());

  // fresh identical scene, replayed through the action layer
  auto replay_scene = simdesk::load_scene(kAssets + "/scenes/office.json");
  auto server = simdesk::serve(replay_scene, 0);
  auto session = channel::connect({"127.0.0.1", server->port()});
  actions::Executor executor(*session, bundle.profile, 77);
  auto reports = executor.run_script(bundle.script);
  for (const auto& r : reports)
    CHECK(r.status == actions::ActionReport::Status::ok);
  sleep_ms(300);
  session->capture_frame();
  CHECK(server->scene_digest() == final_digest);
}
