#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <fstream>
#include <random>

#include "support/test_support.hpp"
#include "usim/actions.hpp"
#include "usim/channel.hpp"
#include "usim/error.hpp"
#include "usim/image_io.hpp"
#include "usim/rfb_wire.hpp"
#include "usim/simdesk.hpp"

using namespace usim;
using test_support::TempDir;

namespace {

const std::string kAssets = USIM_ASSETS_DIR;

// Short gestures keep the suite quick without losing the humanized shape.
void make_fast(human::HumanizerConfig& cfg) {
  cfg.tick_ms = 5;
  cfg.duration_base_ms = 25;
  cfg.duration_gain = 3.0;
  cfg.key_latency_mu = 3.4; // ~30 ms median
  cfg.key_latency_min_ms = 30;
  cfg.key_latency_max_ms = 60;
  cfg.key_hold_min_ms = 10;
  cfg.key_hold_max_ms = 20;
  cfg.sentence_pause_min_ms = 20;
  cfg.sentence_pause_max_ms = 40;
  cfg.click_gap_min_ms = 40;
  cfg.click_gap_max_ms = 80;
}

actions::EnvironmentProfile office_profile() {
  auto profile = actions::load_profile(kAssets + "/profiles/simdesk_office");
  make_fast(profile.humanizer);
  return profile;
}

void write_manifest(const TempDir& dir, const std::string& body) {
  std::ofstream out(dir.path() / "manifest.json");
  out << body;
}

} // namespace

TEST_CASE("the reference profile loads with its element set") {
  auto profile = actions::load_profile(kAssets + "/profiles/simdesk_office");
  CHECK(profile.elements.size() >= 5);
  CHECK(profile.has("mail-client"));
  CHECK(profile.has("compose"));
  CHECK(profile.has("send-button"));
  CHECK(profile.elements.at("mail-client").clicks == 2);
}

TEST_CASE("a missing manifest is missing-manifest") {
  TempDir dir;
  try {
    actions::load_profile(dir.str());
    FAIL("expected missing-manifest");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::missing_manifest);
  }
}

TEST_CASE("a manifest referencing an absent image names the path") {
  TempDir dir;
  write_manifest(dir, R"({"name": "x", "elements": {
    "a": {"strategies": [{"type": "template", "image": "ghost.ppm"}]}}})");
  try {
    actions::load_profile(dir.str());
    FAIL("expected missing-image");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::missing_image);
    CHECK(std::string(e.what()).find("ghost.ppm") != std::string::npos);
  }
}

TEST_CASE("dangling verify_appears is rejected") {
  TempDir dir;
  write_manifest(dir, R"({"name": "x", "elements": {
    "a": {"strategies": [{"type": "rect", "rect": [0,0,4,4]}],
          "verify_appears": "nonexistent"}}})");
  try {
    actions::load_profile(dir.str());
    FAIL("expected dangling-element-id");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::dangling_element_id);
  }
}

TEST_CASE("multiple strategies are retained in manifest order") {
  TempDir dir;
  Frame img(8, 8, {50, 60, 70, 255});
  write_ppm((dir.path() / "t.ppm").string(), img);
  write_manifest(dir, R"({"name": "x", "elements": {
    "a": {"strategies": [
      {"type": "template", "image": "t.ppm", "threshold": 0.9},
      {"type": "rect", "rect": [1, 2, 3, 4]}]}}})");
  auto profile = actions::load_profile(dir.str());
  const auto& strategies = profile.elements.at("a").strategies;
  REQUIRE(strategies.size() == 2);
  CHECK(strategies[0].type == actions::LocatorStrategy::Type::template_match);
  CHECK(strategies[0].threshold == doctest::Approx(0.9));
  CHECK(strategies[1].type == actions::LocatorStrategy::Type::abs_rect);
  CHECK(strategies[1].rect == Rect{1, 2, 3, 4});
}

TEST_CASE("resolve via template hits the icon within two pixels") {
  std::mt19937_64 rng(31);
  std::vector<test_support::GroundTruth> truth;
  simdesk::Scene scene = test_support::random_detectable_scene(rng, &truth);
  REQUIRE_FALSE(truth.empty());
  Frame frame = simdesk::render(scene);

  // template = exact crop of the first element
  const auto& gt = truth.front();
  Frame tmpl(gt.visual_rect.w, gt.visual_rect.h);
  for (int y = 0; y < tmpl.height; ++y)
    for (int x = 0; x < tmpl.width; ++x)
      tmpl.at(x, y) = frame.at(gt.visual_rect.x + x, gt.visual_rect.y + y);

  actions::EnvironmentProfile profile;
  actions::ElementLocator locator;
  actions::LocatorStrategy strategy;
  strategy.type = actions::LocatorStrategy::Type::template_match;
  strategy.image = tmpl;
  strategy.threshold = 0.9;
  locator.strategies.push_back(strategy);
  profile.elements.emplace("target", locator);

  Rect got = actions::resolve_element(frame, profile, "target");
  CHECK(test_support::rect_close(got, gt.visual_rect, 2));
}

TEST_CASE("an absent element exhausts all strategies") {
  Frame frame(60, 40, {200, 200, 200, 255});
  actions::EnvironmentProfile profile;
  actions::ElementLocator locator;
  actions::LocatorStrategy strategy;
  strategy.type = actions::LocatorStrategy::Type::zone;
  strategy.kind = vision::ZoneKind::button;
  strategy.label = "Nope";
  locator.strategies.push_back(strategy);
  profile.elements.emplace("ghost", locator);
  try {
    actions::resolve_element(frame, profile, "ghost");
    FAIL("expected element-not-found");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::element_not_found);
  }
}

TEST_CASE("two identical icons resolve to the top-left one") {
  simdesk::Scene scene;
  scene.width = 120;
  scene.height = 80;
  scene.background = {228, 230, 233};
  for (int i = 0; i < 2; ++i) {
    simdesk::Element icon;
    icon.id = "i" + std::to_string(i);
    icon.kind = simdesk::ElementKind::icon;
    icon.rect = {20 + i * 60, 20 + i * 30, 16, 16};
    icon.style.fill = {70, 80, 120};
    scene.elements.push_back(icon);
  }
  Frame frame = simdesk::render(scene);
  Frame tmpl(16, 16);
  for (int y = 0; y < 16; ++y)
    for (int x = 0; x < 16; ++x) tmpl.at(x, y) = frame.at(20 + x, 20 + y);

  actions::EnvironmentProfile profile;
  actions::ElementLocator locator;
  actions::LocatorStrategy strategy;
  strategy.type = actions::LocatorStrategy::Type::template_match;
  strategy.image = tmpl;
  strategy.threshold = 0.95;
  locator.strategies.push_back(strategy);
  profile.elements.emplace("icon", locator);

  Rect got = actions::resolve_element(frame, profile, "icon");
  CHECK(got.x == 20);
  CHECK(got.y == 20);
}

TEST_CASE("open_app on the office scene lands clicks inside the icon and opens mail") {
  auto scene = simdesk::load_scene(kAssets + "/scenes/office.json");
  Rect icon_rect = scene.find("mail-icon")->rect;
  auto server = simdesk::serve(scene, 0);
  auto session = channel::connect({"127.0.0.1", server->port()});
  auto profile = office_profile();
  actions::Executor executor(*session, profile, 7);

  actions::UnitAction open;
  open.op = actions::UnitAction::Op::open_app;
  open.element = "mail-client";
  auto report = executor.execute(open);
  CHECK(report.status == actions::ActionReport::Status::ok);
  CHECK(report.retries <= 1);

  // compose button is on screen now
  Frame frame = session->capture_frame();
  CHECK_NOTHROW(actions::resolve_element(frame, profile, "compose"));

  // every press the server saw landed inside the icon rect
  int presses = 0;
  for (const auto& entry : server->event_log()) {
    if (entry.kind != simdesk::LogEntry::Kind::pointer) continue;
    if (entry.pointer.buttons & button::left) {
      presses++;
      CHECK(icon_rect.contains(entry.pointer.x, entry.pointer.y));
    }
  }
  CHECK(presses >= 2);
}

TEST_CASE("a late window still verifies within one retry") {
  simdesk::Scene scene;
  scene.width = 200;
  scene.height = 120;
  scene.background = {228, 230, 233};
  simdesk::Element btn;
  btn.id = "open";
  btn.kind = simdesk::ElementKind::button;
  btn.rect = {30, 30, 60, 18};
  btn.label = "Open";
  btn.style.fill = {58, 108, 78};
  btn.style.text = {236, 240, 238};
  btn.behaviour.trigger = simdesk::Behaviour::Trigger::click;
  btn.behaviour.reveals = {"late"};
  btn.behaviour.latency_ms = 300;
  scene.elements.push_back(btn);
  simdesk::Element late;
  late.id = "late";
  late.kind = simdesk::ElementKind::button;
  late.rect = {110, 70, 54, 18};
  late.label = "Late";
  late.style.fill = {70, 100, 170};
  late.style.text = {238, 242, 248};
  late.visible = false;
  scene.elements.push_back(late);

  auto server = simdesk::serve(scene, 0);
  auto session = channel::connect({"127.0.0.1", server->port()});

  actions::EnvironmentProfile profile;
  make_fast(profile.humanizer);
  actions::ElementLocator open_locator;
  actions::LocatorStrategy s1;
  s1.type = actions::LocatorStrategy::Type::zone;
  s1.kind = vision::ZoneKind::button;
  s1.label = "Open";
  open_locator.strategies.push_back(s1);
  open_locator.verify_appears = "late";
  profile.elements.emplace("open", open_locator);
  actions::ElementLocator late_locator;
  actions::LocatorStrategy s2;
  s2.type = actions::LocatorStrategy::Type::zone;
  s2.kind = vision::ZoneKind::button;
  s2.label = "Late";
  late_locator.strategies.push_back(s2);
  profile.elements.emplace("late", late_locator);

  actions::Executor executor(*session, profile, 11);
  actions::UnitAction click;
  click.op = actions::UnitAction::Op::click;
  click.element = "open";
  auto report = executor.execute(click);
  CHECK(report.status == actions::ActionReport::Status::ok);
  CHECK(report.retries == 1);
}

TEST_CASE("wait keeps the pointer wiggling and takes at least the asked time") {
  auto scene = simdesk::load_scene(kAssets + "/scenes/office.json");
  auto server = simdesk::serve(scene, 0);
  auto session = channel::connect({"127.0.0.1", server->port()});
  auto profile = office_profile();
  actions::Executor executor(*session, profile, 3);

  // park the cursor somewhere known first
  actions::UnitAction click;
  click.op = actions::UnitAction::Op::click;
  click.element = "mail-client";
  click.clicks = 1;
  executor.execute(click);
  size_t events_before = server->event_log().size();

  actions::UnitAction wait;
  wait.op = actions::UnitAction::Op::wait;
  wait.wait_ms = 500;
  auto report = executor.execute(wait);
  CHECK(report.status == actions::ActionReport::Status::ok);
  CHECK(report.wall_ms >= 500);
  session->capture_frame(); // barrier
  CHECK(server->event_log().size() > events_before); // idle jitter flowed
}

TEST_CASE("run_script drives open, type, wait and stops cleanly") {
  auto scene = simdesk::load_scene(kAssets + "/scenes/office.json");
  auto server = simdesk::serve(scene, 0);
  auto session = channel::connect({"127.0.0.1", server->port()});
  auto profile = office_profile();
  actions::Executor executor(*session, profile, 21);

  std::vector<actions::UnitAction> script;
  actions::UnitAction open;
  open.op = actions::UnitAction::Op::open_app;
  open.element = "mail-client";
  script.push_back(open);
  actions::UnitAction click;
  click.op = actions::UnitAction::Op::click;
  click.element = "compose";
  script.push_back(click);
  actions::UnitAction focus;
  focus.op = actions::UnitAction::Op::click;
  focus.element = "to-field";
  script.push_back(focus);
  actions::UnitAction type;
  type.op = actions::UnitAction::Op::type_text;
  type.text = "hi";
  script.push_back(type);
  actions::UnitAction wait;
  wait.op = actions::UnitAction::Op::wait;
  wait.wait_ms = 100;
  script.push_back(wait);

  auto reports = executor.run_script(script);
  REQUIRE(reports.size() == script.size());
  for (const auto& r : reports) CHECK(r.status == actions::ActionReport::Status::ok);
  CHECK(server->scene_snapshot().find("to-field")->text == "hi");
}

TEST_CASE("an empty script is rejected") {
  auto scene = simdesk::load_scene(kAssets + "/scenes/office.json");
  auto server = simdesk::serve(scene, 0);
  auto session = channel::connect({"127.0.0.1", server->port()});
  auto profile = office_profile();
  actions::Executor executor(*session, profile, 1);
  CHECK_THROWS_AS(executor.run_script({}), Error);
}

TEST_CASE("a failure mid-script stops the remainder") {
  auto scene = simdesk::load_scene(kAssets + "/scenes/office.json");
  auto server = simdesk::serve(scene, 0);
  auto session = channel::connect({"127.0.0.1", server->port()});
  auto profile = office_profile();
  actions::Executor executor(*session, profile, 5);

  std::vector<actions::UnitAction> script;
  actions::UnitAction open;
  open.op = actions::UnitAction::Op::open_app;
  open.element = "mail-client";
  script.push_back(open);
  actions::UnitAction bad;
  bad.op = actions::UnitAction::Op::click;
  bad.element = "sent-note"; // not on screen yet: all strategies fail
  script.push_back(bad);
  actions::UnitAction never;
  never.op = actions::UnitAction::Op::type_text;
  never.text = "never typed";
  script.push_back(never);

  actions::ExecBudget budget;
  budget.retries = 1;
  budget.recheck_ms = 50;
  auto reports = executor.run_script(script, budget);
  REQUIRE(reports.size() == 2);
  CHECK(reports[0].status == actions::ActionReport::Status::ok);
  CHECK(reports[1].status == actions::ActionReport::Status::failed);
}

TEST_CASE("retry budget bounds attempts on an element that never appears") {
  auto scene = simdesk::load_scene(kAssets + "/scenes/office.json");
  auto server = simdesk::serve(scene, 0);
  auto session = channel::connect({"127.0.0.1", server->port()});
  auto profile = office_profile();
  actions::Executor executor(*session, profile, 9);

  actions::UnitAction bad;
  bad.op = actions::UnitAction::Op::click;
  bad.element = "sent-note";
  actions::ExecBudget budget;
  budget.retries = 3;
  budget.recheck_ms = 30;
  auto report = executor.execute(bad, budget);
  CHECK(report.status == actions::ActionReport::Status::failed);
  CHECK(report.retries == budget.retries);
  // one capture per attempt, none after exhaustion
  CHECK(report.frames_examined == budget.retries + 1);
}

TEST_CASE("presses land inside resolved rects across randomized scenes") {
  std::mt19937_64 rng(404);
  for (int round = 0; round < 12; ++round) {
    std::vector<test_support::GroundTruth> truth;
    simdesk::Scene scene = test_support::random_detectable_scene(rng, &truth);
    if (truth.empty()) continue;
    Frame rendered = simdesk::render(scene);

    // pick the first icon or button as the target
    const test_support::GroundTruth* target = nullptr;
    for (const auto& gt : truth)
      if (gt.kind != vision::ZoneKind::text_line) {
        target = &gt;
        break;
      }
    if (!target) continue;

    Frame tmpl(target->visual_rect.w, target->visual_rect.h);
    for (int y = 0; y < tmpl.height; ++y)
      for (int x = 0; x < tmpl.width; ++x)
        tmpl.at(x, y) = rendered.at(target->visual_rect.x + x, target->visual_rect.y + y);

    auto server = simdesk::serve(scene, 0);
    auto session = channel::connect({"127.0.0.1", server->port()});
    actions::EnvironmentProfile profile;
    make_fast(profile.humanizer);
    actions::ElementLocator locator;
    actions::LocatorStrategy strategy;
    strategy.type = actions::LocatorStrategy::Type::template_match;
    strategy.image = tmpl;
    strategy.threshold = 0.9;
    locator.strategies.push_back(strategy);
    profile.elements.emplace("target", locator);

    actions::Executor executor(*session, profile, 1000 + round);
    actions::UnitAction click;
    click.op = actions::UnitAction::Op::click;
    click.element = "target";
    auto report = executor.execute(click);
    REQUIRE(report.status == actions::ActionReport::Status::ok);

    for (const auto& entry : server->event_log()) {
      if (entry.kind != simdesk::LogEntry::Kind::pointer) continue;
      if (entry.pointer.buttons & button::left)
        CHECK(target->visual_rect.contains(entry.pointer.x, entry.pointer.y));
    }
  }
}

TEST_CASE("the instrumented side sees only input and update-request messages") {
  auto scene = simdesk::load_scene(kAssets + "/scenes/office.json");
  auto server = simdesk::serve(scene, 0);
  auto session = channel::connect({"127.0.0.1", server->port()});
  auto profile = office_profile();
  actions::Executor executor(*session, profile, 33);

  actions::UnitAction open;
  open.op = actions::UnitAction::Op::open_app;
  open.element = "mail-client";
  executor.execute(open);

  auto stats = server->stats();
  for (const auto& [type, count] : stats.message_histogram) {
    bool allowed = type == rfb::msg_set_pixel_format || type == rfb::msg_set_encodings ||
                   type == rfb::msg_framebuffer_update_request ||
                   type == rfb::msg_key_event || type == rfb::msg_pointer_event;
    CHECK(allowed);
  }
  // connection setup sends exactly one of each config message
  CHECK(stats.message_histogram.at(rfb::msg_set_pixel_format) == 1);
  CHECK(stats.message_histogram.at(rfb::msg_set_encodings) == 1);
}

TEST_CASE("send_mail expands to the documented fixed sub-sequence") {
  actions::UnitAction mail;
  mail.op = actions::UnitAction::Op::send_mail;
  mail.to = "a@b";
  mail.subject = "s";
  mail.body = "b";
  auto expansion = actions::send_mail_expansion(mail);
  REQUIRE(expansion.size() == 9);
  CHECK(expansion[0].op == actions::UnitAction::Op::open_app);
  CHECK(expansion[0].element == "mail-client");
  CHECK(expansion[1].element == "compose");
  CHECK(expansion[2].element == "to-field");
  CHECK(expansion[3].text == "a@b");
  CHECK(expansion[4].element == "subject-field");
  CHECK(expansion[5].text == "s");
  CHECK(expansion[6].element == "body-area");
  CHECK(expansion[7].text == "b");
  CHECK(expansion[8].element == "send-button");
}

TEST_CASE("script files parse and reject unknown ops") {
  auto script = actions::parse_script_text(
      R"([{"op": "open_app", "element": "mail-client"},
          {"op": "type_text", "text": "hello"},
          {"op": "wait", "ms": 250}])",
      "inline");
  REQUIRE(script.size() == 3);
  CHECK(script[0].op == actions::UnitAction::Op::open_app);
  CHECK(script[1].text == "hello");
  CHECK(script[2].wait_ms == 250);
  CHECK_THROWS_AS(actions::parse_script_text(R"([{"op": "explode"}])", "inline"), Error);
  CHECK_THROWS_AS(actions::parse_script_text(R"({"op": "wait"})", "inline"), Error);
}
