#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <random>
#include <set>

#include "support/test_support.hpp"
#include "usim/error.hpp"
#include "usim/simdesk.hpp"
#include "usim/vision.hpp"

using namespace usim;
using test_support::flood_fill_components;
using test_support::naive_adaptive_threshold;
using test_support::naive_zncc_scores;

namespace {

Frame random_frame(std::mt19937_64& rng, int w, int h) {
  Frame frame(w, h);
  std::uniform_int_distribution<int> channel(0, 255);
  for (auto& px : frame.pixels)
    px = {static_cast<uint8_t>(channel(rng)), static_cast<uint8_t>(channel(rng)),
          static_cast<uint8_t>(channel(rng)), 255};
  return frame;
}

vision::Mask random_mask(std::mt19937_64& rng, int w, int h, double p) {
  vision::Mask mask(static_cast<size_t>(w) * h, 0);
  std::bernoulli_distribution bit(p);
  for (auto& v : mask) v = bit(rng) ? 1 : 0;
  return mask;
}

} // namespace

// --------------------------------------------------------------------------
// adaptive_threshold

TEST_CASE("uniform image has no foreground") {
  vision::GrayImage img(20, 14);
  std::fill(img.intensities.begin(), img.intensities.end(), 130);
  vision::Mask mask = vision::adaptive_threshold(img);
  for (uint8_t v : mask) CHECK(v == 0);
}

TEST_CASE("dark text on white becomes foreground") {
  simdesk::Scene scene;
  scene.width = 80;
  scene.height = 20;
  scene.background = {250, 250, 250};
  simdesk::Element label;
  label.id = "l";
  label.kind = simdesk::ElementKind::text_label;
  label.rect = {10, 6, 40, 7};
  label.label = "Txt";
  label.style.text = {10, 10, 10};
  scene.elements.push_back(label);
  Frame frame = simdesk::render(scene);

  vision::GrayImage gray = vision::to_gray(frame);
  vision::Mask mask = vision::adaptive_threshold(gray, 7, 10);
  const font5x7::Glyph* g = font5x7::find('T');
  int fg = 0;
  for (int r = 0; r < 7; ++r)
    for (int c = 0; c < 5; ++c)
      if (g->rows[r][c] == '#') {
        CHECK(mask[static_cast<size_t>(6 + r) * 80 + 10 + c] == 1);
        fg++;
      }
  CHECK(fg > 0);
}

TEST_CASE("adaptive_threshold equals the naive double loop") {
  std::mt19937_64 rng(42);
  std::uniform_int_distribution<int> value(0, 255);
  // the spec's pinned case: 9x9, r=2, C=5
  vision::GrayImage img(9, 9);
  for (auto& v : img.intensities) v = static_cast<uint8_t>(value(rng));
  CHECK(vision::adaptive_threshold(img, 2, 5) == naive_adaptive_threshold(img, 2, 5));

  for (int round = 0; round < 25; ++round) {
    std::uniform_int_distribution<int> dim(1, 40);
    vision::GrayImage r(dim(rng), dim(rng));
    for (auto& v : r.intensities) v = static_cast<uint8_t>(value(rng));
    int radius = 1 + round % 7;
    int c = round % 20;
    CHECK(vision::adaptive_threshold(r, radius, c) ==
          naive_adaptive_threshold(r, radius, c));
  }
}

// --------------------------------------------------------------------------
// connected_components

TEST_CASE("empty mask yields no components") {
  vision::Mask mask(30 * 10, 0);
  CHECK(vision::connected_components(mask, 30, 10).empty());
}

TEST_CASE("two disjoint blocks are separate components") {
  vision::Mask mask(20 * 8, 0);
  auto set = [&](int x, int y) { mask[static_cast<size_t>(y) * 20 + x] = 1; };
  set(2, 2);
  set(3, 2);
  set(2, 3);
  set(3, 3);
  set(10, 5);
  set(11, 5);
  set(10, 6);
  set(11, 6);
  auto comps = vision::connected_components(mask, 20, 8);
  REQUIRE(comps.size() == 2);
  for (const auto& comp : comps) {
    CHECK(comp.pixel_count == 4);
    CHECK(comp.rect.w == 2);
    CHECK(comp.rect.h == 2);
  }
}

TEST_CASE("components agree with a flood-fill oracle on random masks") {
  std::mt19937_64 rng(7);
  for (int round = 0; round < 30; ++round) {
    int w = 50, h = 50;
    vision::Mask mask = random_mask(rng, w, h, 0.35);
    auto got = vision::connected_components(mask, w, h);
    auto want = flood_fill_components(mask, w, h);

    int mask_total = 0;
    for (uint8_t v : mask) mask_total += v;
    int got_total = 0;
    for (const auto& comp : got) got_total += comp.pixel_count;
    CHECK(got_total == mask_total);
    REQUIRE(got.size() == want.size());

    // same multiset of (rect, count)
    auto key = [](int x, int y, int w2, int h2, int n) {
      return std::to_string(x) + "," + std::to_string(y) + "," + std::to_string(w2) +
             "," + std::to_string(h2) + "#" + std::to_string(n);
    };
    std::multiset<std::string> got_keys, want_keys;
    for (const auto& comp : got)
      got_keys.insert(key(comp.rect.x, comp.rect.y, comp.rect.w, comp.rect.h,
                          comp.pixel_count));
    for (const auto& comp : want)
      want_keys.insert(key(comp.rect.x, comp.rect.y, comp.rect.w, comp.rect.h,
                           comp.pixel_count));
    CHECK(got_keys == want_keys);
  }
}

TEST_CASE("components are sorted by pixel count descending") {
  std::mt19937_64 rng(11);
  vision::Mask mask = random_mask(rng, 40, 40, 0.3);
  auto comps = vision::connected_components(mask, 40, 40);
  for (size_t i = 1; i < comps.size(); ++i)
    CHECK(comps[i - 1].pixel_count >= comps[i].pixel_count);
}

// --------------------------------------------------------------------------
// match_template

TEST_CASE("exact copy matches with score 1 at the right offset") {
  std::mt19937_64 rng(3);
  Frame tmpl = random_frame(rng, 6, 5);
  Frame frame(40, 30, {90, 90, 90, 255});
  for (int y = 0; y < tmpl.height; ++y)
    for (int x = 0; x < tmpl.width; ++x) frame.at(13 + x, 9 + y) = tmpl.at(x, y);
  auto hits = vision::match_template(frame, tmpl, 0.8);
  REQUIRE_FALSE(hits.empty());
  CHECK(hits.front().rect.x == 13);
  CHECK(hits.front().rect.y == 9);
  CHECK(hits.front().score == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("uniform frame cannot match a non-uniform template") {
  Frame frame(30, 30, {120, 120, 120, 255});
  std::mt19937_64 rng(5);
  Frame tmpl = random_frame(rng, 4, 4);
  auto hits = vision::match_template(frame, tmpl, 0.8);
  CHECK(hits.empty());
}

TEST_CASE("score map equals brute force at every offset (12x12, 3x3, threshold 0)") {
  std::mt19937_64 rng(17);
  Frame frame = random_frame(rng, 12, 12);
  Frame tmpl = random_frame(rng, 3, 3);
  auto got = vision::match_template_scores(frame, tmpl);
  auto want = naive_zncc_scores(frame, tmpl);
  REQUIRE(got.scores.size() == 100);
  REQUIRE(want.size() == 100);
  for (size_t i = 0; i < want.size(); ++i)
    CHECK(std::abs(got.scores[i] - want[i]) <= 1e-9);
}

TEST_CASE("flat template falls back to mean absolute difference") {
  Frame tmpl(3, 3, {100, 100, 100, 255});
  Frame frame(10, 10, {100, 100, 100, 255});
  auto hits = vision::match_template(frame, tmpl, 0.99);
  REQUIRE_FALSE(hits.empty());
  CHECK(hits.front().score == doctest::Approx(1.0));
}

TEST_CASE("template larger than frame is rejected") {
  Frame frame(4, 4);
  Frame tmpl(5, 5);
  CHECK_THROWS_AS(vision::match_template(frame, tmpl, 0.5), Error);
}

TEST_CASE("non-maximum suppression keeps top-left on ties") {
  Frame tmpl(4, 4, {20, 20, 20, 255});
  for (int i = 0; i < 4; ++i) tmpl.at(i, i) = {240, 240, 240, 255};
  Frame frame(40, 12, {128, 128, 128, 255});
  for (int y = 0; y < 4; ++y)
    for (int x = 0; x < 4; ++x) {
      frame.at(6 + x, 4 + y) = tmpl.at(x, y);
      frame.at(26 + x, 4 + y) = tmpl.at(x, y);
    }
  auto hits = vision::match_template(frame, tmpl, 0.95);
  REQUIRE(hits.size() == 2);
  CHECK(hits[0].rect.x == 6); // equal scores resolve in row-major order
  CHECK(hits[1].rect.x == 26);
}

// --------------------------------------------------------------------------
// detect_zones

TEST_CASE("blank frame produces no zones") {
  Frame frame(120, 90, {230, 230, 230, 255});
  vision::RuleTrustingClassifier trusting;
  CHECK(vision::detect_zones(frame, vision::GeometryRules::defaults(), trusting).empty());
}

TEST_CASE("icon and button fixture produce exactly two zones of the right kinds") {
  simdesk::Scene scene;
  scene.width = 160;
  scene.height = 100;
  scene.background = {228, 230, 233};
  simdesk::Element icon;
  icon.id = "i";
  icon.kind = simdesk::ElementKind::icon;
  icon.rect = {20, 20, 16, 16};
  icon.style.fill = {70, 80, 120};
  scene.elements.push_back(icon);
  simdesk::Element btn;
  btn.id = "b";
  btn.kind = simdesk::ElementKind::button;
  btn.rect = {60, 60, 60, 20};
  btn.label = "Run";
  btn.style.fill = {60, 110, 80};
  btn.style.text = {235, 240, 238};
  scene.elements.push_back(btn);

  Frame frame = simdesk::render(scene);
  vision::RuleTrustingClassifier trusting;
  auto zones = vision::detect_zones(frame, vision::GeometryRules::defaults(), trusting);
  REQUIRE(zones.size() == 2);
  const vision::ZoneOfInterest* icon_zone = nullptr;
  const vision::ZoneOfInterest* button_zone = nullptr;
  for (const auto& zone : zones) {
    if (zone.kind == vision::ZoneKind::icon) icon_zone = &zone;
    if (zone.kind == vision::ZoneKind::button) button_zone = &zone;
  }
  REQUIRE(icon_zone);
  REQUIRE(button_zone);
  CHECK(test_support::rect_close(icon_zone->rect, icon.rect, 2));
  CHECK(test_support::rect_close(button_zone->rect, btn.rect, 2));
}

TEST_CASE("a rendered text label becomes one text-line zone") {
  simdesk::Scene scene;
  scene.width = 140;
  scene.height = 60;
  scene.background = {235, 235, 235};
  simdesk::Element label;
  label.id = "t";
  label.kind = simdesk::ElementKind::text_label;
  label.rect = {20, 25, 80, 7};
  label.label = "Documents";
  label.style.text = {40, 40, 45};
  scene.elements.push_back(label);
  Frame frame = simdesk::render(scene);

  vision::RuleTrustingClassifier trusting;
  auto zones = vision::detect_zones(frame, vision::GeometryRules::defaults(), trusting);
  REQUIRE(zones.size() == 1);
  CHECK(zones.front().kind == vision::ZoneKind::text_line);
  CHECK(zones.front().rect.y >= 24);
  CHECK(zones.front().rect.h <= 8);
}

TEST_CASE("detection recall is total on randomized rule-range scenes") {
  std::mt19937_64 rng(101);
  vision::RuleTrustingClassifier trusting;
  for (int round = 0; round < 10; ++round) {
    std::vector<test_support::GroundTruth> truth;
    simdesk::Scene scene = test_support::random_detectable_scene(rng, &truth);
    Frame frame = simdesk::render(scene);
    auto zones = vision::detect_zones(frame, vision::GeometryRules::defaults(), trusting);
    for (const auto& gt : truth) {
      bool covered = false;
      for (const auto& zone : zones)
        if (zone.kind == gt.kind && test_support::rect_close(zone.rect, gt.visual_rect, 2))
          covered = true;
      INFO("round ", round, " element ", gt.id, " kind ",
           vision::to_string(gt.kind));
      CHECK(covered);
    }
  }
}

TEST_CASE("translation equivariance away from borders") {
  std::mt19937_64 rng(55);
  std::vector<test_support::GroundTruth> truth;
  simdesk::Scene scene = test_support::random_detectable_scene(rng, &truth, 200, 160);
  Frame base = simdesk::render(scene);

  const int dx = 17, dy = 11;
  simdesk::Scene shifted = scene;
  for (auto& e : shifted.elements) {
    e.rect.x += dx;
    e.rect.y += dy;
  }
  shifted.width += dx * 2;
  shifted.height += dy * 2;
  Frame moved = simdesk::render(shifted);

  vision::RuleTrustingClassifier trusting;
  auto zones_a = vision::detect_zones(base, vision::GeometryRules::defaults(), trusting);
  auto zones_b = vision::detect_zones(moved, vision::GeometryRules::defaults(), trusting);
  REQUIRE(zones_a.size() == zones_b.size());
  auto sort_zones = [](std::vector<vision::ZoneOfInterest>& zones) {
    std::sort(zones.begin(), zones.end(), [](const auto& a, const auto& b) {
      if (a.rect.y != b.rect.y) return a.rect.y < b.rect.y;
      return a.rect.x < b.rect.x;
    });
  };
  sort_zones(zones_a);
  sort_zones(zones_b);
  for (size_t i = 0; i < zones_a.size(); ++i) {
    CHECK(zones_b[i].rect.x == zones_a[i].rect.x + dx);
    CHECK(zones_b[i].rect.y == zones_a[i].rect.y + dy);
    CHECK(zones_b[i].rect.w == zones_a[i].rect.w);
    CHECK(zones_b[i].rect.h == zones_a[i].rect.h);
    CHECK(zones_b[i].kind == zones_a[i].kind);
  }
}

// --------------------------------------------------------------------------
// classify_zone

TEST_CASE("prototype classifier basics") {
  std::mt19937_64 rng(23);
  Frame button_proto = random_frame(rng, 30, 12);
  Frame icon_proto = random_frame(rng, 16, 16);

  vision::PrototypeClassifier model;
  model.add_prototype(vision::ZoneKind::button, button_proto);
  model.add_prototype(vision::ZoneKind::icon, icon_proto);

  // crop identical to a prototype scores 1.0
  Frame frame(60, 40, {128, 128, 128, 255});
  for (int y = 0; y < button_proto.height; ++y)
    for (int x = 0; x < button_proto.width; ++x) frame.at(10 + x, 10 + y) = button_proto.at(x, y);
  auto [kind, confidence] =
      vision::classify_zone(frame, {10, 10, button_proto.width, button_proto.height}, model);
  CHECK(kind == vision::ZoneKind::button);
  CHECK(confidence == doctest::Approx(1.0));

  // empty prototype set errors
  vision::PrototypeClassifier empty;
  CHECK_THROWS_AS(vision::classify_zone(frame, {0, 0, 8, 8}, empty), Error);
}

TEST_CASE("equidistant crop resolves to the first kind in profile order") {
  Frame bright(8, 8, {200, 200, 200, 255});
  Frame dark(8, 8, {100, 100, 100, 255});
  vision::PrototypeClassifier model;
  model.add_prototype(vision::ZoneKind::button, bright);
  model.add_prototype(vision::ZoneKind::icon, dark);

  Frame frame(20, 20, {150, 150, 150, 255}); // equidistant from both
  auto [kind, confidence] = vision::classify_zone(frame, {4, 4, 8, 8}, model);
  CHECK(kind == vision::ZoneKind::button);
  CHECK(confidence < 1.0);
}

TEST_CASE("low-confidence crops are relabelled unknown in the pipeline role") {
  Frame proto(8, 8, {0, 0, 0, 255});
  vision::PrototypeClassifier model;
  model.add_prototype(vision::ZoneKind::icon, proto);
  Frame frame(20, 20, {255, 255, 255, 255});
  auto [kind, confidence] = model.classify(frame, {4, 4, 8, 8}, vision::ZoneKind::button);
  CHECK(kind == vision::ZoneKind::unknown);
  CHECK(confidence < 0.5);
}

// --------------------------------------------------------------------------
// ocr_line and find_links

namespace {

simdesk::Scene label_scene(const std::string& text, Rgb colour = {40, 40, 45}) {
  simdesk::Scene scene;
  scene.width = std::max(40, static_cast<int>(text.size()) * 6 + 20);
  scene.height = 40;
  scene.background = {235, 235, 235};
  simdesk::Element label;
  label.id = "t";
  label.kind = simdesk::ElementKind::text_label;
  label.rect = {10, 16, static_cast<int>(text.size()) * 6 + 1, 7};
  label.label = text;
  label.style.text = colour;
  scene.elements.push_back(label);
  return scene;
}

} // namespace

TEST_CASE("ocr round-trips a rendered label") {
  simdesk::Scene scene = label_scene("Open");
  Frame frame = simdesk::render(scene);
  CHECK(vision::ocr_line(frame, scene.elements[0].rect) == "Open");
}

TEST_CASE("ocr of an empty rect is empty") {
  Frame frame(30, 30, {235, 235, 235, 255});
  CHECK(vision::ocr_line(frame, {5, 5, 20, 10}) == "");
  CHECK(vision::ocr_line(frame, {0, 0, 0, 0}) == "");
}

TEST_CASE("a corrupted glyph reads as '?' and neighbours survive") {
  simdesk::Scene scene = label_scene("Open");
  Frame frame = simdesk::render(scene);
  // flip two pixels inside the 'p' cell (third glyph, cells start at x=10)
  int cell_x = 10 + 2 * font5x7::advance;
  frame.at(cell_x + 1, 17) = {40, 40, 45, 255};
  frame.at(cell_x + 2, 21) = {235, 235, 235, 255};
  std::string got = vision::ocr_line(frame, scene.elements[0].rect);
  REQUIRE(got.size() == 4);
  CHECK(got[0] == 'O');
  CHECK(got[2] == '?');
  CHECK(got[3] == 'n');
}

TEST_CASE("find_links reads one blue link among black text") {
  simdesk::Scene scene;
  scene.width = 200;
  scene.height = 60;
  scene.background = {240, 240, 240};
  simdesk::Element text;
  text.id = "t";
  text.kind = simdesk::ElementKind::text_label;
  text.rect = {10, 20, 100, 7};
  text.label = "see also";
  text.style.text = {30, 30, 30};
  scene.elements.push_back(text);
  simdesk::Element link;
  link.id = "l";
  link.kind = simdesk::ElementKind::link;
  link.rect = {10, 40, 40, 7};
  link.label = "Docs";
  link.style.text = {0, 50, 200};
  scene.elements.push_back(link);

  Frame frame = simdesk::render(scene);
  auto links = vision::find_links(frame, {0, 50, 200});
  REQUIRE(links.size() == 1);
  CHECK(links.front().text == "Docs");
}

TEST_CASE("find_links on a linkless frame is empty") {
  Frame frame(50, 50, {240, 240, 240, 255});
  CHECK(vision::find_links(frame, {0, 50, 200}).empty());
}

TEST_CASE("two separated links come back left to right") {
  simdesk::Scene scene;
  scene.width = 220;
  scene.height = 30;
  scene.background = {240, 240, 240};
  auto add_link = [&](const std::string& id, int x, const std::string& text) {
    simdesk::Element link;
    link.id = id;
    link.kind = simdesk::ElementKind::link;
    link.rect = {x, 10, static_cast<int>(text.size()) * 6 + 1, 7};
    link.label = text;
    link.style.text = {0, 50, 200};
    scene.elements.push_back(link);
  };
  add_link("a", 10, "Home");
  add_link("b", 80, "Help");
  Frame frame = simdesk::render(scene);
  auto links = vision::find_links(frame, {0, 50, 200});
  REQUIRE(links.size() == 2);
  CHECK(links[0].text == "Home");
  CHECK(links[1].text == "Help");
}
