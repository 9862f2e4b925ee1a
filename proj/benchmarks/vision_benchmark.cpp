#include <benchmark/benchmark.h>

#include <random>

#include "usim/simdesk.hpp"
#include "usim/vision.hpp"

using namespace usim;

namespace {

Frame desktop_frame(int width, int height, uint64_t seed) {
  std::mt19937_64 rng(seed);
  simdesk::Scene scene;
  scene.width = width;
  scene.height = height;
  scene.background = {228, 230, 233};
  std::uniform_int_distribution<int> x(10, width - 80);
  std::uniform_int_distribution<int> y(10, height - 40);
  std::uniform_int_distribution<int> fill(40, 130);
  for (int i = 0; i < 12; ++i) {
    simdesk::Element e;
    e.id = "e" + std::to_string(i);
    e.kind = i % 2 ? simdesk::ElementKind::button : simdesk::ElementKind::icon;
    e.rect = i % 2 ? Rect{x(rng), y(rng), 64, 20} : Rect{x(rng), y(rng), 24, 24};
    int c = fill(rng);
    e.style.fill = {static_cast<uint8_t>(c), static_cast<uint8_t>(c + 8),
                    static_cast<uint8_t>(c + 16)};
    if (i % 2) {
      e.label = "Button";
      e.style.text = {235, 238, 240};
    }
    scene.elements.push_back(e);
  }
  return simdesk::render(scene);
}

} // namespace

// The human-reaction budget rides on this one: full pipeline on a
// 1280x800 desktop.
static void BM_DetectZones1280x800(benchmark::State& state) {
  Frame frame = desktop_frame(1280, 800, 42);
  vision::RuleTrustingClassifier trusting;
  vision::GeometryRules rules = vision::GeometryRules::defaults();
  for (auto _ : state) {
    auto zones = vision::detect_zones(frame, rules, trusting);
    benchmark::DoNotOptimize(zones);
  }
}
BENCHMARK(BM_DetectZones1280x800)->Unit(benchmark::kMillisecond);

static void BM_AdaptiveThreshold(benchmark::State& state) {
  Frame frame = desktop_frame(1280, 800, 43);
  vision::GrayImage gray = vision::to_gray(frame);
  for (auto _ : state) {
    auto mask = vision::adaptive_threshold(gray);
    benchmark::DoNotOptimize(mask);
  }
}
BENCHMARK(BM_AdaptiveThreshold)->Unit(benchmark::kMillisecond);

static void BM_ConnectedComponents(benchmark::State& state) {
  Frame frame = desktop_frame(1280, 800, 44);
  vision::GrayImage gray = vision::to_gray(frame);
  vision::Mask mask = vision::adaptive_threshold(gray);
  for (auto _ : state) {
    auto comps = vision::connected_components(mask, 1280, 800);
    benchmark::DoNotOptimize(comps);
  }
}
BENCHMARK(BM_ConnectedComponents)->Unit(benchmark::kMillisecond);

static void BM_MatchTemplate(benchmark::State& state) {
  Frame frame = desktop_frame(640, 400, 45);
  Frame tmpl(24, 24);
  for (int y = 0; y < 24; ++y)
    for (int x = 0; x < 24; ++x) tmpl.at(x, y) = frame.at(100 + x, 100 + y);
  for (auto _ : state) {
    auto hits = vision::match_template(frame, tmpl, 0.9);
    benchmark::DoNotOptimize(hits);
  }
}
BENCHMARK(BM_MatchTemplate)->Unit(benchmark::kMillisecond);

static void BM_OcrLine(benchmark::State& state) {
  simdesk::Scene scene;
  scene.width = 160;
  scene.height = 24;
  scene.background = {240, 240, 240};
  simdesk::Element label;
  label.id = "t";
  label.kind = simdesk::ElementKind::text_label;
  label.rect = {8, 8, 140, 7};
  label.label = "Quarterly report";
  label.style.text = {25, 25, 30};
  scene.elements.push_back(label);
  Frame frame = simdesk::render(scene);
  for (auto _ : state) {
    auto text = vision::ocr_line(frame, label.rect);
    benchmark::DoNotOptimize(text);
  }
}
BENCHMARK(BM_OcrLine)->Unit(benchmark::kMicrosecond);

BENCHMARK_MAIN();
