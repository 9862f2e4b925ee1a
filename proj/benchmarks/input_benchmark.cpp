#include <benchmark/benchmark.h>

#include "usim/humanizer.hpp"
#include "usim/rfb_wire.hpp"

using namespace usim;

static void BM_PlanTrajectory(benchmark::State& state) {
  human::HumanizerConfig cfg;
  human::Rng rng(7);
  const int d = static_cast<int>(state.range(0));
  for (auto _ : state) {
    auto traj = human::plan_trajectory({0, 0}, {d, d / 2}, cfg, rng);
    benchmark::DoNotOptimize(traj);
  }
}
BENCHMARK(BM_PlanTrajectory)->Arg(50)->Arg(300)->Arg(1200)->Unit(benchmark::kMicrosecond);

static void BM_KeystrokeSchedule(benchmark::State& state) {
  human::HumanizerConfig cfg;
  human::Rng rng(7);
  std::string text = "The quick brown fox jumps over the lazy dog.";
  for (auto _ : state) {
    auto events = human::keystroke_schedule(text, cfg, rng);
    benchmark::DoNotOptimize(events);
  }
}
BENCHMARK(BM_KeystrokeSchedule)->Unit(benchmark::kMicrosecond);

static void BM_EncodeFrameUpdate(benchmark::State& state) {
  Frame frame(1280, 800, {128, 128, 128, 255});
  rfb::PixelFormat pf = rfb::rgba32_little_endian();
  for (auto _ : state) {
    rfb::Bytes out = rfb::encode_framebuffer_update_header(1);
    rfb::Bytes rect = rfb::encode_rect_header(0, 0, 1280, 800, rfb::encoding_raw);
    out.insert(out.end(), rect.begin(), rect.end());
    rfb::append_raw_pixels(out, frame, {0, 0, 1280, 800}, pf);
    benchmark::DoNotOptimize(out);
  }
}
BENCHMARK(BM_EncodeFrameUpdate)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
