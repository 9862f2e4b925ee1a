#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "usim/frame.hpp"
#include "usim/geometry.hpp"

namespace usim::human {

// Input-shaping knobs. Everything a per-user profile may want to vary
// lives here; code holds no timing constants of its own.
struct HumanizerConfig {
  int tick_ms = 10;                 // trajectory sampling period
  double duration_base_ms = 80.0;   // a in T(d) = a + b*sqrt(d)
  double duration_gain = 14.0;      // b
  double curvature = 0.12;          // Bezier control offset, fraction of d
  double jitter_sigma = 1.2;        // px
  double inertia_alpha = 0.3;       // one-pole low-pass coefficient
  double vmax_px_per_ms = 4.0;      // per-tick speed cap
  double key_latency_mu = 4.787;    // ln(120 ms)
  double key_latency_sigma = 0.45;
  int key_latency_min_ms = 30;
  int key_latency_max_ms = 500;
  int key_hold_min_ms = 40;
  int key_hold_max_ms = 90;
  int sentence_pause_min_ms = 200; // extra pause after . ! ?
  int sentence_pause_max_ms = 600;
  int click_gap_min_ms = 60; // between presses of a multi-click
  int click_gap_max_ms = 150;
  int idle_amplitude_px = 4;
  uint64_t rng_seed = 0;

  bool valid() const {
    return tick_ms > 0 && duration_base_ms > 0 && duration_gain > 0 &&
           curvature > 0 && jitter_sigma > 0 && inertia_alpha > 0 &&
           inertia_alpha < 1 && vmax_px_per_ms > 0 &&
           key_latency_min_ms <= key_latency_max_ms && idle_amplitude_px > 0;
  }
};

using Rng = std::mt19937_64;

struct TrajectorySample {
  int x = 0;
  int y = 0;
  int64_t at = 0; // ms offset from gesture start, strictly increasing
};

struct Trajectory {
  std::vector<TrajectorySample> samples;
};

// Segmented, curved, jittered point-to-point move. Duration follows
// T(d) = a + b*sqrt(d) so short moves are slower than long ones in mean
// speed; the last sample lands exactly on `to` and no step exceeds
// vmax * dt.
Trajectory plan_trajectory(Point from, Point to, const HumanizerConfig& cfg, Rng& rng);

// Press/release pairs with log-normal inter-key latency (clamped),
// uniform hold times, shift wrapping for uppercase, and an extra pause
// after sentence enders. Throws Error{unmappable_character}.
std::vector<KeyEvent> keystroke_schedule(const std::string& text,
                                         const HumanizerConfig& cfg, Rng& rng);

// Mean-reverting wander around `center`, clipped to the idle amplitude;
// one sample per tick covering [0, duration_ms).
Trajectory idle_jitter(Point center, int64_t duration_ms, const HumanizerConfig& cfg,
                       Rng& rng);

// Closed-form duration law, exposed for tests and planners.
double move_duration_ms(double distance_px, const HumanizerConfig& cfg);

} // namespace usim::human
