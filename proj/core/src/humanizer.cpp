#include "usim/humanizer.hpp"

#include <algorithm>
#include <cmath>

#include "usim/error.hpp"
#include "usim/keysym.hpp"

namespace usim::human {

double move_duration_ms(double distance_px, const HumanizerConfig& cfg) {
  return cfg.duration_base_ms + cfg.duration_gain * std::sqrt(distance_px);
}

namespace {

double smoothstep(double t) { return t * t * (3.0 - 2.0 * t); }

double clipped_normal(Rng& rng, double lo, double hi) {
  std::normal_distribution<double> dist(0.0, 1.0);
  return std::clamp(dist(rng), lo, hi);
}

// Integer step from `from` toward the continuous target, never longer
// than `cap`. Truncation keeps the cap exact after rounding; a lone
// 1 px nudge guarantees progress when the cap is sub-pixel.
Point capped_step(Point from, double want_x, double want_y, double cap) {
  double tx = want_x - from.x;
  double ty = want_y - from.y;
  double len = std::hypot(tx, ty);
  if (len > cap && len > 0.0) {
    tx *= cap / len;
    ty *= cap / len;
  }
  Point next{from.x + static_cast<int>(std::trunc(tx)),
             from.y + static_cast<int>(std::trunc(ty))};
  if (next == from && (want_x != from.x || want_y != from.y) && cap >= 1.0) {
    if (std::abs(tx) >= std::abs(ty))
      next.x += (want_x > from.x) ? 1 : (want_x < from.x ? -1 : 0);
    else
      next.y += (want_y > from.y) ? 1 : (want_y < from.y ? -1 : 0);
  }
  return next;
}

} // namespace

Trajectory plan_trajectory(Point from, Point to, const HumanizerConfig& cfg, Rng& rng) {
  Trajectory traj;
  double dx = to.x - from.x;
  double dy = to.y - from.y;
  double dist = std::hypot(dx, dy);
  if (dist == 0.0) {
    traj.samples.push_back({from.x, from.y, 0});
    return traj;
  }

  const double total = move_duration_ms(dist, cfg);
  const int steps = std::max(1, static_cast<int>(std::ceil(total / cfg.tick_ms)));

  // Quadratic Bezier: control point is the midpoint pushed sideways by
  // curvature * d * u with u a clipped standard normal.
  double u = clipped_normal(rng, -2.0, 2.0);
  double px = -dy / dist, py = dx / dist; // unit perpendicular
  double cx = (from.x + to.x) / 2.0 + px * cfg.curvature * dist * u;
  double cy = (from.y + to.y) / 2.0 + py * cfg.curvature * dist * u;

  std::normal_distribution<double> jitter(0.0, cfg.jitter_sigma);
  double jx = 0.0, jy = 0.0; // low-pass state (inertia)

  traj.samples.push_back({from.x, from.y, 0});
  Point pos = from;
  for (int i = 1; i <= steps; ++i) {
    int64_t at = (i == steps) ? static_cast<int64_t>(std::llround(total))
                              : static_cast<int64_t>(i) * cfg.tick_ms;
    if (at <= traj.samples.back().at) at = traj.samples.back().at + 1;
    double s = smoothstep(static_cast<double>(i) / steps);
    double bx = (1 - s) * (1 - s) * from.x + 2 * s * (1 - s) * cx + s * s * to.x;
    double by = (1 - s) * (1 - s) * from.y + 2 * s * (1 - s) * cy + s * s * to.y;
    double gx = jitter(rng), gy = jitter(rng);
    jx = cfg.inertia_alpha * gx + (1 - cfg.inertia_alpha) * jx;
    jy = cfg.inertia_alpha * gy + (1 - cfg.inertia_alpha) * jy;
    double want_x = (i == steps) ? to.x : bx + jx;
    double want_y = (i == steps) ? to.y : by + jy;

    int64_t dt = at - traj.samples.back().at;
    pos = capped_step(pos, want_x, want_y, cfg.vmax_px_per_ms * static_cast<double>(dt));
    traj.samples.push_back({pos.x, pos.y, at});
  }

  // If the cap bit hard, the scheduled ticks may end short of the
  // target; extend at tick cadence until the endpoint is exact.
  while (pos != to) {
    pos = capped_step(pos, to.x, to.y, cfg.vmax_px_per_ms * cfg.tick_ms);
    traj.samples.push_back({pos.x, pos.y, traj.samples.back().at + cfg.tick_ms});
  }
  return traj;
}

std::vector<KeyEvent> keystroke_schedule(const std::string& text,
                                         const HumanizerConfig& cfg, Rng& rng) {
  std::vector<KeyEvent> events;
  if (text.empty()) return events;

  std::lognormal_distribution<double> latency(cfg.key_latency_mu, cfg.key_latency_sigma);
  std::uniform_int_distribution<int> hold(cfg.key_hold_min_ms, cfg.key_hold_max_ms);
  std::uniform_int_distribution<int> pause(cfg.sentence_pause_min_ms,
                                           cfg.sentence_pause_max_ms);
  std::uniform_int_distribution<int> shift_lead(20, 45);

  int64_t t = 0;
  bool first = true;
  for (char c : text) {
    auto stroke = keystroke_for_char(c);
    if (!stroke)
      throw Error(ErrorCode::unmappable_character,
                  "cannot type byte 0x" + std::to_string(static_cast<unsigned char>(c)));
    if (!first) {
      int64_t gap = static_cast<int64_t>(std::llround(latency(rng)));
      gap = std::clamp<int64_t>(gap, cfg.key_latency_min_ms, cfg.key_latency_max_ms);
      t += gap;
    }
    first = false;

    if (stroke->shifted) {
      events.push_back({keysym::shift_left, true, t});
      t += shift_lead(rng);
    }
    events.push_back({stroke->sym, true, t});
    t += hold(rng);
    events.push_back({stroke->sym, false, t});
    if (stroke->shifted) {
      t += shift_lead(rng);
      events.push_back({keysym::shift_left, false, t});
    }
    if (c == '.' || c == '!' || c == '?') t += pause(rng);
    t += 1; // next event strictly later
  }
  return events;
}

Trajectory idle_jitter(Point center, int64_t duration_ms, const HumanizerConfig& cfg,
                       Rng& rng) {
  Trajectory traj;
  int64_t n = std::max<int64_t>(1, duration_ms / cfg.tick_ms);
  std::normal_distribution<double> step(0.0, cfg.idle_amplitude_px / 2.0);
  double x = center.x, y = center.y;
  for (int64_t i = 0; i < n; ++i) {
    if (i > 0) {
      x += cfg.inertia_alpha * (center.x - x) + step(rng);
      y += cfg.inertia_alpha * (center.y - y) + step(rng);
      double off = std::hypot(x - center.x, y - center.y);
      if (off > cfg.idle_amplitude_px) {
        double k = cfg.idle_amplitude_px / off;
        x = center.x + (x - center.x) * k;
        y = center.y + (y - center.y) * k;
      }
    }
    // Truncate toward the center so rounding cannot leave the disc.
    traj.samples.push_back({center.x + static_cast<int>(std::trunc(x - center.x)),
                            center.y + static_cast<int>(std::trunc(y - center.y)),
                            i * cfg.tick_ms});
  }
  return traj;
}

} // namespace usim::human
