#pragma once

#include <cstdint>
#include <vector>

#include "usim/geometry.hpp"

namespace usim {

struct Rgba {
  uint8_t r = 0;
  uint8_t g = 0;
  uint8_t b = 0;
  uint8_t a = 255;

  friend bool operator==(const Rgba&, const Rgba&) = default;
};

// One screen capture: row-major RGBA8 samples, alpha fixed at 255.
struct Frame {
  int width = 0;
  int height = 0;
  std::vector<Rgba> pixels;
  int64_t captured_at = 0; // monotonic milliseconds

  Frame() = default;
  Frame(int w, int h, Rgba fill = {0, 0, 0, 255})
      : width(w), height(h), pixels(static_cast<size_t>(w) * h, fill) {}

  Rgba& at(int x, int y) { return pixels[static_cast<size_t>(y) * width + x]; }
  const Rgba& at(int x, int y) const {
    return pixels[static_cast<size_t>(y) * width + x];
  }

  bool in_bounds(int x, int y) const {
    return x >= 0 && x < width && y >= 0 && y < height;
  }

  bool same_pixels(const Frame& o) const {
    return width == o.width && height == o.height && pixels == o.pixels;
  }
};

// Pointer button mask bits: bit0 = left, bit1 = middle, bit2 = right,
// bits 3/4 = wheel up/down. Matches the RFB button-mask layout.
namespace button {
constexpr uint8_t left = 0x01;
constexpr uint8_t middle = 0x02;
constexpr uint8_t right = 0x04;
constexpr uint8_t wheel_up = 0x08;
constexpr uint8_t wheel_down = 0x10;
} // namespace button

struct PointerEvent {
  int x = 0;
  int y = 0;
  uint8_t buttons = 0;
  int64_t at = 0; // monotonic milliseconds

  friend bool operator==(const PointerEvent&, const PointerEvent&) = default;
};

struct KeyEvent {
  uint32_t keysym = 0;
  bool pressed = false;
  int64_t at = 0; // monotonic milliseconds

  friend bool operator==(const KeyEvent&, const KeyEvent&) = default;
};

} // namespace usim
