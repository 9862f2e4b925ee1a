#include "usim/clock.hpp"

namespace usim {

int64_t steady_now_ms() {
  static const auto origin = std::chrono::steady_clock::now();
  return std::chrono::duration_cast<std::chrono::milliseconds>(
             std::chrono::steady_clock::now() - origin)
      .count();
}

} // namespace usim
