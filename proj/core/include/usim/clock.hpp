#pragma once

#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <memory>
#include <mutex>
#include <thread>

namespace usim {

// Monotonic milliseconds since process start.
int64_t steady_now_ms();

// Time source used by executors and the orchestrator. Implementations
// must be safe to share between threads.
class Clock {
 public:
  virtual ~Clock() = default;
  virtual int64_t now_ms() = 0;
  virtual void sleep_for(int64_t ms) = 0;
  void sleep_until(int64_t t_ms) {
    int64_t now = now_ms();
    if (t_ms > now) sleep_for(t_ms - now);
  }
};

class WallClock final : public Clock {
 public:
  int64_t now_ms() override { return steady_now_ms(); }
  void sleep_for(int64_t ms) override {
    if (ms > 0) std::this_thread::sleep_for(std::chrono::milliseconds(ms));
  }
};

// Scales scenario time onto wall time: sleeping N scenario-ms costs
// N/factor wall-ms. now_ms runs factor times faster than the wall.
class AcceleratedClock final : public Clock {
 public:
  explicit AcceleratedClock(double factor, int64_t epoch_ms = 0)
      : factor_(factor), epoch_(epoch_ms), start_(steady_now_ms()) {}

  int64_t now_ms() override {
    return epoch_ + static_cast<int64_t>((steady_now_ms() - start_) * factor_);
  }
  void sleep_for(int64_t ms) override {
    if (ms <= 0) return;
    auto wall = static_cast<int64_t>(ms / factor_);
    std::this_thread::sleep_for(std::chrono::milliseconds(wall > 0 ? wall : 1));
  }

 private:
  double factor_;
  int64_t epoch_;
  int64_t start_;
};

// Discrete-event clock: sleep_for advances virtual time instantly.
// The limit of acceleration; used by tests and fast orchestration runs.
class VirtualClock final : public Clock {
 public:
  explicit VirtualClock(int64_t epoch_ms = 0) : now_(epoch_ms) {}

  int64_t now_ms() override {
    std::lock_guard lock(mu_);
    return now_;
  }
  void sleep_for(int64_t ms) override {
    std::lock_guard lock(mu_);
    if (ms > 0) now_ += ms;
  }

 private:
  std::mutex mu_;
  int64_t now_;
};

} // namespace usim
