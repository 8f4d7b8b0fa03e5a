#pragma once

#include <atomic>
#include <chrono>
#include <cstdint>

namespace rivulet {

using Micros = std::chrono::microseconds;

// Monotonic time source, injectable so sealing/windowing logic is testable
// without real sleeps.
class Clock {
 public:
  virtual ~Clock() = default;
  virtual Micros now() const = 0;
};

class SteadyClock final : public Clock {
 public:
  Micros now() const override {
    return std::chrono::duration_cast<Micros>(
        std::chrono::steady_clock::now().time_since_epoch());
  }

  static SteadyClock& instance() {
    static SteadyClock clock;
    return clock;
  }
};

class FakeClock final : public Clock {
 public:
  explicit FakeClock(Micros start = Micros{0}) : now_us_(start.count()) {}

  Micros now() const override { return Micros{now_us_.load(std::memory_order_relaxed)}; }

  void advance(Micros delta) { now_us_.fetch_add(delta.count(), std::memory_order_relaxed); }
  void set(Micros t) { now_us_.store(t.count(), std::memory_order_relaxed); }

 private:
  std::atomic<std::int64_t> now_us_;
};

}  // namespace rivulet
