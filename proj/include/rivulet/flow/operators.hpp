#pragma once

#include <cstdint>
#include <deque>
#include <functional>
#include <map>
#include <string>
#include <string_view>
#include <unordered_map>

#include "rivulet/bytes.hpp"
#include "rivulet/clock.hpp"

namespace rivulet::flow {

// Splits on runs of non-alphanumeric ASCII bytes, lowercases, drops empties.
// Bytes outside ASCII also act as separators.
void tokenize(std::string_view text, const std::function<void(std::string_view)>& token);

// Raw-byte substring match; an empty pattern matches everything.
bool value_contains(BytesView value, std::string_view pattern);

// Running per-key prefix sums; every input pair emits the updated total.
class KeyedSum {
 public:
  std::int64_t add(std::string_view key, std::int64_t value);

  const std::unordered_map<std::string, std::int64_t>& totals() const { return totals_; }
  std::map<std::string, std::int64_t> sorted_totals() const;

 private:
  std::unordered_map<std::string, std::int64_t> totals_;
};

enum class WindowKind { Count, Time };

struct WindowSpec {
  WindowKind kind = WindowKind::Time;
  // Count windows: sizes in records. Time windows: sizes in microseconds,
  // size a multiple of slide.
  std::int64_t size = 5'000'000;
  std::int64_t slide = 1'000'000;
};

void validate(const WindowSpec& spec);  // throws std::invalid_argument

struct WindowEmission {
  std::int64_t tick = 0;  // count windows: element count at emission
  std::string key;
  std::int64_t sum = 0;
};

// Per-key sliding count window: a key emits the sum of its last `size`
// values once `size` have arrived, then again every `slide` values.
class CountWindow {
 public:
  explicit CountWindow(const WindowSpec& spec);

  void add(std::string_view key, std::int64_t value,
           const std::function<void(const WindowEmission&)>& emit);

 private:
  struct KeyState {
    std::deque<std::int64_t> values;
    std::int64_t seen = 0;
  };
  WindowSpec spec_;
  std::unordered_map<std::string, KeyState> keys_;
};

// Sliding processing-time window on a fixed slide grid anchored at
// `start`. Tick t covers (start + (t+1)*slide - size, start + (t+1)*slide]
// and fires once the clock passes its right edge; only keys active inside
// the window emit.
class TimeWindow {
 public:
  TimeWindow(const WindowSpec& spec, Micros start);

  void add(std::string_view key, std::int64_t value, Micros arrival);

  // Fires every tick whose window closed at or before `now`.
  void advance_to(Micros now, const std::function<void(const WindowEmission&)>& emit);

  std::int64_t bucket_of(Micros arrival) const;

 private:
  WindowSpec spec_;
  std::int64_t start_us_;
  std::int64_t buckets_per_window_;
  std::int64_t next_tick_ = 0;
  std::map<std::int64_t, std::unordered_map<std::string, std::int64_t>> buckets_;
};

}  // namespace rivulet::flow
