#include "rivulet/flow/operators.hpp"

#include <algorithm>
#include <stdexcept>

namespace rivulet::flow {

namespace {
inline bool is_token_byte(char c) {
  return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9');
}
inline char lower(char c) { return (c >= 'A' && c <= 'Z') ? static_cast<char>(c + 32) : c; }
}  // namespace

void tokenize(std::string_view text, const std::function<void(std::string_view)>& token) {
  std::string word;
  for (char c : text) {
    if (is_token_byte(c)) {
      word.push_back(lower(c));
    } else if (!word.empty()) {
      token(word);
      word.clear();
    }
  }
  if (!word.empty()) token(word);
}

bool value_contains(BytesView value, std::string_view pattern) {
  if (pattern.empty()) return true;
  const auto* begin = reinterpret_cast<const char*>(value.data());
  return std::string_view(begin, value.size()).find(pattern) != std::string_view::npos;
}

std::int64_t KeyedSum::add(std::string_view key, std::int64_t value) {
  auto [it, inserted] = totals_.try_emplace(std::string(key), 0);
  it->second += value;
  return it->second;
}

std::map<std::string, std::int64_t> KeyedSum::sorted_totals() const {
  return {totals_.begin(), totals_.end()};
}

void validate(const WindowSpec& spec) {
  if (spec.size <= 0) throw std::invalid_argument("window size must be positive");
  if (spec.slide <= 0 || spec.slide > spec.size) {
    throw std::invalid_argument("window slide must be in (0, size]");
  }
  if (spec.kind == WindowKind::Time && spec.size % spec.slide != 0) {
    throw std::invalid_argument("time window size must be a multiple of slide");
  }
}

CountWindow::CountWindow(const WindowSpec& spec) : spec_(spec) {
  if (spec_.kind != WindowKind::Count) throw std::invalid_argument("count window spec expected");
  validate(spec_);
}

void CountWindow::add(std::string_view key, std::int64_t value,
                      const std::function<void(const WindowEmission&)>& emit) {
  KeyState& state = keys_[std::string(key)];
  state.values.push_back(value);
  ++state.seen;
  if (state.values.size() < static_cast<std::size_t>(spec_.size)) return;
  std::int64_t sum = 0;
  for (std::int64_t v : state.values) sum += v;
  emit({state.seen, std::string(key), sum});
  state.values.erase(state.values.begin(), state.values.begin() + spec_.slide);
}

TimeWindow::TimeWindow(const WindowSpec& spec, Micros start)
    : spec_(spec), start_us_(start.count()), buckets_per_window_(spec.size / spec.slide) {
  if (spec_.kind != WindowKind::Time) throw std::invalid_argument("time window spec expected");
  validate(spec_);
}

std::int64_t TimeWindow::bucket_of(Micros arrival) const {
  return (arrival.count() - start_us_) / spec_.slide;
}

void TimeWindow::add(std::string_view key, std::int64_t value, Micros arrival) {
  buckets_[bucket_of(arrival)][std::string(key)] += value;
}

void TimeWindow::advance_to(Micros now, const std::function<void(const WindowEmission&)>& emit) {
  const std::int64_t current = (now.count() - start_us_) / spec_.slide;
  for (; next_tick_ < current; ++next_tick_) {
    const std::int64_t lo = next_tick_ - buckets_per_window_ + 1;
    std::map<std::string, std::int64_t> sums;  // ordered for stable output
    for (auto it = buckets_.lower_bound(lo); it != buckets_.end() && it->first <= next_tick_;
         ++it) {
      for (const auto& [key, v] : it->second) sums[key] += v;
    }
    for (const auto& [key, sum] : sums) emit({next_tick_, key, sum});
    buckets_.erase(buckets_.begin(), buckets_.lower_bound(lo + 1));
  }
}

}  // namespace rivulet::flow
