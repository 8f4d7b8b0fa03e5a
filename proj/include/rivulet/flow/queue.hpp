#pragma once

#include <condition_variable>
#include <deque>
#include <mutex>
#include <optional>

#include "rivulet/clock.hpp"

namespace rivulet::flow {

// Blocking MPMC queue. A full queue blocks push until a consumer drains it:
// this is the engine-side backpressure between pipeline stages.
template <typename T>
class BoundedQueue {
 public:
  explicit BoundedQueue(std::size_t capacity) : capacity_(capacity) {}

  // Blocks while full. Returns false (drops the item) once closed.
  bool push(T item) {
    std::unique_lock lock(mu_);
    not_full_.wait(lock, [&] { return items_.size() < capacity_ || closed_; });
    if (closed_) return false;
    items_.push_back(std::move(item));
    max_occupancy_ = std::max(max_occupancy_, items_.size());
    not_empty_.notify_one();
    return true;
  }

  // Waits up to `timeout` for an item. Empty optional on timeout or when
  // closed and drained.
  std::optional<T> pop(Micros timeout) {
    std::unique_lock lock(mu_);
    not_empty_.wait_for(lock, timeout, [&] { return !items_.empty() || closed_; });
    return take(lock);
  }

  std::optional<T> try_pop() {
    std::unique_lock lock(mu_);
    return take(lock);
  }

  void close() {
    std::lock_guard lock(mu_);
    closed_ = true;
    not_empty_.notify_all();
    not_full_.notify_all();
  }

  bool closed() const {
    std::lock_guard lock(mu_);
    return closed_;
  }

  std::size_t size() const {
    std::lock_guard lock(mu_);
    return items_.size();
  }

  std::size_t max_occupancy() const {
    std::lock_guard lock(mu_);
    return max_occupancy_;
  }

 private:
  std::optional<T> take(std::unique_lock<std::mutex>&) {
    if (items_.empty()) return std::nullopt;
    std::optional<T> out(std::move(items_.front()));
    items_.pop_front();
    not_full_.notify_one();
    return out;
  }

  const std::size_t capacity_;
  mutable std::mutex mu_;
  std::condition_variable not_empty_;
  std::condition_variable not_full_;
  std::deque<T> items_;
  std::size_t max_occupancy_ = 0;
  bool closed_ = false;
};

}  // namespace rivulet::flow
