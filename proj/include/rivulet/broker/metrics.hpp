#pragma once

#include <array>
#include <atomic>
#include <chrono>
#include <cstdint>
#include <map>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

#include "rivulet/wire/envelope.hpp"

namespace rivulet::broker {

// Counters and gauges a running broker exposes; all methods are safe from
// any worker. Per-second series are bucketed against the metrics epoch.
class BrokerMetrics {
 public:
  BrokerMetrics() : start_(std::chrono::steady_clock::now()) {}

  void count_rpc(wire::MsgType type) {
    rpc_counts_[index(type)].fetch_add(1, std::memory_order_relaxed);
  }

  std::uint64_t rpcs(wire::MsgType type) const {
    return rpc_counts_[index(type)].load(std::memory_order_relaxed);
  }

  void add_appended(std::uint64_t records) { bump_series(appended_, records); }
  void add_pushed(std::uint64_t records) { bump_series(pushed_, records); }

  // (second index, records) pairs in time order.
  std::vector<std::pair<std::uint32_t, std::uint64_t>> appended_series() const {
    return snapshot_series(appended_);
  }
  std::vector<std::pair<std::uint32_t, std::uint64_t>> pushed_series() const {
    return snapshot_series(pushed_);
  }

  void push_worker_started() { push_workers_.fetch_add(1, std::memory_order_relaxed); }
  void push_worker_stopped() { push_workers_.fetch_sub(1, std::memory_order_relaxed); }
  std::uint32_t push_worker_count() const {
    return push_workers_.load(std::memory_order_relaxed);
  }

  void worker_entered() { active_workers_.fetch_add(1, std::memory_order_relaxed); }
  void worker_left() { active_workers_.fetch_sub(1, std::memory_order_relaxed); }
  std::uint32_t active_worker_count() const {
    return active_workers_.load(std::memory_order_relaxed);
  }

  std::uint32_t current_second() const {
    return static_cast<std::uint32_t>(std::chrono::duration_cast<std::chrono::seconds>(
                                          std::chrono::steady_clock::now() - start_)
                                          .count());
  }

 private:
  struct Series {
    mutable std::mutex mu;
    std::map<std::uint32_t, std::uint64_t> buckets;
  };

  static std::size_t index(wire::MsgType type) { return static_cast<std::size_t>(type); }

  void bump_series(Series& s, std::uint64_t n) {
    const std::uint32_t sec = current_second();
    std::lock_guard lock(s.mu);
    s.buckets[sec] += n;
  }

  static std::vector<std::pair<std::uint32_t, std::uint64_t>> snapshot_series(const Series& s) {
    std::lock_guard lock(s.mu);
    return {s.buckets.begin(), s.buckets.end()};
  }

  std::chrono::steady_clock::time_point start_;
  std::array<std::atomic<std::uint64_t>, 11> rpc_counts_{};
  Series appended_;
  Series pushed_;
  std::atomic<std::uint32_t> push_workers_{0};
  std::atomic<std::uint32_t> active_workers_{0};
};

// Background CSV emitter: one `second,msg_type,count` row per message type
// per elapsed second (delta counts), flushed as each second closes.
class MetricsCsvWriter {
 public:
  MetricsCsvWriter(const BrokerMetrics& metrics, std::string path);
  ~MetricsCsvWriter();

  void stop();

 private:
  void run();

  const BrokerMetrics& metrics_;
  std::string path_;
  std::thread thread_;
  std::atomic<bool> running_{true};
};

}  // namespace rivulet::broker
