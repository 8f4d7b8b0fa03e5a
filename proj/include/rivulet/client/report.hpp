#pragma once

#include <cstdint>
#include <map>
#include <mutex>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "rivulet/clock.hpp"

namespace rivulet::client {

// One second of client activity, relative to the start of the run.
struct SecondCount {
  std::int64_t second = 0;
  std::uint64_t records = 0;
  std::uint64_t rpcs = 0;
};

struct ClientReport {
  std::string client_id;
  std::vector<SecondCount> seconds;
  std::uint64_t total_records = 0;
  std::uint64_t total_rpcs = 0;
  bool aborted = false;
  std::string error;
};

// Buckets counts into whole seconds since construction.
class RateRecorder {
 public:
  explicit RateRecorder(const Clock& clock) : clock_(clock), start_(clock.now()) {}

  void add(std::uint64_t records, std::uint64_t rpcs) {
    const std::int64_t sec = (clock_.now() - start_).count() / 1'000'000;
    std::lock_guard lock(mu_);
    auto& bucket = buckets_[sec];
    bucket.first += records;
    bucket.second += rpcs;
  }

  void fill_report(ClientReport& report) const {
    std::lock_guard lock(mu_);
    report.seconds.clear();
    report.total_records = 0;
    report.total_rpcs = 0;
    for (const auto& [sec, counts] : buckets_) {
      report.seconds.push_back({sec, counts.first, counts.second});
      report.total_records += counts.first;
      report.total_rpcs += counts.second;
    }
  }

 private:
  const Clock& clock_;
  Micros start_;
  mutable std::mutex mu_;
  std::map<std::int64_t, std::pair<std::uint64_t, std::uint64_t>> buckets_;
};

inline void write_reports_csv(std::ostream& out, std::span<const ClientReport> reports) {
  out << "second,client_id,records,rpcs\n";
  for (const ClientReport& r : reports) {
    for (const SecondCount& s : r.seconds) {
      out << s.second << ',' << r.client_id << ',' << s.records << ',' << s.rpcs << '\n';
    }
  }
}

}  // namespace rivulet::client
