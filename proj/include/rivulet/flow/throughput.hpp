#pragma once

#include <cstdint>
#include <map>
#include <mutex>
#include <ostream>
#include <string>
#include <vector>

namespace rivulet::flow {

struct ThroughputSample {
  std::int64_t second = 0;
  std::uint32_t task_id = 0;
  std::string stage;
  std::uint64_t records = 0;
};

// Per-(stage, task, second) record counts for every pipeline stage; one
// sample per cell.
class ThroughputCollector {
 public:
  void add(const std::string& stage, std::uint32_t task_id, std::int64_t second,
           std::uint64_t records);

  std::vector<ThroughputSample> samples() const;

  // Sum across tasks for one stage, per second, as (second, records) pairs.
  std::vector<std::pair<std::int64_t, std::uint64_t>> aggregate(const std::string& stage) const;

  std::uint64_t total(const std::string& stage) const;

  void write_csv(std::ostream& out) const;  // second,task_id,stage,records

 private:
  mutable std::mutex mu_;
  std::map<std::tuple<std::string, std::uint32_t, std::int64_t>, std::uint64_t> cells_;
};

// Nearest-rank percentile; values need not be sorted.
std::uint64_t nearest_rank(std::vector<std::uint64_t> values, double percentile);

// p50 of the per-second aggregate for a stage, skipping the first
// `warmup_seconds` and the final (usually partial) second. Falls back to
// all samples when trimming would empty the series.
std::uint64_t p50_aggregate(const ThroughputCollector& collector, const std::string& stage,
                            std::int64_t warmup_seconds);

}  // namespace rivulet::flow
