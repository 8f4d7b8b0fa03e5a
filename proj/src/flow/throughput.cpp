#include "rivulet/flow/throughput.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace rivulet::flow {

void ThroughputCollector::add(const std::string& stage, std::uint32_t task_id,
                              std::int64_t second, std::uint64_t records) {
  std::lock_guard lock(mu_);
  cells_[{stage, task_id, second}] += records;
}

std::vector<ThroughputSample> ThroughputCollector::samples() const {
  std::lock_guard lock(mu_);
  std::vector<ThroughputSample> out;
  out.reserve(cells_.size());
  for (const auto& [key, records] : cells_) {
    out.push_back({std::get<2>(key), std::get<1>(key), std::get<0>(key), records});
  }
  return out;
}

std::vector<std::pair<std::int64_t, std::uint64_t>> ThroughputCollector::aggregate(
    const std::string& stage) const {
  std::lock_guard lock(mu_);
  std::map<std::int64_t, std::uint64_t> by_second;
  for (const auto& [key, records] : cells_) {
    if (std::get<0>(key) == stage) by_second[std::get<2>(key)] += records;
  }
  return {by_second.begin(), by_second.end()};
}

std::uint64_t ThroughputCollector::total(const std::string& stage) const {
  std::lock_guard lock(mu_);
  std::uint64_t sum = 0;
  for (const auto& [key, records] : cells_) {
    if (std::get<0>(key) == stage) sum += records;
  }
  return sum;
}

void ThroughputCollector::write_csv(std::ostream& out) const {
  out << "second,task_id,stage,records\n";
  for (const ThroughputSample& s : samples()) {
    out << s.second << ',' << s.task_id << ',' << s.stage << ',' << s.records << '\n';
  }
}

std::uint64_t nearest_rank(std::vector<std::uint64_t> values, double percentile) {
  if (values.empty()) throw std::invalid_argument("percentile of empty set");
  if (percentile <= 0.0 || percentile > 100.0) throw std::invalid_argument("bad percentile");
  std::sort(values.begin(), values.end());
  const std::size_t rank =
      static_cast<std::size_t>(std::ceil(percentile / 100.0 * static_cast<double>(values.size())));
  return values[rank - 1];
}

std::uint64_t p50_aggregate(const ThroughputCollector& collector, const std::string& stage,
                            std::int64_t warmup_seconds) {
  const auto series = collector.aggregate(stage);
  if (series.empty()) return 0;
  const std::int64_t last = series.back().first;
  std::vector<std::uint64_t> steady;
  for (const auto& [second, records] : series) {
    if (second >= warmup_seconds && second < last) steady.push_back(records);
  }
  if (steady.empty()) {
    for (const auto& [second, records] : series) steady.push_back(records);
  }
  return nearest_rank(std::move(steady), 50.0);
}

}  // namespace rivulet::flow
