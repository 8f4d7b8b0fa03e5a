#include "rivulet/bench/compare.hpp"

#include <iomanip>
#include <map>

namespace rivulet::bench {

Comparison compare_modes(const std::vector<ExperimentResult>& results) {
  std::map<std::string, std::vector<const ExperimentResult*>> by_key;
  for (const ExperimentResult& r : results) by_key[pair_key(r.spec)].push_back(&r);

  Comparison cmp;
  for (const auto& [key, group] : by_key) {
    const ExperimentResult* pull = nullptr;
    const ExperimentResult* push = nullptr;
    bool dup = false;
    for (const ExperimentResult* r : group) {
      auto& slot = r->spec.source_mode == SourceMode::Pull ? pull : push;
      if (slot) dup = true;
      slot = r;
    }
    if (!pull || !push || dup) {
      for (const ExperimentResult* r : group) cmp.unpaired.push_back(spec_id(r->spec));
      continue;
    }
    CompareRow row;
    row.key = key;
    row.pull_consumer_p50 = pull->consumer_p50;
    row.push_consumer_p50 = push->consumer_p50;
    row.consumer_ratio = pull->consumer_p50
                             ? static_cast<double>(push->consumer_p50) / pull->consumer_p50
                             : 0.0;
    row.pull_producer_p50 = pull->producer_p50;
    row.push_producer_p50 = push->producer_p50;
    row.pull_rpcs = pull->pull_rpcs;
    row.push_subscribe_rpcs = push->subscribe_rpcs;
    row.pull_polling_consumers = pull->polling_consumers;
    row.push_workers = push->push_workers_max;
    cmp.rows.push_back(std::move(row));
  }
  return cmp;
}

void write_comparison_csv(std::ostream& out, const Comparison& cmp) {
  out << "key,pull_consumer_p50,push_consumer_p50,consumer_ratio,"
         "pull_producer_p50,push_producer_p50,pull_rpcs,push_subscribe_rpcs,"
         "pull_polling_consumers,push_workers\n";
  for (const CompareRow& r : cmp.rows) {
    out << r.key << ',' << r.pull_consumer_p50 << ',' << r.push_consumer_p50 << ','
        << std::fixed << std::setprecision(4) << r.consumer_ratio << ','
        << r.pull_producer_p50 << ',' << r.push_producer_p50 << ',' << r.pull_rpcs << ','
        << r.push_subscribe_rpcs << ',' << r.pull_polling_consumers << ','
        << r.push_workers << '\n';
  }
}

void write_comparison_table(std::ostream& out, const Comparison& cmp) {
  out << std::left << std::setw(56) << "configuration" << std::right << std::setw(12)
      << "pull p50" << std::setw(12) << "push p50" << std::setw(8) << "ratio"
      << std::setw(11) << "pull rpcs" << std::setw(10) << "sub rpcs" << std::setw(9)
      << "pollers" << std::setw(9) << "pushers" << '\n';
  for (const CompareRow& r : cmp.rows) {
    out << std::left << std::setw(56) << r.key << std::right << std::setw(12)
        << r.pull_consumer_p50 << std::setw(12) << r.push_consumer_p50 << std::setw(8)
        << std::fixed << std::setprecision(2) << r.consumer_ratio << std::setw(11)
        << r.pull_rpcs << std::setw(10) << r.push_subscribe_rpcs << std::setw(9)
        << r.pull_polling_consumers << std::setw(9) << r.push_workers << '\n';
  }
  for (const std::string& id : cmp.unpaired) out << "unpaired: " << id << '\n';
}

}  // namespace rivulet::bench
