#pragma once

#include <ostream>
#include <string>
#include <vector>

#include "rivulet/bench/experiment.hpp"

namespace rivulet::bench {

// One pull/push pair of runs over an otherwise identical spec.
struct CompareRow {
  std::string key;
  std::uint64_t pull_consumer_p50 = 0;
  std::uint64_t push_consumer_p50 = 0;
  double consumer_ratio = 0;  // push / pull
  std::uint64_t pull_producer_p50 = 0;
  std::uint64_t push_producer_p50 = 0;
  std::uint64_t pull_rpcs = 0;           // Pull RPCs issued by the pull run
  std::uint64_t push_subscribe_rpcs = 0; // SubscribePush RPCs in the push run
  std::uint32_t pull_polling_consumers = 0;
  std::uint32_t push_workers = 0;
};

struct Comparison {
  std::vector<CompareRow> rows;            // sorted by key
  std::vector<std::string> unpaired;       // spec ids lacking a partner
};

// Pairs results whose specs differ only in source mode. A key with anything
// other than exactly one pull and one push run lands in `unpaired`.
Comparison compare_modes(const std::vector<ExperimentResult>& results);

void write_comparison_csv(std::ostream& out, const Comparison& cmp);
void write_comparison_table(std::ostream& out, const Comparison& cmp);

}  // namespace rivulet::bench
