#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "rivulet/client/emit.hpp"
#include "rivulet/client/report.hpp"
#include "rivulet/clock.hpp"
#include "rivulet/flow/operators.hpp"
#include "rivulet/flow/throughput.hpp"

namespace rivulet::flow {

enum class Workload { Count, Filter, WordCount, WindowedWordCount };

Workload workload_from_name(std::string_view name);
std::string_view workload_name(Workload w);

struct DataflowConfig {
  Workload workload = Workload::Count;
  std::uint32_t source_parallelism = 1;  // Nc source tasks
  std::uint32_t map_parallelism = 1;     // Nmap map tasks
  bool chained = true;                   // fuse source and map in one worker
  std::size_t queue_capacity = 1024;     // records, per unchained map task
  std::string filter_pattern;
  WindowSpec window{};                   // windowed workload only
  std::int64_t warmup_seconds = 2;
  bool record_arrivals = false;  // keep per-slide token counts (oracle input)
  const Clock* clock = nullptr;  // defaults to the steady clock
};

// Fig-style fusion heuristic: the source -> map edge is unkeyed, so it can
// chain whenever the two stages have matching parallelism.
inline bool default_chaining(std::uint32_t source_parallelism, std::uint32_t map_parallelism) {
  return source_parallelism == map_parallelism;
}

// One source task: calls emit for every record it receives and returns its
// client report when its share of the stream is done. The caller binds the
// underlying pull source or push member, duration and stop condition.
using SourceTask = std::function<client::ClientReport(const client::RecordEmit& emit)>;

struct DataflowResult {
  std::vector<client::ClientReport> source_reports;
  std::uint64_t source_records = 0;
  std::uint64_t map_input = 0;   // records entering the map stage
  std::uint64_t map_output = 0;  // records passed, or pairs aggregated
  std::map<std::string, std::int64_t> word_totals;
  std::vector<WindowEmission> window_emissions;  // sorted by (tick, key)
  std::map<std::int64_t, std::map<std::string, std::int64_t>> arrival_buckets;
  std::shared_ptr<ThroughputCollector> metrics;
  std::uint64_t p50_source = 0;
  std::uint64_t p50_map = 0;
  std::size_t max_queue_occupancy = 0;
  bool aborted = false;
  std::string error;
};

// Wires Nc sources to Nmap map tasks. Unchained, records cross a bounded
// queue per map task; chained, the source thread runs its map task inline.
// Tokenized pairs always cross the keyed exchange to the task owning the
// word, so per-key totals are single-writer regardless of layout.
class Dataflow {
 public:
  Dataflow(DataflowConfig cfg, std::vector<SourceTask> sources);

  DataflowResult run();

 private:
  struct Mapper;

  DataflowConfig cfg_;
  std::vector<SourceTask> sources_;
};

}  // namespace rivulet::flow
