#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "rivulet/clock.hpp"
#include "rivulet/flow/operators.hpp"

namespace rivulet::bench {

enum class SourceMode { Pull, Push };

SourceMode source_mode_from_name(std::string_view name);
std::string_view source_mode_name(SourceMode mode);

enum class ProcessMode { Single, Multi };

// One benchmark configuration. Serialized as a flat key=value file, one
// pair per line, '#' comments.
struct ExperimentSpec {
  std::string name = "experiment";
  std::string workload = "count";  // count|filter|wordcount|windowed_wordcount
  SourceMode source_mode = SourceMode::Pull;
  std::uint32_t np = 1;   // producers
  std::uint32_t nc = 1;   // consumer (source) tasks
  std::uint32_t nmap = 1; // map tasks
  std::uint32_t ns = 1;   // partitions
  std::uint32_t nbc = 1;  // broker worker lanes
  std::uint32_t nfs = 16; // processing slots per consumer process (task cap)
  std::size_t cs_producer = 16 * 1024;
  std::size_t cs_consumer = 128 * 1024;
  std::size_t recs = 100;  // record value bytes (synthetic sources)
  std::uint32_t replication = 1;
  std::uint32_t duration_seconds = 15;
  std::string corpus_path;       // wordcount workloads
  std::uint64_t seed = 1;

  // Desk-scale controls.
  std::uint64_t record_limit = 0;      // 0: duration-bound; capped at 5M
  std::uint64_t pace_per_sec = 0;      // 0: unpaced
  Micros poll_timeout{1000};
  Micros seal_timeout{1000};
  Micros service_floor{0};
  std::uint32_t objects_per_consumer = 4;
  std::size_t segment_bytes = 8 * 1024 * 1024;
  std::string filter_pattern = "the";
  flow::WindowSpec window{flow::WindowKind::Time, 5'000'000, 1'000'000};
  int chained = -1;  // -1 auto, 0 off, 1 on
  bool record_arrivals = false;
  std::int64_t warmup_seconds = 2;
  ProcessMode process_mode = ProcessMode::Single;
};

inline constexpr std::uint64_t kRecordCap = 5'000'000;
inline constexpr const char* kBenchStream = "bench";

// Parses the flat key=value format; unknown keys are errors.
ExperimentSpec parse_spec(const std::string& text);
ExperimentSpec load_spec_file(const std::string& path);
std::string serialize_spec(const ExperimentSpec& spec);

// Throws std::invalid_argument when constraints are violated.
void validate_spec(const ExperimentSpec& spec);

// Even contiguous split of `total` partitions; the remainder goes to the
// lowest task ids.
std::vector<std::vector<std::uint32_t>> assign_partitions(std::uint32_t total,
                                                          std::uint32_t tasks);

// Even share of `total` for worker `i` of `n`, remainder to the lowest ids.
std::uint64_t share_of(std::uint64_t total, std::uint32_t n, std::uint32_t i);

struct ProducerPlan {
  std::vector<std::uint32_t> partitions;
  std::uint64_t record_limit = 0;  // 0: unlimited
  std::uint64_t pace_per_sec = 0;  // 0: unpaced
  std::uint64_t seed = 0;
};

// Producers own disjoint contiguous partition groups when they fit; with
// more producers than partitions they share round-robin (the broker assigns
// offsets at the head, so interleaving stays gapless).
std::vector<ProducerPlan> plan_producers(const ExperimentSpec& spec);

// Identity of a spec with/without the source mode, for pairing runs.
std::string spec_id(const ExperimentSpec& spec);
std::string pair_key(const ExperimentSpec& spec);

bool workload_needs_corpus(const std::string& workload);

}  // namespace rivulet::bench
