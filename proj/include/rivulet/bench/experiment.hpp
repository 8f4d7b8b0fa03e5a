#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "rivulet/bench/spec.hpp"
#include "rivulet/client/report.hpp"
#include "rivulet/flow/dataflow.hpp"
#include "rivulet/flow/throughput.hpp"

namespace rivulet::bench {

struct ExperimentResult {
  ExperimentSpec spec;
  bool ok = false;
  std::string error;

  // Rates (records/second, p50 of the per-second aggregate with warmup and
  // the trailing partial second trimmed).
  std::uint64_t producer_p50 = 0;
  std::uint64_t consumer_p50 = 0;
  std::uint64_t produced_records = 0;
  std::uint64_t consumed_records = 0;
  double wall_seconds = 0;

  // Delivery: emitted[p] must reach heads[p] with zero violations when the
  // run drains (a violation is any emit whose offset is not the next one).
  std::vector<std::uint64_t> heads;
  std::vector<std::uint64_t> emitted;
  std::uint64_t delivery_violations = 0;

  // Accounting.
  std::map<std::string, std::uint64_t> rpcs;  // message name -> broker count
  std::uint64_t pull_rpcs = 0;
  std::uint64_t subscribe_rpcs = 0;
  std::uint32_t polling_consumers = 0;  // tasks driving the stream by polling
  std::uint32_t push_workers_max = 0;   // peak broker push-worker gauge

  // Workload output.
  std::map<std::string, std::int64_t> word_totals;
  std::vector<flow::WindowEmission> window_emissions;
  std::map<std::int64_t, std::map<std::string, std::int64_t>> arrival_buckets;
  std::uint64_t map_output = 0;
  std::size_t max_queue_occupancy = 0;

  std::vector<client::ClientReport> producer_reports;
  std::vector<client::ClientReport> source_reports;
  std::shared_ptr<flow::ThroughputCollector> stage_metrics;
};

struct RunOptions {
  std::string out_dir;  // when set, CSVs and a JSON summary land here
  Micros sample_interval{20'000};
  Micros drain_grace{30'000'000};  // extra consumer time after the producers stop
};

// Runs one spec in-process over the loopback transport: broker (plus backup
// when replication = 2), np producers, and the nc-source dataflow in the
// requested mode. Never throws; failures land in result.error.
ExperimentResult run_experiment(const ExperimentSpec& spec, const RunOptions& opts = {});

// p50 of per-second record sums across reports, trimming warmup seconds and
// the final (usually partial) second; falls back to all seconds if trimming
// would empty the series.
std::uint64_t report_p50(const std::vector<client::ClientReport>& reports,
                         std::int64_t warmup_seconds);

void write_result_files(const ExperimentResult& result, const std::string& dir);
std::string result_json(const ExperimentResult& result);

}  // namespace rivulet::bench
