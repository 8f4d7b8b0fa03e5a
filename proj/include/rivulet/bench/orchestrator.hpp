#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "rivulet/bench/spec.hpp"

namespace rivulet::bench {

// Entry points for the process roles the orchestrator spawns. Each writes a
// summary.json into its out_dir and returns a process exit code.

// Standalone broker (backup role): binds `host` on an ephemeral port, writes
// the bound port into `port_file`, serves until SIGTERM or `run_seconds`.
int run_broker_host(const ExperimentSpec& spec, const std::string& host,
                    const std::string& port_file, std::uint32_t run_seconds);

// Consumer host: embeds the broker (TCP for producers, loopback for its own
// sources), runs the dataflow, exits once drained (record_limit specs) or at
// duration plus grace.
int run_consumer_host(const ExperimentSpec& spec, const std::string& host,
                      const std::string& port_file, const std::string& backup_addr,
                      const std::string& out_dir);

// Producer client: np producer threads against the broker at `addr`.
int run_producer_client(const ExperimentSpec& spec, const std::string& addr,
                        const std::string& out_dir);

struct MultiRunResult {
  bool ok = false;
  std::string error;
  std::uint64_t produced = 0;
  std::uint64_t consumed = 0;
  std::uint64_t violations = 0;
  std::string out_dir;
};

// Runs one spec across separate broker/producer/consumer processes, wiring
// them through port files under out_dir. `bin_dir` holds the tool binaries.
MultiRunResult run_experiment_multi(const ExperimentSpec& spec, const std::string& out_dir,
                                    const std::string& bin_dir);

// host:port -> (host, port); throws on malformed input.
std::pair<std::string, std::uint16_t> split_addr(const std::string& addr);

}  // namespace rivulet::bench
