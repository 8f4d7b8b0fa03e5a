#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "rivulet/client/emit.hpp"
#include "rivulet/client/report.hpp"
#include "rivulet/clock.hpp"
#include "rivulet/wire/transport.hpp"

namespace rivulet::client {

struct PullSourceConfig {
  std::string consumer_id = "consumer";
  std::string stream;
  std::vector<std::uint32_t> partitions;      // exclusive to this consumer
  std::vector<std::uint64_t> start_offsets;   // empty: all zero
  std::uint32_t max_bytes = 128 * 1024;
  Micros poll_timeout{1000};                  // wait after an empty reply
};

// Polling consumer: one synchronous PullRequest covering all assigned
// partitions per cycle, records emitted in offset order per partition.
class PullSource {
 public:
  PullSource(wire::ClientTransport& transport, PullSourceConfig cfg,
             const Clock& clock = SteadyClock::instance());

  // Runs until `duration` elapses, or — when `finished` is given — until it
  // returns true right before a cycle whose reply is empty (drained).
  ClientReport run(const RecordEmit& emit, Micros duration,
                   const std::function<bool()>& finished = {});

  std::uint64_t cursor(std::uint32_t partition) const;

 private:
  wire::ClientTransport& transport_;
  PullSourceConfig cfg_;
  const Clock& clock_;
  std::vector<std::uint64_t> cursors_;
};

}  // namespace rivulet::client
