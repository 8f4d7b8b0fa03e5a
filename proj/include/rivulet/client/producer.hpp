#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "rivulet/chunk.hpp"
#include "rivulet/client/record_source.hpp"
#include "rivulet/client/report.hpp"
#include "rivulet/clock.hpp"
#include "rivulet/wire/transport.hpp"

namespace rivulet::client {

enum class KeyMode { None, Random };

struct ProducerConfig {
  std::string producer_id = "producer";
  std::string stream;
  std::vector<std::uint32_t> partitions;  // filled round-robin, record by record
  std::size_t chunk_size = 16 * 1024;
  std::size_t record_size = 100;  // advisory; must fit chunk_size with framing
  Micros seal_timeout{1000};
  KeyMode key_mode = KeyMode::None;
  // Pin explicit offsets instead of at-head appends; enables the stale-offset
  // re-sync path when several pinned producers share a partition.
  bool pin_offsets = false;
};

// Accumulates records into one open chunk per assigned partition, seals a
// chunk when the next record would overflow it or when seal_timeout has
// passed since its first record, and ships sealed chunks in synchronous
// appends carrying at most one chunk per partition.
class Producer {
 public:
  Producer(wire::ClientTransport& transport, ProducerConfig cfg,
           const Clock& clock = SteadyClock::instance());

  ClientReport run(RecordSource& source, Micros duration);

 private:
  struct OpenChunk {
    ByteWriter payload;
    std::uint32_t record_count = 0;
    Micros first_record{0};
    std::shared_ptr<const Bytes> sealed;  // staged, waiting for batch mates
    std::uint32_t sealed_count = 0;
  };

  void seal(std::size_t slot);
  bool flush(RateRecorder& recorder);             // sends staged chunks; false on abort
  bool sync_offsets(RateRecorder& recorder);      // pinned mode: re-read heads
  void fail(const std::string& message);

  wire::ClientTransport& transport_;
  ProducerConfig cfg_;
  const Clock& clock_;
  std::vector<OpenChunk> open_;
  std::vector<std::uint64_t> next_offset_;
  std::uint64_t key_rng_;
  ClientReport report_;
};

}  // namespace rivulet::client
