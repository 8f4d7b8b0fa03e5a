#pragma once

#include <cstdint>
#include <deque>
#include <stdexcept>
#include <string>
#include <vector>

#include "rivulet/chunk.hpp"

namespace rivulet {

inline constexpr std::size_t kDefaultSegmentBytes = 8u << 20;

struct OffsetMismatchError : std::logic_error {
  std::uint64_t expected;
  std::uint64_t got;
  OffsetMismatchError(std::uint64_t expected_, std::uint64_t got_)
      : std::logic_error("append offset mismatch: expected " + std::to_string(expected_) +
                         ", got " + std::to_string(got_)),
        expected(expected_),
        got(got_) {}
};

struct OutOfRangeError : std::out_of_range {
  explicit OutOfRangeError(const std::string& what) : std::out_of_range(what) {}
};

struct OversizedChunkError : std::length_error {
  explicit OversizedChunkError(const std::string& what) : std::length_error(what) {}
};

// A fixed-capacity run of chunks; sealed when the next chunk would not fit.
struct Segment {
  std::uint64_t base_offset = 0;
  std::size_t capacity_bytes = kDefaultSegmentBytes;
  std::size_t used_bytes = 0;
  std::vector<Chunk> chunks;

  bool fits(std::size_t payload_bytes) const {
    return used_bytes + payload_bytes <= capacity_bytes;
  }
};

struct ReadResult {
  std::vector<Chunk> chunks;
  std::uint64_t next_offset = 0;  // first offset NOT included
  std::size_t total_bytes = 0;    // sum of chunk payload sizes
};

// One partition of a stream: an ordered, contiguous, in-memory chunk log.
// Not thread-safe; callers serialize access (the broker wraps it in a lock).
class Partition {
 public:
  explicit Partition(std::uint32_t id, std::size_t segment_bytes = kDefaultSegmentBytes)
      : id_(id), segment_bytes_(segment_bytes) {}

  std::uint32_t id() const { return id_; }

  // Next offset to be assigned, i.e. one past the last stored record.
  std::uint64_t head_offset() const { return head_offset_; }

  std::size_t segment_count() const { return segments_.size(); }
  std::size_t chunk_count() const { return chunk_count_; }
  std::size_t byte_size() const { return byte_size_; }

  // Appends a sealed chunk. A base_offset of kAppendAtHead adopts the current
  // head; any other value must match it exactly. Returns the assigned base.
  // A payload larger than one whole segment is rejected.
  std::uint64_t append_chunk(Chunk chunk);

  // Greedy prefix read: whole chunks starting at the chunk containing
  // `offset`, until the next chunk would push total payload past max_bytes.
  // Always returns at least one chunk when records exist at `offset` (so a
  // single chunk larger than max_bytes still makes progress); an offset
  // interior to a chunk returns that whole chunk and the consumer skips
  // already-seen records locally. Reading at head yields an empty result.
  ReadResult read_from(std::uint64_t offset, std::size_t max_bytes) const;

 private:
  const std::vector<Chunk>* locate(std::uint64_t offset, std::size_t* index_out) const;

  std::uint32_t id_;
  std::size_t segment_bytes_;
  std::uint64_t head_offset_ = 0;
  std::size_t chunk_count_ = 0;
  std::size_t byte_size_ = 0;
  std::deque<Segment> segments_;
};

// A named stream: a fixed set of partitions created together.
class StreamTopic {
 public:
  StreamTopic(std::string name, std::uint32_t partition_count,
              std::size_t segment_bytes = kDefaultSegmentBytes);

  const std::string& name() const { return name_; }
  std::uint32_t partition_count() const { return static_cast<std::uint32_t>(partitions_.size()); }

  Partition& partition(std::uint32_t id);
  const Partition& partition(std::uint32_t id) const;

  std::uint64_t total_records() const;

 private:
  std::string name_;
  std::vector<Partition> partitions_;
};

}  // namespace rivulet
