#include "rivulet/partition.hpp"

namespace rivulet {

std::uint64_t Partition::append_chunk(Chunk chunk) {
  const std::size_t payload_bytes = chunk.byte_length();
  if (payload_bytes > segment_bytes_) {
    throw OversizedChunkError("chunk payload of " + std::to_string(payload_bytes) +
                              " bytes exceeds segment capacity " +
                              std::to_string(segment_bytes_));
  }
  if (chunk.base_offset == kAppendAtHead) {
    chunk.base_offset = head_offset_;
  } else if (chunk.base_offset != head_offset_) {
    throw OffsetMismatchError(head_offset_, chunk.base_offset);
  }
  if (segments_.empty() || !segments_.back().fits(payload_bytes)) {
    Segment seg;
    seg.base_offset = head_offset_;
    seg.capacity_bytes = segment_bytes_;
    segments_.push_back(std::move(seg));
  }
  Segment& seg = segments_.back();
  seg.used_bytes += payload_bytes;
  head_offset_ += chunk.record_count;
  chunk_count_ += 1;
  byte_size_ += payload_bytes;
  const std::uint64_t assigned = chunk.base_offset;
  seg.chunks.push_back(std::move(chunk));
  return assigned;
}

const std::vector<Chunk>* Partition::locate(std::uint64_t offset, std::size_t* index_out) const {
  // Find the segment containing `offset`, then binary-search its chunks.
  std::size_t lo = 0;
  std::size_t hi = segments_.size();
  while (lo < hi) {
    const std::size_t mid = (lo + hi) / 2;
    if (segments_[mid].base_offset <= offset) {
      lo = mid + 1;
    } else {
      hi = mid;
    }
  }
  if (lo == 0) return nullptr;
  const Segment& seg = segments_[lo - 1];
  const std::vector<Chunk>& chunks = seg.chunks;
  std::size_t clo = 0;
  std::size_t chi = chunks.size();
  while (clo < chi) {
    const std::size_t mid = (clo + chi) / 2;
    if (chunks[mid].base_offset <= offset) {
      clo = mid + 1;
    } else {
      chi = mid;
    }
  }
  if (clo == 0) return nullptr;
  // offset may be interior to this chunk; the whole chunk is returned and the
  // consumer skips records below offset locally.
  *index_out = clo - 1;
  return &chunks;
}

ReadResult Partition::read_from(std::uint64_t offset, std::size_t max_bytes) const {
  ReadResult out;
  out.next_offset = offset;
  if (offset > head_offset_) {
    throw OutOfRangeError("read offset " + std::to_string(offset) + " is past head " +
                          std::to_string(head_offset_));
  }
  if (offset == head_offset_) return out;  // caught up

  std::size_t index = 0;
  const std::vector<Chunk>* chunks = locate(offset, &index);
  if (chunks == nullptr) {
    throw OutOfRangeError("read offset " + std::to_string(offset) + " precedes stored data");
  }
  // Walk forward across segment boundaries, taking whole chunks greedily.
  std::size_t seg_index = 0;
  while (seg_index < segments_.size() && &segments_[seg_index].chunks != chunks) ++seg_index;
  while (seg_index < segments_.size()) {
    const std::vector<Chunk>& run = segments_[seg_index].chunks;
    for (; index < run.size(); ++index) {
      const Chunk& c = run[index];
      const std::size_t sz = c.byte_length();
      if (!out.chunks.empty() && out.total_bytes + sz > max_bytes) {
        return out;
      }
      out.chunks.push_back(c);
      out.total_bytes += sz;
      out.next_offset = c.end_offset();
    }
    ++seg_index;
    index = 0;
  }
  return out;
}

StreamTopic::StreamTopic(std::string name, std::uint32_t partition_count,
                         std::size_t segment_bytes)
    : name_(std::move(name)) {
  partitions_.reserve(partition_count);
  for (std::uint32_t i = 0; i < partition_count; ++i) {
    partitions_.emplace_back(i, segment_bytes);
  }
}

Partition& StreamTopic::partition(std::uint32_t id) {
  if (id >= partitions_.size()) {
    throw OutOfRangeError("partition " + std::to_string(id) + " out of range for stream " + name_);
  }
  return partitions_[id];
}

const Partition& StreamTopic::partition(std::uint32_t id) const {
  if (id >= partitions_.size()) {
    throw OutOfRangeError("partition " + std::to_string(id) + " out of range for stream " + name_);
  }
  return partitions_[id];
}

std::uint64_t StreamTopic::total_records() const {
  std::uint64_t total = 0;
  for (const Partition& p : partitions_) total += p.head_offset();
  return total;
}

}  // namespace rivulet
