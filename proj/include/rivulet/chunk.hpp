#pragma once

#include <memory>

#include "rivulet/bytes.hpp"
#include "rivulet/record.hpp"

namespace rivulet {

// Append-at-head sentinel: the broker assigns the real base offset on append.
inline constexpr std::uint64_t kAppendAtHead = ~0ull;

// Wire frame: [partition_id: u32][base_offset: u64][record_count: u32]
//             [byte_length: u32][payload].
inline constexpr std::size_t kChunkHeaderBytes = 20;

// A producer-sealed batch of serialized records for one partition. The
// payload is immutable once sealed, so copies of a Chunk share it.
struct Chunk {
  std::uint32_t partition_id = 0;
  std::uint64_t base_offset = 0;
  std::uint32_t record_count = 0;
  std::shared_ptr<const Bytes> payload;

  std::uint32_t byte_length() const {
    return payload ? static_cast<std::uint32_t>(payload->size()) : 0;
  }

  std::uint64_t end_offset() const { return base_offset + record_count; }

  BytesView payload_view() const {
    return payload ? BytesView(*payload) : BytesView();
  }

  static Chunk make(std::uint32_t partition, std::uint64_t base, std::uint32_t count,
                    Bytes payload_bytes) {
    return {partition, base, count, std::make_shared<const Bytes>(std::move(payload_bytes))};
  }

  // Invokes fn(offset, record) for every record, offsets base..base+count.
  template <typename Fn>
  void for_each(Fn&& fn) const {
    std::uint64_t off = base_offset;
    for_each_record(payload_view(), [&](std::size_t, const RecordView& rec) { fn(off++, rec); });
  }

  // Full payload validation: decoding yields exactly record_count records.
  bool payload_matches_count() const;

  bool same_bytes(const Chunk& other) const;
};

void encode_chunk_into(ByteWriter& w, const Chunk& c);
Chunk decode_chunk(ByteReader& r);

}  // namespace rivulet
