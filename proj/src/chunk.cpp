#include "rivulet/chunk.hpp"

namespace rivulet {

bool Chunk::payload_matches_count() const {
  try {
    return count_records(payload_view()) == record_count;
  } catch (const DecodeError&) {
    return false;
  }
}

bool Chunk::same_bytes(const Chunk& other) const {
  if (partition_id != other.partition_id || base_offset != other.base_offset ||
      record_count != other.record_count) {
    return false;
  }
  const BytesView a = payload_view();
  const BytesView b = other.payload_view();
  return a.size() == b.size() && std::equal(a.begin(), a.end(), b.begin());
}

void encode_chunk_into(ByteWriter& w, const Chunk& c) {
  w.put_u32(c.partition_id);
  w.put_u64(c.base_offset);
  w.put_u32(c.record_count);
  w.put_u32(c.byte_length());
  w.put_bytes(c.payload_view());
}

Chunk decode_chunk(ByteReader& r) {
  Chunk c;
  c.partition_id = r.u32();
  c.base_offset = r.u64();
  c.record_count = r.u32();
  const std::uint32_t len = r.u32();
  const BytesView payload = r.bytes(len);
  c.payload = std::make_shared<const Bytes>(payload.begin(), payload.end());
  return c;
}

}  // namespace rivulet
