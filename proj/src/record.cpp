#include "rivulet/record.hpp"

namespace rivulet {

void encode_record_into(ByteWriter& w, BytesView key, BytesView value) {
  if (value.empty()) throw InvalidRecordError("record value must not be empty");
  w.put_u32(static_cast<std::uint32_t>(key.size()));
  w.put_bytes(key);
  w.put_u32(static_cast<std::uint32_t>(value.size()));
  w.put_bytes(value);
}

Bytes encode_record(BytesView key, BytesView value) {
  ByteWriter w(encoded_record_size(key.size(), value.size()));
  encode_record_into(w, key, value);
  return w.take();
}

RecordView decode_record(ByteReader& r) {
  std::uint32_t key_len = r.u32();
  BytesView key = r.bytes(key_len);
  std::uint32_t value_len = r.u32();
  if (value_len == 0) throw DecodeError("record value must not be empty");
  BytesView value = r.bytes(value_len);
  return {key, value};
}

std::size_t count_records(BytesView payload) {
  return for_each_record(payload, [](std::size_t, const RecordView&) {});
}

}  // namespace rivulet
