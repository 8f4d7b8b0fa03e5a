#pragma once

#include <stdexcept>

#include "rivulet/bytes.hpp"

namespace rivulet {

// A record is an opaque (key, value) pair. Keys may be empty, values may not.
// Framing: [key_len: u32 LE][key][value_len: u32 LE][value].
struct RecordView {
  BytesView key;
  BytesView value;
};

struct InvalidRecordError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

inline constexpr std::size_t kRecordFramingBytes = 8;

inline std::size_t encoded_record_size(std::size_t key_len, std::size_t value_len) {
  return kRecordFramingBytes + key_len + value_len;
}

void encode_record_into(ByteWriter& w, BytesView key, BytesView value);
Bytes encode_record(BytesView key, BytesView value);

// Reads one framed record; the views alias the reader's underlying buffer.
RecordView decode_record(ByteReader& r);

// Decodes a buffer of concatenated records, invoking fn(index, record).
// Returns the number of records decoded.
template <typename Fn>
std::size_t for_each_record(BytesView payload, Fn&& fn) {
  ByteReader r(payload);
  std::size_t i = 0;
  while (!r.done()) {
    fn(i, decode_record(r));
    ++i;
  }
  return i;
}

std::size_t count_records(BytesView payload);

}  // namespace rivulet
