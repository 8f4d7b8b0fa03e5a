#pragma once

#include <cstdint>
#include <optional>

#include "rivulet/bytes.hpp"

namespace rivulet::wire {

enum class MsgType : std::uint8_t {
  Append = 1,
  AppendAck = 2,
  Pull = 3,
  PullReply = 4,
  SubscribePush = 5,
  SubscribeAck = 6,
  ConsumedNotify = 7,
  Replicate = 8,
  ReplicateAck = 9,
  Error = 10,
};

const char* msg_type_name(MsgType t);
bool is_valid_msg_type(std::uint8_t raw);

// Frame: [length: u32 LE][msg_type: u8][correlation_id: u64 LE][body];
// length covers the whole frame including this 13-byte header.
inline constexpr std::size_t kEnvelopeHeaderBytes = 13;
inline constexpr std::size_t kMaxFrameBytes = 64u << 20;

struct Envelope {
  MsgType type{};
  std::uint64_t correlation_id = 0;
  Bytes body;
};

Bytes encode_envelope(const Envelope& env);

// Incremental frame splitter: byte-stream in, whole envelopes out. The
// decoded sequence is independent of how the input was segmented.
class FrameDecoder {
 public:
  void feed(BytesView data);

  // Returns the next complete envelope, or nullopt until more bytes arrive.
  // Throws DecodeError on a malformed header; the stream is then poisoned.
  std::optional<Envelope> next();

  std::size_t buffered() const { return buf_.size() - pos_; }

 private:
  Bytes buf_;
  std::size_t pos_ = 0;
};

}  // namespace rivulet::wire
