#include "rivulet/wire/envelope.hpp"

namespace rivulet::wire {

const char* msg_type_name(MsgType t) {
  switch (t) {
    case MsgType::Append: return "APPEND";
    case MsgType::AppendAck: return "APPEND_ACK";
    case MsgType::Pull: return "PULL";
    case MsgType::PullReply: return "PULL_REPLY";
    case MsgType::SubscribePush: return "SUBSCRIBE_PUSH";
    case MsgType::SubscribeAck: return "SUBSCRIBE_ACK";
    case MsgType::ConsumedNotify: return "CONSUMED_NOTIFY";
    case MsgType::Replicate: return "REPLICATE";
    case MsgType::ReplicateAck: return "REPLICATE_ACK";
    case MsgType::Error: return "ERROR";
  }
  return "UNKNOWN";
}

bool is_valid_msg_type(std::uint8_t raw) {
  return raw >= static_cast<std::uint8_t>(MsgType::Append) &&
         raw <= static_cast<std::uint8_t>(MsgType::Error);
}

Bytes encode_envelope(const Envelope& env) {
  ByteWriter w(kEnvelopeHeaderBytes + env.body.size());
  w.put_u32(static_cast<std::uint32_t>(kEnvelopeHeaderBytes + env.body.size()));
  w.put_u8(static_cast<std::uint8_t>(env.type));
  w.put_u64(env.correlation_id);
  w.put_bytes(env.body);
  return w.take();
}

void FrameDecoder::feed(BytesView data) {
  // Reclaim consumed prefix before growing, once it dominates the buffer.
  if (pos_ > 4096 && pos_ * 2 > buf_.size()) {
    buf_.erase(buf_.begin(), buf_.begin() + static_cast<std::ptrdiff_t>(pos_));
    pos_ = 0;
  }
  buf_.insert(buf_.end(), data.begin(), data.end());
}

std::optional<Envelope> FrameDecoder::next() {
  if (buffered() < kEnvelopeHeaderBytes) return std::nullopt;
  ByteReader header(BytesView(buf_).subspan(pos_, kEnvelopeHeaderBytes));
  const std::uint32_t length = header.u32();
  const std::uint8_t raw_type = header.u8();
  const std::uint64_t correlation = header.u64();
  if (length < kEnvelopeHeaderBytes || length > kMaxFrameBytes) {
    throw DecodeError("bad frame length " + std::to_string(length));
  }
  if (!is_valid_msg_type(raw_type)) {
    throw DecodeError("unknown message type " + std::to_string(raw_type));
  }
  if (buffered() < length) return std::nullopt;

  Envelope env;
  env.type = static_cast<MsgType>(raw_type);
  env.correlation_id = correlation;
  const auto body_begin = buf_.begin() + static_cast<std::ptrdiff_t>(pos_ + kEnvelopeHeaderBytes);
  env.body.assign(body_begin, body_begin + static_cast<std::ptrdiff_t>(length - kEnvelopeHeaderBytes));
  pos_ += length;
  return env;
}

}  // namespace rivulet::wire
