#pragma once

#include <atomic>
#include <stdexcept>
#include <string>

#include "rivulet/wire/envelope.hpp"
#include "rivulet/wire/messages.hpp"

namespace rivulet::wire {

struct TransportError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// An ERROR reply surfaced to a caller expecting a typed response.
struct RpcError : std::runtime_error {
  std::uint32_t code;
  RpcError(std::uint32_t code_, const std::string& message)
      : std::runtime_error("rpc error " + std::to_string(code_) + ": " + message), code(code_) {}
};

// Process-unique connection ids, shared across all transports so a server
// handling several of them never sees a collision.
inline std::uint64_t next_connection_id() {
  static std::atomic<std::uint64_t> counter{1};
  return counter.fetch_add(1, std::memory_order_relaxed);
}

// Reply path back to one connection; implemented by each server transport.
// send() is safe from any thread and drops silently if the peer is gone.
class ReplySink {
 public:
  virtual ~ReplySink() = default;
  virtual void send(std::uint64_t conn, Envelope env) = 0;
};

// Server-side request surface. on_frame may be invoked from transport or
// caller threads concurrently; implementations route, they don't block.
class FrameHandler {
 public:
  virtual ~FrameHandler() = default;
  virtual void on_frame(ReplySink& sink, std::uint64_t conn, Envelope env) = 0;
  virtual void on_disconnect(std::uint64_t conn) { (void)conn; }
};

// Blocking request/response client. Safe for concurrent calls from multiple
// threads; correlation ids are assigned internally and never reused.
class ClientTransport {
 public:
  virtual ~ClientTransport() = default;
  virtual Envelope call(MsgType type, Bytes body) = 0;
};

// Performs a call and insists on the expected reply type. ERROR replies
// raise RpcError; anything else unexpected raises TransportError.
inline Bytes call_expecting(ClientTransport& client, MsgType request, Bytes body,
                            MsgType expected_reply) {
  Envelope reply = client.call(request, std::move(body));
  if (reply.type == MsgType::Error) {
    ErrorReply err = decode_error(reply.body);
    throw RpcError(err.code, err.message);
  }
  if (reply.type != expected_reply) {
    throw TransportError(std::string("unexpected reply ") + msg_type_name(reply.type) +
                         " to " + msg_type_name(request));
  }
  return std::move(reply.body);
}

}  // namespace rivulet::wire
