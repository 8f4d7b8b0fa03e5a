#pragma once

#include <memory>
#include <mutex>
#include <unordered_map>

#include "rivulet/wire/transport.hpp"

namespace rivulet::wire {

// In-process transport: a call() dispatches the frame to the handler on the
// caller's thread and blocks until some thread replies through the sink.
// Deterministic (no sockets, no partial reads) and fast, for tests and
// co-located deployments. Clients must not outlive the hub.
class LoopbackHub final : public ReplySink {
 public:
  explicit LoopbackHub(FrameHandler& handler) : handler_(handler) {}

  // Opens a connection with a fresh process-unique id.
  std::unique_ptr<ClientTransport> connect();

  void send(std::uint64_t conn, Envelope env) override;

 private:
  struct Conn;
  class Client;

  void disconnect(std::uint64_t conn);

  FrameHandler& handler_;
  std::mutex mu_;
  std::unordered_map<std::uint64_t, std::shared_ptr<Conn>> conns_;
};

}  // namespace rivulet::wire
