#pragma once

#include <cstdint>
#include <memory>
#include <mutex>
#include <string>
#include <thread>
#include <unordered_map>

#include "rivulet/wire/transport.hpp"

namespace rivulet::wire {

// Socket server: one poll thread reads and decodes frames and invokes the
// handler; replies are written from any thread through send(). Suited to the
// one-dispatcher broker layout where workers answer directly.
class TcpServer final : public ReplySink {
 public:
  // Binds immediately; port 0 picks a free port (see port()).
  TcpServer(const std::string& host, std::uint16_t port, FrameHandler& handler);
  ~TcpServer() override;

  TcpServer(const TcpServer&) = delete;
  TcpServer& operator=(const TcpServer&) = delete;

  void start();
  void stop();

  std::uint16_t port() const { return port_; }

  void send(std::uint64_t conn, Envelope env) override;

 private:
  struct ConnState;

  void poll_loop();
  void close_conn(const std::shared_ptr<ConnState>& conn, bool notify_handler);

  FrameHandler& handler_;
  int listen_fd_ = -1;
  int wake_fds_[2] = {-1, -1};
  std::uint16_t port_ = 0;
  std::thread thread_;
  std::atomic<bool> running_{false};

  std::mutex mu_;  // guards conns_
  std::unordered_map<std::uint64_t, std::shared_ptr<ConnState>> conns_;
};

// Blocking RPC client over one socket: writers serialize on a mutex, a
// reader thread matches replies to callers by correlation id.
class TcpClient final : public ClientTransport {
 public:
  TcpClient(const std::string& host, std::uint16_t port);
  ~TcpClient() override;

  TcpClient(const TcpClient&) = delete;
  TcpClient& operator=(const TcpClient&) = delete;

  Envelope call(MsgType type, Bytes body) override;

  void close();

 private:
  struct Pending;

  void reader_loop();
  void fail_all();

  int fd_ = -1;
  std::thread reader_;
  std::mutex write_mu_;
  std::mutex pending_mu_;
  std::uint64_t next_correlation_ = 1;
  std::unordered_map<std::uint64_t, std::shared_ptr<Pending>> pending_;
  bool closed_ = false;  // guarded by pending_mu_
};

}  // namespace rivulet::wire
