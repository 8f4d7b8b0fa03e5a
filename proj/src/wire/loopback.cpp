#include "rivulet/wire/loopback.hpp"

#include <condition_variable>
#include <optional>

namespace rivulet::wire {

struct LoopbackHub::Conn {
  std::mutex mu;
  std::condition_variable cv;
  std::uint64_t next_correlation = 1;
  std::unordered_map<std::uint64_t, std::optional<Envelope>> pending;
  bool closed = false;
};

class LoopbackHub::Client final : public ClientTransport {
 public:
  Client(LoopbackHub& hub, std::uint64_t conn_id, std::shared_ptr<Conn> conn)
      : hub_(hub), conn_id_(conn_id), conn_(std::move(conn)) {}

  ~Client() override { hub_.disconnect(conn_id_); }

  Envelope call(MsgType type, Bytes body) override {
    Envelope request;
    request.type = type;
    request.body = std::move(body);
    {
      std::lock_guard lock(conn_->mu);
      if (conn_->closed) throw TransportError("loopback connection closed");
      request.correlation_id = conn_->next_correlation++;
      conn_->pending.emplace(request.correlation_id, std::nullopt);
    }
    const std::uint64_t correlation = request.correlation_id;
    hub_.handler_.on_frame(hub_, conn_id_, std::move(request));

    std::unique_lock lock(conn_->mu);
    conn_->cv.wait(lock, [&] {
      return conn_->closed || conn_->pending.at(correlation).has_value();
    });
    auto it = conn_->pending.find(correlation);
    if (!it->second.has_value()) {
      conn_->pending.erase(it);
      throw TransportError("loopback connection closed");
    }
    Envelope reply = std::move(*it->second);
    conn_->pending.erase(it);
    return reply;
  }

 private:
  LoopbackHub& hub_;
  std::uint64_t conn_id_;
  std::shared_ptr<Conn> conn_;
};

std::unique_ptr<ClientTransport> LoopbackHub::connect() {
  const std::uint64_t id = next_connection_id();
  auto conn = std::make_shared<Conn>();
  {
    std::lock_guard lock(mu_);
    conns_.emplace(id, conn);
  }
  return std::make_unique<Client>(*this, id, std::move(conn));
}

void LoopbackHub::send(std::uint64_t conn_id, Envelope env) {
  std::shared_ptr<Conn> conn;
  {
    std::lock_guard lock(mu_);
    auto it = conns_.find(conn_id);
    if (it == conns_.end()) return;  // peer already gone
    conn = it->second;
  }
  std::lock_guard lock(conn->mu);
  auto it = conn->pending.find(env.correlation_id);
  if (it == conn->pending.end()) return;  // late or duplicate reply
  it->second = std::move(env);
  conn->cv.notify_all();
}

void LoopbackHub::disconnect(std::uint64_t conn_id) {
  std::shared_ptr<Conn> conn;
  {
    std::lock_guard lock(mu_);
    auto it = conns_.find(conn_id);
    if (it == conns_.end()) return;
    conn = std::move(it->second);
    conns_.erase(it);
  }
  {
    std::lock_guard lock(conn->mu);
    conn->closed = true;
    conn->cv.notify_all();
  }
  handler_.on_disconnect(conn_id);
}

}  // namespace rivulet::wire
