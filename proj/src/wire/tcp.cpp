#include "rivulet/wire/tcp.hpp"

#include <arpa/inet.h>
#include <fcntl.h>
#include <netdb.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include <condition_variable>
#include <cerrno>
#include <cstring>
#include <optional>
#include <vector>

namespace rivulet::wire {

namespace {

[[noreturn]] void throw_errno(const std::string& what) {
  throw TransportError(what + ": " + std::strerror(errno));
}

void set_nodelay(int fd) {
  int one = 1;
  ::setsockopt(fd, IPPROTO_TCP, TCP_NODELAY, &one, sizeof(one));
}

void set_nonblocking(int fd) {
  const int flags = ::fcntl(fd, F_GETFL, 0);
  ::fcntl(fd, F_SETFL, flags | O_NONBLOCK);
}

// Writes the whole buffer; waits for writability when the socket is
// non-blocking and full. Returns false once the peer is gone.
bool write_all(int fd, const Bytes& data) {
  std::size_t off = 0;
  while (off < data.size()) {
    const ssize_t n = ::send(fd, data.data() + off, data.size() - off, MSG_NOSIGNAL);
    if (n > 0) {
      off += static_cast<std::size_t>(n);
      continue;
    }
    if (n < 0 && (errno == EAGAIN || errno == EWOULDBLOCK)) {
      pollfd pfd{fd, POLLOUT, 0};
      ::poll(&pfd, 1, 1000);
      continue;
    }
    if (n < 0 && errno == EINTR) continue;
    return false;
  }
  return true;
}

int resolve_and_connect(const std::string& host, std::uint16_t port) {
  addrinfo hints{};
  hints.ai_family = AF_INET;
  hints.ai_socktype = SOCK_STREAM;
  addrinfo* res = nullptr;
  const std::string service = std::to_string(port);
  if (::getaddrinfo(host.c_str(), service.c_str(), &hints, &res) != 0 || res == nullptr) {
    throw TransportError("cannot resolve " + host);
  }
  int fd = -1;
  for (addrinfo* ai = res; ai != nullptr; ai = ai->ai_next) {
    fd = ::socket(ai->ai_family, ai->ai_socktype, ai->ai_protocol);
    if (fd < 0) continue;
    if (::connect(fd, ai->ai_addr, ai->ai_addrlen) == 0) break;
    ::close(fd);
    fd = -1;
  }
  ::freeaddrinfo(res);
  if (fd < 0) throw TransportError("cannot connect to " + host + ":" + service);
  return fd;
}

}  // namespace

struct TcpServer::ConnState {
  std::uint64_t id = 0;
  int fd = -1;
  FrameDecoder decoder;
  std::mutex write_mu;
  bool open = true;  // guarded by write_mu
};

TcpServer::TcpServer(const std::string& host, std::uint16_t port, FrameHandler& handler)
    : handler_(handler) {
  listen_fd_ = ::socket(AF_INET, SOCK_STREAM, 0);
  if (listen_fd_ < 0) throw_errno("socket");
  int one = 1;
  ::setsockopt(listen_fd_, SOL_SOCKET, SO_REUSEADDR, &one, sizeof(one));

  sockaddr_in addr{};
  addr.sin_family = AF_INET;
  addr.sin_port = htons(port);
  if (host.empty() || host == "0.0.0.0") {
    addr.sin_addr.s_addr = INADDR_ANY;
  } else if (::inet_pton(AF_INET, host.c_str(), &addr.sin_addr) != 1) {
    // Fall back to name resolution for e.g. "localhost".
    addrinfo hints{};
    hints.ai_family = AF_INET;
    hints.ai_socktype = SOCK_STREAM;
    addrinfo* res = nullptr;
    if (::getaddrinfo(host.c_str(), nullptr, &hints, &res) != 0 || res == nullptr) {
      ::close(listen_fd_);
      listen_fd_ = -1;
      throw TransportError("cannot resolve listen host " + host);
    }
    addr.sin_addr = reinterpret_cast<sockaddr_in*>(res->ai_addr)->sin_addr;
    ::freeaddrinfo(res);
  }
  if (::bind(listen_fd_, reinterpret_cast<sockaddr*>(&addr), sizeof(addr)) != 0) {
    const int saved = errno;
    ::close(listen_fd_);
    listen_fd_ = -1;
    errno = saved;
    throw_errno("bind " + host + ":" + std::to_string(port));
  }
  if (::listen(listen_fd_, 128) != 0) throw_errno("listen");

  sockaddr_in bound{};
  socklen_t len = sizeof(bound);
  ::getsockname(listen_fd_, reinterpret_cast<sockaddr*>(&bound), &len);
  port_ = ntohs(bound.sin_port);

  if (::pipe(wake_fds_) != 0) throw_errno("pipe");
  set_nonblocking(wake_fds_[0]);
}

TcpServer::~TcpServer() {
  stop();
  if (listen_fd_ >= 0) ::close(listen_fd_);
  for (int fd : wake_fds_) {
    if (fd >= 0) ::close(fd);
  }
}

void TcpServer::start() {
  if (running_.exchange(true)) return;
  thread_ = std::thread([this] { poll_loop(); });
}

void TcpServer::stop() {
  if (!running_.exchange(false)) return;
  const char byte = 0;
  [[maybe_unused]] ssize_t n = ::write(wake_fds_[1], &byte, 1);
  if (thread_.joinable()) thread_.join();

  std::vector<std::shared_ptr<ConnState>> remaining;
  {
    std::lock_guard lock(mu_);
    for (auto& [id, conn] : conns_) remaining.push_back(conn);
    conns_.clear();
  }
  for (auto& conn : remaining) close_conn(conn, false);
}

void TcpServer::close_conn(const std::shared_ptr<ConnState>& conn, bool notify_handler) {
  {
    std::lock_guard lock(mu_);
    conns_.erase(conn->id);
  }
  {
    std::lock_guard lock(conn->write_mu);
    if (conn->open) {
      conn->open = false;
      ::close(conn->fd);
    }
  }
  if (notify_handler) handler_.on_disconnect(conn->id);
}

void TcpServer::poll_loop() {
  set_nonblocking(listen_fd_);
  // fd → conn, owned by this thread; conns_ is the send()-facing registry.
  std::unordered_map<int, std::shared_ptr<ConnState>> by_fd;
  std::vector<std::uint8_t> rdbuf(64 * 1024);

  while (running_.load(std::memory_order_relaxed)) {
    std::vector<pollfd> fds;
    fds.push_back({listen_fd_, POLLIN, 0});
    fds.push_back({wake_fds_[0], POLLIN, 0});
    for (auto& [fd, conn] : by_fd) fds.push_back({fd, POLLIN, 0});

    if (::poll(fds.data(), fds.size(), 500) < 0) {
      if (errno == EINTR) continue;
      break;
    }

    if (fds[1].revents & POLLIN) {
      char drain[16];
      while (::read(wake_fds_[0], drain, sizeof(drain)) > 0) {
      }
    }

    if (fds[0].revents & POLLIN) {
      while (true) {
        const int fd = ::accept(listen_fd_, nullptr, nullptr);
        if (fd < 0) break;
        set_nodelay(fd);
        set_nonblocking(fd);
        auto conn = std::make_shared<ConnState>();
        conn->id = next_connection_id();
        conn->fd = fd;
        by_fd.emplace(fd, conn);
        std::lock_guard lock(mu_);
        conns_.emplace(conn->id, conn);
      }
    }

    for (std::size_t i = 2; i < fds.size(); ++i) {
      if (fds[i].revents == 0) continue;
      auto it = by_fd.find(fds[i].fd);
      if (it == by_fd.end()) continue;
      std::shared_ptr<ConnState> conn = it->second;

      bool dead = (fds[i].revents & (POLLERR | POLLHUP | POLLNVAL)) != 0;
      while (!dead) {
        const ssize_t n = ::recv(conn->fd, rdbuf.data(), rdbuf.size(), 0);
        if (n > 0) {
          try {
            conn->decoder.feed(BytesView(rdbuf.data(), static_cast<std::size_t>(n)));
            while (auto env = conn->decoder.next()) {
              handler_.on_frame(*this, conn->id, std::move(*env));
            }
          } catch (const DecodeError&) {
            dead = true;  // poisoned stream: drop the connection
          }
          continue;
        }
        if (n < 0 && (errno == EAGAIN || errno == EWOULDBLOCK)) break;
        if (n < 0 && errno == EINTR) continue;
        dead = true;  // orderly close or hard error
      }
      if (dead) {
        by_fd.erase(conn->fd);
        close_conn(conn, true);
      }
    }
  }

  for (auto& [fd, conn] : by_fd) close_conn(conn, false);
}

void TcpServer::send(std::uint64_t conn_id, Envelope env) {
  std::shared_ptr<ConnState> conn;
  {
    std::lock_guard lock(mu_);
    auto it = conns_.find(conn_id);
    if (it == conns_.end()) return;  // peer already gone
    conn = it->second;
  }
  const Bytes frame = encode_envelope(env);
  std::lock_guard lock(conn->write_mu);
  if (!conn->open) return;
  if (!write_all(conn->fd, frame)) {
    // Leave the fd to the poll loop: shutdown surfaces as EOF there, and
    // close_conn stays the single place that closes it.
    ::shutdown(conn->fd, SHUT_RDWR);
  }
}

struct TcpClient::Pending {
  std::mutex mu;
  std::condition_variable cv;
  std::optional<Envelope> reply;
  bool failed = false;
};

TcpClient::TcpClient(const std::string& host, std::uint16_t port) {
  fd_ = resolve_and_connect(host, port);
  set_nodelay(fd_);
  reader_ = std::thread([this] { reader_loop(); });
}

TcpClient::~TcpClient() { close(); }

// close() is not safe to race with itself; callers (dtor, explicit close)
// invoke it from one thread. The reader thread exiting also closes the
// client for callers via fail_all().
void TcpClient::close() {
  {
    std::lock_guard lock(pending_mu_);
    closed_ = true;
  }
  ::shutdown(fd_, SHUT_RDWR);
  if (reader_.joinable()) reader_.join();
  if (fd_ >= 0) {
    ::close(fd_);
    fd_ = -1;
  }
  fail_all();
}

void TcpClient::fail_all() {
  std::vector<std::shared_ptr<Pending>> waiting;
  {
    std::lock_guard lock(pending_mu_);
    closed_ = true;  // no new call can register after this snapshot
    for (auto& [corr, p] : pending_) waiting.push_back(p);
    pending_.clear();
  }
  for (auto& p : waiting) {
    std::lock_guard lock(p->mu);
    p->failed = true;
    p->cv.notify_all();
  }
}

void TcpClient::reader_loop() {
  FrameDecoder decoder;
  std::vector<std::uint8_t> rdbuf(64 * 1024);
  while (true) {
    const ssize_t n = ::recv(fd_, rdbuf.data(), rdbuf.size(), 0);
    if (n <= 0) {
      if (n < 0 && errno == EINTR) continue;
      break;
    }
    try {
      decoder.feed(BytesView(rdbuf.data(), static_cast<std::size_t>(n)));
      while (auto env = decoder.next()) {
        std::shared_ptr<Pending> p;
        {
          std::lock_guard lock(pending_mu_);
          auto it = pending_.find(env->correlation_id);
          if (it == pending_.end()) continue;  // reply nobody waits for
          p = it->second;
          pending_.erase(it);
        }
        std::lock_guard lock(p->mu);
        p->reply = std::move(*env);
        p->cv.notify_all();
      }
    } catch (const DecodeError&) {
      break;  // poisoned stream
    }
  }
  fail_all();
}

Envelope TcpClient::call(MsgType type, Bytes body) {
  Envelope request;
  request.type = type;
  request.body = std::move(body);
  auto pending = std::make_shared<Pending>();
  {
    std::lock_guard lock(pending_mu_);
    if (closed_) throw TransportError("connection closed");
    request.correlation_id = next_correlation_++;
    pending_.emplace(request.correlation_id, pending);
  }
  const Bytes frame = encode_envelope(request);
  {
    std::lock_guard lock(write_mu_);
    if (!write_all(fd_, frame)) {
      std::lock_guard plock(pending_mu_);
      pending_.erase(request.correlation_id);
      throw TransportError("connection lost while sending");
    }
  }
  std::unique_lock lock(pending->mu);
  pending->cv.wait(lock, [&] { return pending->failed || pending->reply.has_value(); });
  if (!pending->reply.has_value()) throw TransportError("connection lost awaiting reply");
  return std::move(*pending->reply);
}

}  // namespace rivulet::wire
