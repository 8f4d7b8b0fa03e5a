#pragma once

#include <deque>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "rivulet/broker/metrics.hpp"
#include "rivulet/clock.hpp"
#include "rivulet/partition.hpp"
#include "rivulet/store/object_pool.hpp"
#include "rivulet/wire/transport.hpp"

namespace rivulet::broker {

struct BrokerConfig {
  std::uint32_t worker_count = 1;  // NBc storage lanes
  std::size_t segment_bytes = kDefaultSegmentBytes;
  int replication = 1;  // 2 = forward appends to a backup before acking

  // Minimum lane occupancy per partition sub-request, modeling a broker with
  // constrained per-core service capacity. Zero disables the floor.
  Micros service_floor{0};

  // How long an idle push worker blocks before re-checking for work.
  Micros push_idle_wait{10'000};
};

// The storage node. Transport-agnostic: attach a TcpServer and/or a
// LoopbackHub to feed it frames. Request validation runs on the calling
// transport thread; storage work runs on NBc lanes, each owning the
// partitions that hash to it; every subscription gets one push worker.
class Broker final : public wire::FrameHandler {
 public:
  // `backup` must be a connection to another broker when replication = 2.
  explicit Broker(BrokerConfig cfg,
                  std::unique_ptr<wire::ClientTransport> backup = nullptr);
  ~Broker() override;

  Broker(const Broker&) = delete;
  Broker& operator=(const Broker&) = delete;

  // Streams are pre-created before serving; an unknown stream in a request
  // is a client error, not an auto-create.
  void create_stream(const std::string& name, std::uint32_t partitions);

  void start();
  void stop();

  void on_frame(wire::ReplySink& sink, std::uint64_t conn, wire::Envelope env) override;
  void on_disconnect(std::uint64_t conn) override;

  BrokerMetrics& metrics() { return metrics_; }
  const BrokerConfig& config() const { return cfg_; }

  std::uint64_t head_offset(const std::string& stream, std::uint32_t partition) const;
  std::uint64_t total_records(const std::string& stream) const;
  std::uint32_t partition_count(const std::string& stream) const;

  // Co-located push consumers attach to their group's pool directly.
  std::shared_ptr<store::SharedObjectPool> subscription_pool(const std::string& stream,
                                                             const std::string& group) const;

 private:
  struct PartitionSlot {
    explicit PartitionSlot(std::uint32_t id, std::size_t segment_bytes)
        : partition(id, segment_bytes) {}
    mutable std::mutex mu;
    Partition partition;
    std::size_t max_chunk_bytes = 0;
  };

  struct StreamState {
    std::string name;
    std::deque<PartitionSlot> partitions;  // deque: slots hold a mutex
  };

  struct Lane {
    std::thread thread;
    std::mutex mu;
    std::condition_variable cv;
    std::deque<std::function<void()>> queue;
    bool stopping = false;
  };

  // Scatter-gather completion for one request fanned out across lanes.
  struct Gather;

  struct Subscription {
    std::string stream;
    std::string group;
    std::uint64_t conn = 0;
    StreamState* state = nullptr;
    std::shared_ptr<store::SharedObjectPool> pool;
    struct Cursor {
      std::uint32_t partition = 0;
      std::uint64_t offset = 0;
    };
    struct Member {
      std::uint32_t task = 0;
      std::vector<Cursor> cursors;
    };
    std::vector<Member> members;
    std::thread worker;
  };

  StreamState* find_stream(const std::string& name);
  const StreamState* find_stream(const std::string& name) const;

  void enqueue(std::uint32_t lane, std::function<void()> fn);
  void lane_loop(Lane& lane);
  std::uint32_t lane_of(std::uint32_t partition) const {
    return partition % cfg_.worker_count;
  }

  void handle_append(wire::ReplySink& sink, std::uint64_t conn, wire::Envelope env,
                     bool is_replica);
  void handle_pull(wire::ReplySink& sink, std::uint64_t conn, wire::Envelope env);
  void handle_subscribe(wire::ReplySink& sink, std::uint64_t conn, wire::Envelope env);
  void handle_consumed_notify(wire::ReplySink& sink, std::uint64_t conn, wire::Envelope env);

  void send_error(wire::ReplySink& sink, std::uint64_t conn, std::uint64_t correlation,
                  std::uint32_t code, const std::string& message);

  void notify_subscriptions(const std::string& stream);
  void run_push_worker(Subscription& sub);
  void stop_subscription(const std::shared_ptr<Subscription>& sub);
  void apply_service_floor();

  BrokerConfig cfg_;
  std::unique_ptr<wire::ClientTransport> backup_;
  BrokerMetrics metrics_;

  mutable std::mutex streams_mu_;
  std::map<std::string, std::unique_ptr<StreamState>> streams_;

  std::deque<Lane> lanes_;
  bool started_ = false;

  mutable std::mutex subs_mu_;
  std::map<std::string, std::shared_ptr<Subscription>> subs_;  // key stream+"/"+group
};

}  // namespace rivulet::broker
