#pragma once

#include <atomic>
#include <condition_variable>
#include <cstdint>
#include <functional>
#include <memory>
#include <mutex>
#include <string>
#include <vector>

#include "rivulet/broker/broker.hpp"
#include "rivulet/client/emit.hpp"
#include "rivulet/client/report.hpp"
#include "rivulet/clock.hpp"
#include "rivulet/wire/transport.hpp"

namespace rivulet::client {

struct PushPartition {
  std::uint32_t partition = 0;
  std::uint64_t start_offset = 0;
};

struct PushMemberConfig {
  std::uint32_t task_id = 0;
  std::vector<PushPartition> partitions;
};

struct PushGroupConfig {
  std::string group_id;
  std::string stream;
  std::vector<PushMemberConfig> members;
  std::uint32_t objects_per_consumer = 4;
  std::uint32_t object_size = 256 * 1024;
  std::string client_id_prefix = "push";
};

// Consumer group fed by the broker's push worker through the shared object
// pool. The member with the smallest task id is elected to issue the single
// SubscribeRequest; every member then blocks on its own notification queue
// instead of polling. Destroying the group drops the subscription
// connection, which unsubscribes; close/destroy only after every
// run_member call has returned.
class PushGroup {
 public:
  PushGroup(broker::Broker& broker, std::unique_ptr<wire::ClientTransport> conn,
            PushGroupConfig cfg, const Clock& clock = SteadyClock::instance());
  ~PushGroup();

  PushGroup(const PushGroup&) = delete;
  PushGroup& operator=(const PushGroup&) = delete;

  // Call once per member, from that member's thread. Blocks until the
  // leader's subscribe resolves. Stops at `duration`, when `finished`
  // returns true, or when the pool closes.
  ClientReport run_member(std::uint32_t task_id, const RecordEmit& emit, Micros duration,
                          const std::function<bool()>& finished = {});

  std::uint32_t subscribe_rpcs() const { return subscribe_rpcs_.load(); }

  // Explicit unsubscribe (also done by the destructor).
  void close();

 private:
  bool ensure_subscribed(std::uint32_t task_id, ClientReport& report);
  const PushMemberConfig* member(std::uint32_t task_id) const;

  broker::Broker& broker_;
  std::unique_ptr<wire::ClientTransport> conn_;
  PushGroupConfig cfg_;
  const Clock& clock_;
  std::uint32_t leader_;

  std::mutex mu_;
  std::condition_variable cv_;
  enum class SubState { Pending, Ready, Failed };
  SubState sub_state_ = SubState::Pending;
  std::string sub_error_;
  std::shared_ptr<store::SharedObjectPool> pool_;
  std::atomic<std::uint32_t> subscribe_rpcs_{0};
};

}  // namespace rivulet::client
