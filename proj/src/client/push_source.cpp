#include "rivulet/client/push_source.hpp"

#include <algorithm>
#include <set>
#include <stdexcept>

#include "rivulet/wire/messages.hpp"

namespace rivulet::client {

PushGroup::PushGroup(broker::Broker& broker, std::unique_ptr<wire::ClientTransport> conn,
                     PushGroupConfig cfg, const Clock& clock)
    : broker_(broker), conn_(std::move(conn)), cfg_(std::move(cfg)), clock_(clock) {
  if (!conn_) throw std::invalid_argument("push group needs a connection");
  if (cfg_.members.empty()) throw std::invalid_argument("push group needs members");
  std::set<std::uint32_t> tasks;
  std::set<std::uint32_t> partitions;
  leader_ = cfg_.members.front().task_id;
  for (const PushMemberConfig& m : cfg_.members) {
    if (!tasks.insert(m.task_id).second) throw std::invalid_argument("duplicate task id");
    if (m.partitions.empty()) throw std::invalid_argument("member without partitions");
    for (const PushPartition& p : m.partitions) {
      if (!partitions.insert(p.partition).second) {
        throw std::invalid_argument("partition assigned twice");
      }
    }
    leader_ = std::min(leader_, m.task_id);
  }
}

PushGroup::~PushGroup() { close(); }

void PushGroup::close() {
  std::lock_guard lock(mu_);
  conn_.reset();  // disconnect tears the subscription down broker-side
  if (pool_) pool_->close();
}

const PushMemberConfig* PushGroup::member(std::uint32_t task_id) const {
  for (const PushMemberConfig& m : cfg_.members) {
    if (m.task_id == task_id) return &m;
  }
  return nullptr;
}

bool PushGroup::ensure_subscribed(std::uint32_t task_id, ClientReport& report) {
  std::unique_lock lock(mu_);
  if (task_id == leader_ && sub_state_ == SubState::Pending) {
    wire::SubscribeRequest req;
    req.stream = cfg_.stream;
    req.group_id = cfg_.group_id;
    for (const PushMemberConfig& m : cfg_.members) {
      for (const PushPartition& p : m.partitions) {
        req.assignments.push_back({p.partition, p.start_offset, m.task_id});
      }
    }
    req.objects_per_consumer = cfg_.objects_per_consumer;
    req.object_size = cfg_.object_size;
    try {
      if (!conn_) throw wire::TransportError("push group closed");
      wire::call_expecting(*conn_, wire::MsgType::SubscribePush, wire::encode_subscribe(req),
                           wire::MsgType::SubscribeAck);
      subscribe_rpcs_.fetch_add(1);
      pool_ = broker_.subscription_pool(cfg_.stream, cfg_.group_id);
      if (!pool_) throw std::runtime_error("subscription pool not registered");
      sub_state_ = SubState::Ready;
    } catch (const std::exception& e) {
      sub_state_ = SubState::Failed;
      sub_error_ = e.what();
    }
    cv_.notify_all();
  } else {
    cv_.wait(lock, [&] { return sub_state_ != SubState::Pending; });
  }
  if (sub_state_ == SubState::Failed) {
    report.aborted = true;
    report.error = "subscribe failed: " + sub_error_;
    return false;
  }
  return true;
}

ClientReport PushGroup::run_member(std::uint32_t task_id, const RecordEmit& emit, Micros duration,
                                   const std::function<bool()>& finished) {
  ClientReport report;
  report.client_id = cfg_.client_id_prefix + "-" + std::to_string(task_id);
  const PushMemberConfig* me = member(task_id);
  if (me == nullptr) {
    report.aborted = true;
    report.error = "unknown task id";
    return report;
  }
  if (!ensure_subscribed(task_id, report)) return report;
  std::shared_ptr<store::SharedObjectPool> pool;
  {
    std::lock_guard lock(mu_);
    pool = pool_;
  }

  RateRecorder recorder(clock_);
  const Micros deadline = clock_.now() + duration;
  constexpr Micros kWaitSlice{10'000};

  while (clock_.now() < deadline) {
    if (finished && finished()) break;
    auto id = pool->next_filled(task_id, kWaitSlice);
    if (!id.has_value()) {
      if (pool->closed()) break;
      continue;
    }

    const store::SharedObject& obj = pool->object(*id);
    const store::PayloadMeta meta = obj.meta();
    std::uint64_t skip_below = 0;
    for (const PushPartition& p : me->partitions) {
      if (p.partition == meta.partition_id) skip_below = p.start_offset;
    }

    std::uint64_t emitted = 0;
    try {
      // Decode straight out of the shared buffer; the object stays FILLED
      // (owned by this task) until the notify below releases it.
      for_each_record(obj.payload(), [&](std::size_t idx, const RecordView& rec) {
        const std::uint64_t offset = meta.base_offset + idx;
        if (offset < skip_below) return;
        emit(meta.partition_id, offset, rec);
        ++emitted;
      });
      wire::ConsumedNotify note{cfg_.group_id, task_id, {*id}};
      wire::Envelope reply =
          conn_->call(wire::MsgType::ConsumedNotify, wire::encode_consumed_notify(note));
      if (reply.type != wire::MsgType::ConsumedNotify) {
        const wire::ErrorReply err = wire::decode_error(reply.body);
        throw wire::RpcError(err.code, err.message);
      }
    } catch (const std::exception& e) {
      report.aborted = true;
      report.error = std::string("push consume failed: ") + e.what();
      break;
    }
    recorder.add(emitted, 1);
  }

  recorder.fill_report(report);
  return report;
}

}  // namespace rivulet::client
