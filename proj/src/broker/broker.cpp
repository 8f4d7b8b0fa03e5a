#include "rivulet/broker/broker.hpp"

#include <algorithm>
#include <iostream>

namespace rivulet::broker {

using wire::Envelope;
using wire::MsgType;

// One fanned-out request: lanes fill their slots, the last one replies.
struct Broker::Gather {
  wire::ReplySink* sink = nullptr;
  std::uint64_t conn = 0;
  std::uint64_t correlation = 0;
  MsgType reply_type{};

  std::mutex mu;
  std::size_t remaining = 0;
  std::optional<wire::ErrorReply> error;
  wire::AppendAck append;
  std::vector<wire::PartitionPull> parts;

  // Merges one lane's outcome; sends the reply when it was the last lane.
  void complete(const std::function<void()>& merge) {
    Envelope reply;
    {
      std::lock_guard lock(mu);
      if (merge) merge();
      if (--remaining > 0) return;
      reply.correlation_id = correlation;
      if (error.has_value()) {
        reply.type = MsgType::Error;
        reply.body = wire::encode_error(*error);
      } else {
        reply.type = reply_type;
        switch (reply_type) {
          case MsgType::AppendAck:
            reply.body = wire::encode_append_ack(append);
            break;
          case MsgType::PullReply:
            reply.body = wire::encode_pull_reply({std::move(parts)});
            break;
          default:
            break;  // REPLICATE_ACK: empty body
        }
      }
    }
    sink->send(conn, std::move(reply));
  }

  void fail(std::uint32_t code, std::string message) {
    complete([&] {
      if (!error.has_value()) error = wire::ErrorReply{code, std::move(message)};
    });
  }
};

Broker::Broker(BrokerConfig cfg, std::unique_ptr<wire::ClientTransport> backup)
    : cfg_(cfg), backup_(std::move(backup)) {
  if (cfg_.worker_count < 1) throw std::invalid_argument("worker_count must be >= 1");
  if (cfg_.replication != 1 && cfg_.replication != 2) {
    throw std::invalid_argument("replication must be 1 or 2");
  }
  if (cfg_.replication == 2 && backup_ == nullptr) {
    throw std::invalid_argument("replication=2 requires a backup connection");
  }
}

Broker::~Broker() { stop(); }

void Broker::create_stream(const std::string& name, std::uint32_t partitions) {
  if (partitions < 1) throw std::invalid_argument("stream needs at least one partition");
  std::lock_guard lock(streams_mu_);
  if (streams_.count(name) != 0) throw std::invalid_argument("stream already exists: " + name);
  auto state = std::make_unique<StreamState>();
  state->name = name;
  for (std::uint32_t i = 0; i < partitions; ++i) {
    state->partitions.emplace_back(i, cfg_.segment_bytes);
  }
  streams_.emplace(name, std::move(state));
}

Broker::StreamState* Broker::find_stream(const std::string& name) {
  std::lock_guard lock(streams_mu_);
  auto it = streams_.find(name);
  return it == streams_.end() ? nullptr : it->second.get();
}

const Broker::StreamState* Broker::find_stream(const std::string& name) const {
  std::lock_guard lock(streams_mu_);
  auto it = streams_.find(name);
  return it == streams_.end() ? nullptr : it->second.get();
}

void Broker::start() {
  if (started_) return;
  started_ = true;
  for (std::uint32_t i = 0; i < cfg_.worker_count; ++i) {
    Lane& lane = lanes_.emplace_back();
    lane.thread = std::thread([this, &lane] { lane_loop(lane); });
  }
}

void Broker::stop() {
  if (!started_) return;

  // Subscriptions first: their workers read partitions served by the lanes.
  std::vector<std::shared_ptr<Subscription>> subs;
  {
    std::lock_guard lock(subs_mu_);
    for (auto& [key, sub] : subs_) subs.push_back(sub);
  }
  for (auto& sub : subs) stop_subscription(sub);

  for (Lane& lane : lanes_) {
    {
      std::lock_guard lock(lane.mu);
      lane.stopping = true;
    }
    lane.cv.notify_all();
  }
  for (Lane& lane : lanes_) {
    if (lane.thread.joinable()) lane.thread.join();
  }
  lanes_.clear();
  started_ = false;
}

void Broker::enqueue(std::uint32_t lane_index, std::function<void()> fn) {
  Lane& lane = lanes_.at(lane_index);
  {
    std::lock_guard lock(lane.mu);
    lane.queue.push_back(std::move(fn));
  }
  lane.cv.notify_one();
}

void Broker::lane_loop(Lane& lane) {
  while (true) {
    std::function<void()> task;
    {
      std::unique_lock lock(lane.mu);
      lane.cv.wait(lock, [&] { return !lane.queue.empty() || lane.stopping; });
      if (lane.queue.empty()) return;  // stopping and drained
      task = std::move(lane.queue.front());
      lane.queue.pop_front();
    }
    metrics_.worker_entered();
    task();
    metrics_.worker_left();
  }
}

void Broker::apply_service_floor() {
  if (cfg_.service_floor.count() > 0) std::this_thread::sleep_for(cfg_.service_floor);
}

void Broker::send_error(wire::ReplySink& sink, std::uint64_t conn, std::uint64_t correlation,
                        std::uint32_t code, const std::string& message) {
  Envelope reply;
  reply.type = MsgType::Error;
  reply.correlation_id = correlation;
  reply.body = wire::encode_error({code, message});
  sink.send(conn, std::move(reply));
}

void Broker::on_frame(wire::ReplySink& sink, std::uint64_t conn, Envelope env) {
  metrics_.count_rpc(env.type);
  try {
    switch (env.type) {
      case MsgType::Append:
        handle_append(sink, conn, std::move(env), /*is_replica=*/false);
        return;
      case MsgType::Replicate:
        handle_append(sink, conn, std::move(env), /*is_replica=*/true);
        return;
      case MsgType::Pull:
        handle_pull(sink, conn, std::move(env));
        return;
      case MsgType::SubscribePush:
        handle_subscribe(sink, conn, std::move(env));
        return;
      case MsgType::ConsumedNotify:
        handle_consumed_notify(sink, conn, std::move(env));
        return;
      default:
        send_error(sink, conn, env.correlation_id, wire::kErrFraming,
                   std::string("unexpected request type ") + wire::msg_type_name(env.type));
        return;
    }
  } catch (const DecodeError& e) {
    send_error(sink, conn, env.correlation_id, wire::kErrFraming, e.what());
  }
}

void Broker::handle_append(wire::ReplySink& sink, std::uint64_t conn, Envelope env,
                           bool is_replica) {
  wire::AppendRequest req = wire::decode_append(env.body);
  StreamState* state = find_stream(req.stream);
  if (state == nullptr) {
    send_error(sink, conn, env.correlation_id, wire::kErrUnknownStream,
               "unknown stream " + req.stream);
    return;
  }
  const MsgType reply_type = is_replica ? MsgType::ReplicateAck : MsgType::AppendAck;
  if (req.entries.empty()) {
    Envelope reply;
    reply.type = reply_type;
    reply.correlation_id = env.correlation_id;
    if (!is_replica) reply.body = wire::encode_append_ack({});
    sink.send(conn, std::move(reply));
    return;
  }

  std::vector<std::uint32_t> seen;
  for (const Chunk& c : req.entries) {
    if (c.partition_id >= state->partitions.size()) {
      send_error(sink, conn, env.correlation_id, wire::kErrOutOfRange,
                 "unknown partition " + std::to_string(c.partition_id));
      return;
    }
    if (std::find(seen.begin(), seen.end(), c.partition_id) != seen.end()) {
      send_error(sink, conn, env.correlation_id, wire::kErrFraming,
                 "duplicate partition " + std::to_string(c.partition_id) + " in append");
      return;
    }
    seen.push_back(c.partition_id);
    if (c.byte_length() > cfg_.segment_bytes) {
      send_error(sink, conn, env.correlation_id, wire::kErrOversizedChunk,
                 "chunk of " + std::to_string(c.byte_length()) + " bytes exceeds segment size");
      return;
    }
  }

  // Fan out by owning lane; each lane validates, replicates, then applies
  // its whole sub-batch (or none of it).
  std::map<std::uint32_t, std::vector<Chunk>> by_lane;
  for (Chunk& c : req.entries) by_lane[lane_of(c.partition_id)].push_back(std::move(c));

  auto gather = std::make_shared<Gather>();
  gather->sink = &sink;
  gather->conn = conn;
  gather->correlation = env.correlation_id;
  gather->reply_type = reply_type;
  gather->remaining = by_lane.size();

  for (auto& [lane_index, chunks] : by_lane) {
    enqueue(lane_index, [this, gather, state, chunks = std::move(chunks), is_replica,
                         stream = req.stream]() mutable {
      // Pin offsets against current heads. This lane is the only writer of
      // these partitions, so the pins stay valid until applied below.
      for (Chunk& c : chunks) {
        PartitionSlot& slot = state->partitions[c.partition_id];
        std::lock_guard lock(slot.mu);
        const std::uint64_t head = slot.partition.head_offset();
        if (c.base_offset == kAppendAtHead) {
          c.base_offset = head;
        } else if (c.base_offset != head) {
          gather->fail(wire::kErrStaleProducer,
                       "partition " + std::to_string(c.partition_id) + " head is " +
                           std::to_string(head) + ", append claims " +
                           std::to_string(c.base_offset));
          return;
        }
      }

      if (!is_replica && cfg_.replication == 2) {
        try {
          wire::ReplicateRequest rep{stream, chunks};
          wire::call_expecting(*backup_, MsgType::Replicate, wire::encode_replicate(rep),
                               MsgType::ReplicateAck);
        } catch (const std::exception& e) {
          gather->fail(wire::kErrReplicationFailed,
                       std::string("replication to backup failed: ") + e.what());
          return;
        }
      }

      std::uint64_t records = 0;
      std::vector<wire::PartitionHead> heads;
      heads.reserve(chunks.size());
      for (Chunk& c : chunks) {
        PartitionSlot& slot = state->partitions[c.partition_id];
        const std::uint32_t pid = c.partition_id;
        const std::size_t bytes = c.byte_length();
        records += c.record_count;
        {
          std::lock_guard lock(slot.mu);
          slot.partition.append_chunk(std::move(c));
          slot.max_chunk_bytes = std::max(slot.max_chunk_bytes, bytes);
          heads.push_back({pid, slot.partition.head_offset()});
        }
        // Outside the lock: the floor occupies the lane, not the partition.
        apply_service_floor();
      }
      metrics_.add_appended(records);
      notify_subscriptions(stream);

      gather->complete([&] {
        for (const auto& h : heads) gather->append.heads.push_back(h);
      });
    });
  }
}

void Broker::handle_pull(wire::ReplySink& sink, std::uint64_t conn, Envelope env) {
  wire::PullRequest req = wire::decode_pull(env.body);
  StreamState* state = find_stream(req.stream);
  if (state == nullptr) {
    send_error(sink, conn, env.correlation_id, wire::kErrUnknownStream,
               "unknown stream " + req.stream);
    return;
  }
  if (req.wants.empty()) {
    Envelope reply;
    reply.type = MsgType::PullReply;
    reply.correlation_id = env.correlation_id;
    reply.body = wire::encode_pull_reply({});
    sink.send(conn, std::move(reply));
    return;
  }
  for (const wire::PullWant& want : req.wants) {
    if (want.partition_id >= state->partitions.size()) {
      send_error(sink, conn, env.correlation_id, wire::kErrOutOfRange,
                 "unknown partition " + std::to_string(want.partition_id));
      return;
    }
    if (want.max_bytes == 0) {
      send_error(sink, conn, env.correlation_id, wire::kErrFraming, "max_bytes must be >= 1");
      return;
    }
  }

  auto gather = std::make_shared<Gather>();
  gather->sink = &sink;
  gather->conn = conn;
  gather->correlation = env.correlation_id;
  gather->reply_type = MsgType::PullReply;
  gather->parts.resize(req.wants.size());

  std::map<std::uint32_t, std::vector<std::size_t>> by_lane;  // lane -> want indices
  for (std::size_t i = 0; i < req.wants.size(); ++i) {
    by_lane[lane_of(req.wants[i].partition_id)].push_back(i);
  }
  gather->remaining = by_lane.size();

  auto wants = std::make_shared<std::vector<wire::PullWant>>(std::move(req.wants));
  for (auto& [lane_index, indices] : by_lane) {
    enqueue(lane_index, [this, gather, state, wants, indices = std::move(indices)] {
      std::vector<wire::PartitionPull> local(indices.size());
      for (std::size_t k = 0; k < indices.size(); ++k) {
        const wire::PullWant& want = (*wants)[indices[k]];
        PartitionSlot& slot = state->partitions[want.partition_id];
        ReadResult result;
        std::uint64_t head = 0;
        try {
          std::lock_guard lock(slot.mu);
          head = slot.partition.head_offset();
          result = slot.partition.read_from(want.offset, want.max_bytes);
        } catch (const OutOfRangeError& e) {
          gather->fail(wire::kErrOutOfRange, e.what());
          return;
        }
        local[k].partition_id = want.partition_id;
        local[k].next_offset = result.next_offset;
        local[k].head_offset = head;
        local[k].chunks = std::move(result.chunks);
        apply_service_floor();
      }
      gather->complete([&] {
        for (std::size_t k = 0; k < indices.size(); ++k) {
          gather->parts[indices[k]] = std::move(local[k]);
        }
      });
    });
  }
}

void Broker::handle_subscribe(wire::ReplySink& sink, std::uint64_t conn, Envelope env) {
  wire::SubscribeRequest req = wire::decode_subscribe(env.body);
  StreamState* state = find_stream(req.stream);
  if (state == nullptr) {
    send_error(sink, conn, env.correlation_id, wire::kErrUnknownStream,
               "unknown stream " + req.stream);
    return;
  }
  if (req.assignments.empty() || req.objects_per_consumer < 2 || req.object_size == 0) {
    send_error(sink, conn, env.correlation_id, wire::kErrFraming,
               "subscription needs assignments, objects_per_consumer >= 2, object_size >= 1");
    return;
  }
  std::vector<std::uint32_t> seen_parts;
  for (const auto& a : req.assignments) {
    if (a.partition_id >= state->partitions.size()) {
      send_error(sink, conn, env.correlation_id, wire::kErrOutOfRange,
                 "unknown partition " + std::to_string(a.partition_id));
      return;
    }
    if (std::find(seen_parts.begin(), seen_parts.end(), a.partition_id) != seen_parts.end()) {
      send_error(sink, conn, env.correlation_id, wire::kErrFraming,
                 "partition " + std::to_string(a.partition_id) + " assigned twice");
      return;
    }
    seen_parts.push_back(a.partition_id);
    PartitionSlot& slot = state->partitions[a.partition_id];
    std::lock_guard lock(slot.mu);
    if (slot.max_chunk_bytes > req.object_size) {
      send_error(sink, conn, env.correlation_id, wire::kErrOversizedChunk,
                 "object_size " + std::to_string(req.object_size) +
                     " smaller than stored chunk of " + std::to_string(slot.max_chunk_bytes) +
                     " bytes");
      return;
    }
  }

  auto sub = std::make_shared<Subscription>();
  sub->stream = req.stream;
  sub->group = req.group_id;
  sub->conn = conn;
  sub->state = state;
  std::map<std::uint32_t, std::vector<Subscription::Cursor>> by_task;
  for (const auto& a : req.assignments) {
    by_task[a.consumer_task_id].push_back({a.partition_id, a.start_offset});
  }
  std::vector<std::uint32_t> tasks;
  for (auto& [task, cursors] : by_task) {
    tasks.push_back(task);
    sub->members.push_back({task, std::move(cursors)});
  }
  sub->pool = std::make_shared<store::SharedObjectPool>(req.group_id, tasks,
                                                        req.objects_per_consumer,
                                                        req.object_size);

  const std::string key = req.stream + "/" + req.group_id;
  {
    std::lock_guard lock(subs_mu_);
    if (subs_.count(key) != 0) {
      send_error(sink, conn, env.correlation_id, wire::kErrSubscriptionConflict,
                 "group " + req.group_id + " already subscribed to " + req.stream);
      return;
    }
    subs_.emplace(key, sub);
  }
  metrics_.push_worker_started();
  sub->worker = std::thread([this, sub] { run_push_worker(*sub); });

  Envelope reply;
  reply.type = MsgType::SubscribeAck;
  reply.correlation_id = env.correlation_id;
  reply.body = wire::encode_subscribe_ack({sub->pool->total_objects()});
  sink.send(conn, std::move(reply));
}

void Broker::run_push_worker(Subscription& sub) {
  auto& pool = *sub.pool;
  std::uint64_t seen = pool.change_count();
  try {
    while (!pool.closed()) {
      bool progressed = false;
      for (auto& member : sub.members) {
        for (auto& cursor : member.cursors) {
          PartitionSlot& slot = sub.state->partitions[cursor.partition];
          ReadResult result;
          {
            std::lock_guard lock(slot.mu);
            if (cursor.offset >= slot.partition.head_offset()) continue;
            // max_bytes=1 still returns one whole chunk: the fill unit.
            result = slot.partition.read_from(cursor.offset, 1);
          }
          store::SharedObject* obj = pool.acquire_free(member.task);
          if (obj == nullptr) break;  // this member is saturated; next one
          const Chunk& c = result.chunks.front();
          obj->fill(c.payload_view(), {c.partition_id, c.base_offset, c.record_count});
          pool.publish_filled(*obj);
          cursor.offset = c.end_offset();
          metrics_.add_pushed(c.record_count);
          progressed = true;
        }
      }
      if (!progressed) seen = pool.wait_changed(seen, cfg_.push_idle_wait);
    }
  } catch (const std::exception& e) {
    // A broken subscription (e.g. a chunk larger than the object size
    // appended after subscribe) is fatal for the group, not the broker.
    std::cerr << "push worker for " << sub.stream << "/" << sub.group
              << " stopped: " << e.what() << "\n";
    pool.close();
  }
}

void Broker::stop_subscription(const std::shared_ptr<Subscription>& sub) {
  {
    std::lock_guard lock(subs_mu_);
    subs_.erase(sub->stream + "/" + sub->group);
  }
  sub->pool->close();
  if (sub->worker.joinable()) {
    sub->worker.join();
    metrics_.push_worker_stopped();
  }
}

void Broker::notify_subscriptions(const std::string& stream) {
  std::vector<std::shared_ptr<Subscription>> subs;
  {
    std::lock_guard lock(subs_mu_);
    for (auto& [key, sub] : subs_) {
      if (sub->stream == stream) subs.push_back(sub);
    }
  }
  for (auto& sub : subs) sub->pool->signal_new_data();
}

void Broker::handle_consumed_notify(wire::ReplySink& sink, std::uint64_t conn, Envelope env) {
  wire::ConsumedNotify req = wire::decode_consumed_notify(env.body);
  std::shared_ptr<Subscription> sub;
  {
    std::lock_guard lock(subs_mu_);
    for (auto& [key, candidate] : subs_) {
      if (candidate->group == req.group_id) {
        sub = candidate;
        break;
      }
    }
  }
  if (sub == nullptr) {
    send_error(sink, conn, env.correlation_id, wire::kErrFraming,
               "unknown subscription group " + req.group_id);
    return;
  }
  try {
    for (std::uint32_t id : req.object_ids) {
      sub->pool->consume_and_release(req.consumer_task_id, id, [](auto&, auto) {});
    }
  } catch (const store::StateViolationError& e) {
    send_error(sink, conn, env.correlation_id, wire::kErrFraming, e.what());
    return;
  }
  Envelope reply;
  reply.type = MsgType::ConsumedNotify;  // echo acts as the ack
  reply.correlation_id = env.correlation_id;
  sink.send(conn, std::move(reply));
}

void Broker::on_disconnect(std::uint64_t conn) {
  std::vector<std::shared_ptr<Subscription>> doomed;
  {
    std::lock_guard lock(subs_mu_);
    for (auto& [key, sub] : subs_) {
      if (sub->conn == conn) doomed.push_back(sub);
    }
  }
  for (auto& sub : doomed) stop_subscription(sub);
}

std::uint64_t Broker::head_offset(const std::string& stream, std::uint32_t partition) const {
  const StreamState* state = find_stream(stream);
  if (state == nullptr || partition >= state->partitions.size()) {
    throw OutOfRangeError("no such partition " + stream + "/" + std::to_string(partition));
  }
  const PartitionSlot& slot = state->partitions[partition];
  std::lock_guard lock(slot.mu);
  return slot.partition.head_offset();
}

std::uint64_t Broker::total_records(const std::string& stream) const {
  const StreamState* state = find_stream(stream);
  if (state == nullptr) throw OutOfRangeError("no such stream " + stream);
  std::uint64_t total = 0;
  for (const PartitionSlot& slot : state->partitions) {
    std::lock_guard lock(slot.mu);
    total += slot.partition.head_offset();
  }
  return total;
}

std::uint32_t Broker::partition_count(const std::string& stream) const {
  const StreamState* state = find_stream(stream);
  if (state == nullptr) throw OutOfRangeError("no such stream " + stream);
  return static_cast<std::uint32_t>(state->partitions.size());
}

std::shared_ptr<store::SharedObjectPool> Broker::subscription_pool(
    const std::string& stream, const std::string& group) const {
  std::lock_guard lock(subs_mu_);
  auto it = subs_.find(stream + "/" + group);
  return it == subs_.end() ? nullptr : it->second->pool;
}

}  // namespace rivulet::broker
