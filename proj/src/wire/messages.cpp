#include "rivulet/wire/messages.hpp"

namespace rivulet::wire {

namespace {

void put_chunks(ByteWriter& w, const std::vector<Chunk>& chunks) {
  w.put_u32(static_cast<std::uint32_t>(chunks.size()));
  for (const Chunk& c : chunks) encode_chunk_into(w, c);
}

std::vector<Chunk> read_chunks(ByteReader& r) {
  const std::uint32_t n = r.u32();
  std::vector<Chunk> out;
  out.reserve(n);
  for (std::uint32_t i = 0; i < n; ++i) out.push_back(decode_chunk(r));
  return out;
}

}  // namespace

Bytes encode_append(const AppendRequest& m) {
  ByteWriter w;
  w.put_string(m.stream);
  put_chunks(w, m.entries);
  return w.take();
}

AppendRequest decode_append(BytesView body) {
  ByteReader r(body);
  AppendRequest m;
  m.stream = r.string();
  m.entries = read_chunks(r);
  r.expect_done("APPEND");
  return m;
}

Bytes encode_append_ack(const AppendAck& m) {
  ByteWriter w;
  w.put_u32(static_cast<std::uint32_t>(m.heads.size()));
  for (const PartitionHead& h : m.heads) {
    w.put_u32(h.partition_id);
    w.put_u64(h.head_offset);
  }
  return w.take();
}

AppendAck decode_append_ack(BytesView body) {
  ByteReader r(body);
  AppendAck m;
  const std::uint32_t n = r.u32();
  m.heads.reserve(n);
  for (std::uint32_t i = 0; i < n; ++i) {
    PartitionHead h;
    h.partition_id = r.u32();
    h.head_offset = r.u64();
    m.heads.push_back(h);
  }
  r.expect_done("APPEND_ACK");
  return m;
}

Bytes encode_pull(const PullRequest& m) {
  ByteWriter w;
  w.put_string(m.stream);
  w.put_u32(static_cast<std::uint32_t>(m.wants.size()));
  for (const PullWant& want : m.wants) {
    w.put_u32(want.partition_id);
    w.put_u64(want.offset);
    w.put_u32(want.max_bytes);
  }
  return w.take();
}

PullRequest decode_pull(BytesView body) {
  ByteReader r(body);
  PullRequest m;
  m.stream = r.string();
  const std::uint32_t n = r.u32();
  m.wants.reserve(n);
  for (std::uint32_t i = 0; i < n; ++i) {
    PullWant want;
    want.partition_id = r.u32();
    want.offset = r.u64();
    want.max_bytes = r.u32();
    m.wants.push_back(want);
  }
  r.expect_done("PULL");
  return m;
}

Bytes encode_pull_reply(const PullReply& m) {
  ByteWriter w;
  w.put_u32(static_cast<std::uint32_t>(m.parts.size()));
  for (const PartitionPull& p : m.parts) {
    w.put_u32(p.partition_id);
    w.put_u64(p.next_offset);
    w.put_u64(p.head_offset);
    put_chunks(w, p.chunks);
  }
  return w.take();
}

PullReply decode_pull_reply(BytesView body) {
  ByteReader r(body);
  PullReply m;
  const std::uint32_t n = r.u32();
  m.parts.reserve(n);
  for (std::uint32_t i = 0; i < n; ++i) {
    PartitionPull p;
    p.partition_id = r.u32();
    p.next_offset = r.u64();
    p.head_offset = r.u64();
    p.chunks = read_chunks(r);
    m.parts.push_back(std::move(p));
  }
  r.expect_done("PULL_REPLY");
  return m;
}

Bytes encode_subscribe(const SubscribeRequest& m) {
  ByteWriter w;
  w.put_string(m.stream);
  w.put_string(m.group_id);
  w.put_u32(static_cast<std::uint32_t>(m.assignments.size()));
  for (const SubscribeAssignment& a : m.assignments) {
    w.put_u32(a.partition_id);
    w.put_u64(a.start_offset);
    w.put_u32(a.consumer_task_id);
  }
  w.put_u32(m.objects_per_consumer);
  w.put_u32(m.object_size);
  return w.take();
}

SubscribeRequest decode_subscribe(BytesView body) {
  ByteReader r(body);
  SubscribeRequest m;
  m.stream = r.string();
  m.group_id = r.string();
  const std::uint32_t n = r.u32();
  m.assignments.reserve(n);
  for (std::uint32_t i = 0; i < n; ++i) {
    SubscribeAssignment a;
    a.partition_id = r.u32();
    a.start_offset = r.u64();
    a.consumer_task_id = r.u32();
    m.assignments.push_back(a);
  }
  m.objects_per_consumer = r.u32();
  m.object_size = r.u32();
  r.expect_done("SUBSCRIBE_PUSH");
  return m;
}

Bytes encode_subscribe_ack(const SubscribeAck& m) {
  ByteWriter w;
  w.put_u32(m.total_objects);
  return w.take();
}

SubscribeAck decode_subscribe_ack(BytesView body) {
  ByteReader r(body);
  SubscribeAck m;
  m.total_objects = r.u32();
  r.expect_done("SUBSCRIBE_ACK");
  return m;
}

Bytes encode_consumed_notify(const ConsumedNotify& m) {
  ByteWriter w;
  w.put_string(m.group_id);
  w.put_u32(m.consumer_task_id);
  w.put_u32(static_cast<std::uint32_t>(m.object_ids.size()));
  for (std::uint32_t id : m.object_ids) w.put_u32(id);
  return w.take();
}

ConsumedNotify decode_consumed_notify(BytesView body) {
  ByteReader r(body);
  ConsumedNotify m;
  m.group_id = r.string();
  m.consumer_task_id = r.u32();
  const std::uint32_t n = r.u32();
  m.object_ids.reserve(n);
  for (std::uint32_t i = 0; i < n; ++i) m.object_ids.push_back(r.u32());
  r.expect_done("CONSUMED_NOTIFY");
  return m;
}

Bytes encode_replicate(const ReplicateRequest& m) {
  ByteWriter w;
  w.put_string(m.stream);
  put_chunks(w, m.entries);
  return w.take();
}

ReplicateRequest decode_replicate(BytesView body) {
  ByteReader r(body);
  ReplicateRequest m;
  m.stream = r.string();
  m.entries = read_chunks(r);
  r.expect_done("REPLICATE");
  return m;
}

Bytes encode_error(const ErrorReply& m) {
  ByteWriter w;
  w.put_u32(m.code);
  w.put_string(m.message);
  return w.take();
}

ErrorReply decode_error(BytesView body) {
  ByteReader r(body);
  ErrorReply m;
  m.code = r.u32();
  m.message = r.string();
  r.expect_done("ERROR");
  return m;
}

}  // namespace rivulet::wire
