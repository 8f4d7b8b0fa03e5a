#pragma once

#include <string>
#include <utility>
#include <vector>

#include "rivulet/chunk.hpp"
#include "rivulet/wire/envelope.hpp"

namespace rivulet::wire {

// Error codes carried by ERROR replies; part of the external interface.
inline constexpr std::uint32_t kErrFraming = 1;
inline constexpr std::uint32_t kErrOutOfRange = 2;
inline constexpr std::uint32_t kErrStaleProducer = 3;
inline constexpr std::uint32_t kErrUnknownStream = 4;
inline constexpr std::uint32_t kErrSubscriptionConflict = 5;
inline constexpr std::uint32_t kErrOversizedChunk = 6;
inline constexpr std::uint32_t kErrReplicationFailed = 7;

// One sealed chunk per distinct partition; chunk.partition_id names the
// target. base_offset may be kAppendAtHead (broker assigns) or pinned.
struct AppendRequest {
  std::string stream;
  std::vector<Chunk> entries;
};

struct PartitionHead {
  std::uint32_t partition_id = 0;
  std::uint64_t head_offset = 0;
};

struct AppendAck {
  std::vector<PartitionHead> heads;  // new head per appended partition
};

struct PullWant {
  std::uint32_t partition_id = 0;
  std::uint64_t offset = 0;
  std::uint32_t max_bytes = 0;
};

struct PullRequest {
  std::string stream;
  std::vector<PullWant> wants;
};

struct PartitionPull {
  std::uint32_t partition_id = 0;
  std::uint64_t next_offset = 0;  // resume cursor after the returned chunks
  std::uint64_t head_offset = 0;  // partition head at read time
  std::vector<Chunk> chunks;
};

struct PullReply {
  std::vector<PartitionPull> parts;
};

struct SubscribeAssignment {
  std::uint32_t partition_id = 0;
  std::uint64_t start_offset = 0;
  std::uint32_t consumer_task_id = 0;
};

struct SubscribeRequest {
  std::string stream;
  std::string group_id;
  std::vector<SubscribeAssignment> assignments;
  std::uint32_t objects_per_consumer = 0;  // must be >= 2
  std::uint32_t object_size = 0;           // bytes per pool slot
};

struct SubscribeAck {
  std::uint32_t total_objects = 0;
};

struct ConsumedNotify {
  std::string group_id;
  std::uint32_t consumer_task_id = 0;
  std::vector<std::uint32_t> object_ids;
};

// Backup-bound copy of an append; offsets are pinned by the primary.
struct ReplicateRequest {
  std::string stream;
  std::vector<Chunk> entries;
};

struct ErrorReply {
  std::uint32_t code = 0;
  std::string message;
};

Bytes encode_append(const AppendRequest& m);
AppendRequest decode_append(BytesView body);

Bytes encode_append_ack(const AppendAck& m);
AppendAck decode_append_ack(BytesView body);

Bytes encode_pull(const PullRequest& m);
PullRequest decode_pull(BytesView body);

Bytes encode_pull_reply(const PullReply& m);
PullReply decode_pull_reply(BytesView body);

Bytes encode_subscribe(const SubscribeRequest& m);
SubscribeRequest decode_subscribe(BytesView body);

Bytes encode_subscribe_ack(const SubscribeAck& m);
SubscribeAck decode_subscribe_ack(BytesView body);

Bytes encode_consumed_notify(const ConsumedNotify& m);
ConsumedNotify decode_consumed_notify(BytesView body);

Bytes encode_replicate(const ReplicateRequest& m);
ReplicateRequest decode_replicate(BytesView body);

Bytes encode_error(const ErrorReply& m);
ErrorReply decode_error(BytesView body);

}  // namespace rivulet::wire
