#pragma once

#include <atomic>
#include <condition_variable>
#include <cstdint>
#include <deque>
#include <functional>
#include <map>
#include <mutex>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "rivulet/bytes.hpp"
#include "rivulet/clock.hpp"

namespace rivulet::store {

struct StateViolationError : std::logic_error {
  using std::logic_error::logic_error;
};

enum class ObjectState : std::uint8_t { Free, Filled, Consuming };

const char* object_state_name(ObjectState s);

struct PayloadMeta {
  std::uint32_t partition_id = 0;
  std::uint64_t base_offset = 0;
  std::uint32_t record_count = 0;
};

// One reusable buffer slot. The only legal lifecycle is
// FREE -> FILLED (push worker) -> CONSUMING -> FREE (owning consumer);
// every transition is checked and an illegal edge throws.
class SharedObject {
 public:
  SharedObject(std::uint32_t id, std::uint32_t owner_task, std::size_t capacity)
      : id_(id), owner_task_(owner_task), buffer_(capacity) {}

  std::uint32_t id() const { return id_; }
  std::uint32_t owner_task() const { return owner_task_; }
  std::size_t capacity() const { return buffer_.size(); }
  ObjectState state() const { return state_.load(std::memory_order_acquire); }

  std::size_t filled_bytes() const { return filled_bytes_; }
  const PayloadMeta& meta() const { return meta_; }
  BytesView payload() const { return BytesView(buffer_.data(), filled_bytes_); }

  // Push-worker write while the object is still FREE (pre-publish).
  void fill(BytesView payload, const PayloadMeta& meta);

  // Single checked edge of the state machine.
  void transition(ObjectState from, ObjectState to);

 private:
  std::uint32_t id_;
  std::uint32_t owner_task_;
  std::atomic<ObjectState> state_{ObjectState::Free};
  Bytes buffer_;
  std::size_t filled_bytes_ = 0;
  PayloadMeta meta_;
};

struct StateCounts {
  std::size_t free = 0;
  std::size_t filled = 0;
  std::size_t consuming = 0;
};

// Object pool for one subscription group: objects_per_consumer slots per
// member, FIFO notification queues in both directions, and a change counter
// the push worker blocks on (new data appended OR an object freed).
class SharedObjectPool {
 public:
  SharedObjectPool(std::string group_id, const std::vector<std::uint32_t>& consumer_tasks,
                   std::uint32_t objects_per_consumer, std::size_t object_size);

  const std::string& group_id() const { return group_id_; }
  std::uint32_t total_objects() const { return static_cast<std::uint32_t>(objects_.size()); }
  std::size_t object_size() const { return object_size_; }
  std::uint32_t objects_per_consumer() const { return objects_per_consumer_; }
  std::vector<std::uint32_t> consumer_tasks() const;

  // --- push-worker side ---

  // A FREE slot owned by that consumer (FIFO reuse order), or nullptr as the
  // backpressure signal. The slot stays FREE until publish_filled.
  SharedObject* acquire_free(std::uint32_t consumer_task);

  // FREE -> FILLED; appends the object id to the owner's notification queue.
  void publish_filled(SharedObject& obj);

  // Broker-side hook: new data exists for some subscribed partition.
  void signal_new_data();

  // Blocks until the pool's change counter passes `seen` (an append signal,
  // a release, or close), or the timeout elapses. Returns the current count.
  std::uint64_t wait_changed(std::uint64_t seen, Micros timeout) const;
  std::uint64_t change_count() const;

  // --- consumer side ---

  // Next published object id for this consumer, FIFO. Blocks up to timeout.
  // nullopt on timeout, or immediately once closed and drained.
  std::optional<std::uint32_t> next_filled(std::uint32_t consumer_task, Micros timeout);

  // Runs handler on a read-only view of the FILLED object, then releases it
  // (FILLED -> CONSUMING -> FREE) and signals the push worker. If the
  // handler throws, the object stays FILLED and the error propagates.
  void consume_and_release(std::uint32_t consumer_task, std::uint32_t object_id,
                           const std::function<void(const PayloadMeta&, BytesView)>& handler);

  // --- lifecycle / introspection ---

  void close();
  bool closed() const { return closed_.load(std::memory_order_acquire); }

  StateCounts state_counts() const;
  std::size_t filled_unconsumed(std::uint32_t consumer_task) const;

  SharedObject& object(std::uint32_t id);

 private:
  struct ConsumerSlot {
    std::deque<std::uint32_t> free_ids;    // FREE slots in reuse order
    std::deque<std::uint32_t> filled_ids;  // published, not yet taken
    std::condition_variable cv;
  };

  ConsumerSlot& slot_for(std::uint32_t consumer_task);
  void bump_locked();

  std::string group_id_;
  std::uint32_t objects_per_consumer_;
  std::size_t object_size_;
  std::deque<SharedObject> objects_;  // deque: SharedObject is immovable

  mutable std::mutex mu_;
  mutable std::condition_variable worker_cv_;
  std::map<std::uint32_t, ConsumerSlot> slots_;
  std::uint64_t change_count_ = 0;
  std::atomic<bool> closed_{false};
};

}  // namespace rivulet::store
