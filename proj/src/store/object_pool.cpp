#include "rivulet/store/object_pool.hpp"

#include <algorithm>
#include <cstring>

namespace rivulet::store {

const char* object_state_name(ObjectState s) {
  switch (s) {
    case ObjectState::Free: return "FREE";
    case ObjectState::Filled: return "FILLED";
    case ObjectState::Consuming: return "CONSUMING";
  }
  return "?";
}

void SharedObject::fill(BytesView payload, const PayloadMeta& meta) {
  if (state() != ObjectState::Free) {
    throw StateViolationError("fill on non-FREE object " + std::to_string(id_));
  }
  if (payload.size() > buffer_.size()) {
    throw StateViolationError("payload of " + std::to_string(payload.size()) +
                              " bytes exceeds object capacity " + std::to_string(buffer_.size()));
  }
  std::memcpy(buffer_.data(), payload.data(), payload.size());
  filled_bytes_ = payload.size();
  meta_ = meta;
}

void SharedObject::transition(ObjectState from, ObjectState to) {
  // The release/acquire pair orders buffer writes before the consumer's view.
  ObjectState expected = from;
  if (!state_.compare_exchange_strong(expected, to, std::memory_order_acq_rel)) {
    throw StateViolationError(std::string("illegal transition of object ") +
                              std::to_string(id_) + ": " + object_state_name(expected) +
                              " -> " + object_state_name(to) + " (expected " +
                              object_state_name(from) + ")");
  }
}

SharedObjectPool::SharedObjectPool(std::string group_id,
                                   const std::vector<std::uint32_t>& consumer_tasks,
                                   std::uint32_t objects_per_consumer, std::size_t object_size)
    : group_id_(std::move(group_id)),
      objects_per_consumer_(objects_per_consumer),
      object_size_(object_size) {
  if (objects_per_consumer < 2) {
    throw std::invalid_argument("objects_per_consumer must be >= 2");
  }
  std::vector<std::uint32_t> tasks = consumer_tasks;
  std::sort(tasks.begin(), tasks.end());
  if (std::adjacent_find(tasks.begin(), tasks.end()) != tasks.end()) {
    throw std::invalid_argument("duplicate consumer task id in pool");
  }
  for (std::uint32_t task : tasks) {
    ConsumerSlot& slot = slots_[task];
    for (std::uint32_t i = 0; i < objects_per_consumer; ++i) {
      const auto id = static_cast<std::uint32_t>(objects_.size());
      objects_.emplace_back(id, task, object_size);
      slot.free_ids.push_back(id);
    }
  }
}

std::vector<std::uint32_t> SharedObjectPool::consumer_tasks() const {
  std::vector<std::uint32_t> out;
  out.reserve(slots_.size());
  for (const auto& [task, slot] : slots_) out.push_back(task);
  return out;
}

SharedObjectPool::ConsumerSlot& SharedObjectPool::slot_for(std::uint32_t consumer_task) {
  auto it = slots_.find(consumer_task);
  if (it == slots_.end()) {
    throw StateViolationError("unknown consumer task " + std::to_string(consumer_task) +
                              " in group " + group_id_);
  }
  return it->second;
}

void SharedObjectPool::bump_locked() {
  ++change_count_;
  worker_cv_.notify_all();
}

SharedObject* SharedObjectPool::acquire_free(std::uint32_t consumer_task) {
  std::lock_guard lock(mu_);
  ConsumerSlot& slot = slot_for(consumer_task);
  if (slot.free_ids.empty()) return nullptr;  // backpressure: all in flight
  const std::uint32_t id = slot.free_ids.front();
  slot.free_ids.pop_front();
  return &objects_[id];
}

void SharedObjectPool::publish_filled(SharedObject& obj) {
  obj.transition(ObjectState::Free, ObjectState::Filled);
  std::lock_guard lock(mu_);
  ConsumerSlot& slot = slot_for(obj.owner_task());
  slot.filled_ids.push_back(obj.id());
  slot.cv.notify_all();
  bump_locked();
}

void SharedObjectPool::signal_new_data() {
  std::lock_guard lock(mu_);
  bump_locked();
}

std::uint64_t SharedObjectPool::change_count() const {
  std::lock_guard lock(mu_);
  return change_count_;
}

std::uint64_t SharedObjectPool::wait_changed(std::uint64_t seen, Micros timeout) const {
  std::unique_lock lock(mu_);
  worker_cv_.wait_for(lock, timeout, [&] { return change_count_ > seen || closed(); });
  return change_count_;
}

std::optional<std::uint32_t> SharedObjectPool::next_filled(std::uint32_t consumer_task,
                                                           Micros timeout) {
  std::unique_lock lock(mu_);
  ConsumerSlot& slot = slot_for(consumer_task);
  slot.cv.wait_for(lock, timeout, [&] { return !slot.filled_ids.empty() || closed(); });
  if (slot.filled_ids.empty()) return std::nullopt;
  const std::uint32_t id = slot.filled_ids.front();
  slot.filled_ids.pop_front();
  return id;
}

void SharedObjectPool::consume_and_release(
    std::uint32_t consumer_task, std::uint32_t object_id,
    const std::function<void(const PayloadMeta&, BytesView)>& handler) {
  if (object_id >= objects_.size()) {
    throw StateViolationError("unknown object id " + std::to_string(object_id));
  }
  SharedObject& obj = objects_[object_id];
  if (obj.owner_task() != consumer_task) {
    throw StateViolationError("object " + std::to_string(object_id) + " is owned by task " +
                              std::to_string(obj.owner_task()) + ", not " +
                              std::to_string(consumer_task));
  }
  if (obj.state() != ObjectState::Filled) {
    throw StateViolationError("consume of object " + std::to_string(object_id) + " in state " +
                              object_state_name(obj.state()));
  }
  // The handler sees the buffer in place; no copy. A throw leaves the object
  // FILLED (no transition has happened yet) so the caller may retry.
  handler(obj.meta(), obj.payload());

  obj.transition(ObjectState::Filled, ObjectState::Consuming);
  obj.transition(ObjectState::Consuming, ObjectState::Free);
  std::lock_guard lock(mu_);
  slot_for(consumer_task).free_ids.push_back(object_id);
  bump_locked();
}

void SharedObjectPool::close() {
  std::lock_guard lock(mu_);
  closed_.store(true, std::memory_order_release);
  for (auto& [task, slot] : slots_) slot.cv.notify_all();
  bump_locked();
}

StateCounts SharedObjectPool::state_counts() const {
  StateCounts c;
  for (const SharedObject& obj : objects_) {
    switch (obj.state()) {
      case ObjectState::Free: ++c.free; break;
      case ObjectState::Filled: ++c.filled; break;
      case ObjectState::Consuming: ++c.consuming; break;
    }
  }
  return c;
}

std::size_t SharedObjectPool::filled_unconsumed(std::uint32_t consumer_task) const {
  std::size_t n = 0;
  for (const SharedObject& obj : objects_) {
    if (obj.owner_task() == consumer_task && obj.state() == ObjectState::Filled) ++n;
  }
  return n;
}

SharedObject& SharedObjectPool::object(std::uint32_t id) {
  if (id >= objects_.size()) {
    throw StateViolationError("unknown object id " + std::to_string(id));
  }
  return objects_[id];
}

}  // namespace rivulet::store
