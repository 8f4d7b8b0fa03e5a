#include "rivulet/client/record_source.hpp"

#include <chrono>
#include <stdexcept>
#include <thread>

namespace rivulet::client {

bool SyntheticSource::next(Bytes& value) {
  value.resize(value_bytes_);
  std::size_t i = 0;
  while (i + 8 <= value.size()) {
    const std::uint64_t word = splitmix64(rng_);
    for (int b = 0; b < 8; ++b) value[i++] = static_cast<std::uint8_t>(word >> (8 * b));
  }
  if (i < value.size()) {
    std::uint64_t word = splitmix64(rng_);
    for (; i < value.size(); ++i, word >>= 8) value[i] = static_cast<std::uint8_t>(word);
  }
  return true;
}

CorpusSource::CorpusSource(std::shared_ptr<const std::vector<Bytes>> records)
    : records_(std::move(records)) {
  if (!records_ || records_->empty()) throw std::invalid_argument("corpus source needs records");
}

bool CorpusSource::next(Bytes& value) {
  value = (*records_)[next_];
  next_ = (next_ + 1) % records_->size();
  return true;
}

namespace {
std::int64_t wall_us() {
  return std::chrono::duration_cast<std::chrono::microseconds>(
             std::chrono::steady_clock::now().time_since_epoch())
      .count();
}
}  // namespace

PacedSource::PacedSource(RecordSource& inner, std::uint64_t records_per_sec)
    : inner_(inner), per_sec_(records_per_sec) {
  if (per_sec_ == 0) throw std::invalid_argument("pace must be positive");
}

bool PacedSource::next(Bytes& value) {
  if (start_us_ == 0) start_us_ = wall_us();
  // The producer may take record produced_ once wall time reaches its slot.
  const std::int64_t due_us =
      start_us_ + static_cast<std::int64_t>(produced_ * 1'000'000 / per_sec_);
  const std::int64_t now = wall_us();
  if (now < due_us) std::this_thread::sleep_for(std::chrono::microseconds(due_us - now));
  ++produced_;
  return inner_.next(value);
}

}  // namespace rivulet::client
