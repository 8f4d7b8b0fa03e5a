#pragma once

#include <cstdint>
#include <memory>
#include <vector>

#include "rivulet/bytes.hpp"

namespace rivulet::client {

// Supplies record values to a producer. Sources may block (pacing) and
// signal exhaustion by returning false.
class RecordSource {
 public:
  virtual ~RecordSource() = default;
  virtual bool next(Bytes& value) = 0;
};

// Infinite deterministic payloads of a fixed size.
class SyntheticSource final : public RecordSource {
 public:
  SyntheticSource(std::size_t value_bytes, std::uint64_t seed)
      : value_bytes_(value_bytes), rng_(seed) {}

  bool next(Bytes& value) override;

 private:
  std::size_t value_bytes_;
  std::uint64_t rng_;
};

// Cycles through a fixed set of pre-built records (e.g. corpus slices).
class CorpusSource final : public RecordSource {
 public:
  explicit CorpusSource(std::shared_ptr<const std::vector<Bytes>> records);

  bool next(Bytes& value) override;

 private:
  std::shared_ptr<const std::vector<Bytes>> records_;
  std::size_t next_ = 0;
};

// Rate-limits an inner source to a fixed records/second budget against wall
// time (pacing is about real elapsed time, not the injectable clock).
class PacedSource final : public RecordSource {
 public:
  PacedSource(RecordSource& inner, std::uint64_t records_per_sec);

  bool next(Bytes& value) override;

 private:
  RecordSource& inner_;
  std::uint64_t per_sec_;
  std::int64_t start_us_ = 0;
  std::uint64_t produced_ = 0;
};

// Stops an inner source after a fixed number of records.
class LimitedSource final : public RecordSource {
 public:
  LimitedSource(RecordSource& inner, std::uint64_t limit) : inner_(inner), remaining_(limit) {}

  bool next(Bytes& value) override {
    if (remaining_ == 0) return false;
    if (!inner_.next(value)) return false;
    --remaining_;
    return true;
  }

 private:
  RecordSource& inner_;
  std::uint64_t remaining_;
};

}  // namespace rivulet::client
