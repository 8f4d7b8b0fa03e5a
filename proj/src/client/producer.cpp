#include "rivulet/client/producer.hpp"

#include <algorithm>
#include <stdexcept>

#include "rivulet/wire/messages.hpp"

namespace rivulet::client {

Producer::Producer(wire::ClientTransport& transport, ProducerConfig cfg, const Clock& clock)
    : transport_(transport), cfg_(std::move(cfg)), clock_(clock) {
  if (cfg_.stream.empty()) throw std::invalid_argument("producer needs a stream");
  if (cfg_.partitions.empty()) throw std::invalid_argument("producer needs partitions");
  std::vector<std::uint32_t> sorted = cfg_.partitions;
  std::sort(sorted.begin(), sorted.end());
  if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end()) {
    throw std::invalid_argument("duplicate partition assignment");
  }
  if (cfg_.chunk_size < cfg_.record_size + kRecordFramingBytes) {
    throw std::invalid_argument("chunk_size below one framed record");
  }
  if (cfg_.seal_timeout <= Micros{0}) throw std::invalid_argument("seal_timeout must be positive");
  open_.resize(cfg_.partitions.size());
  next_offset_.assign(cfg_.partitions.size(), kAppendAtHead);
  key_rng_ = fnv1a64(to_bytes(cfg_.producer_id));
}

void Producer::seal(std::size_t slot) {
  OpenChunk& oc = open_[slot];
  oc.sealed = std::make_shared<const Bytes>(oc.payload.take());
  oc.sealed_count = oc.record_count;
  oc.record_count = 0;
}

void Producer::fail(const std::string& message) {
  report_.aborted = true;
  report_.error = message;
}

bool Producer::sync_offsets(RateRecorder& recorder) {
  wire::PullRequest req;
  req.stream = cfg_.stream;
  for (std::uint32_t p : cfg_.partitions) req.wants.push_back({p, 0, 1});
  try {
    Bytes body = wire::call_expecting(transport_, wire::MsgType::Pull, wire::encode_pull(req),
                                      wire::MsgType::PullReply);
    recorder.add(0, 1);
    wire::PullReply reply = wire::decode_pull_reply(body);
    for (std::size_t i = 0; i < reply.parts.size() && i < next_offset_.size(); ++i) {
      next_offset_[i] = reply.parts[i].head_offset;
    }
    return true;
  } catch (const std::exception& e) {
    fail(std::string("offset re-sync failed: ") + e.what());
    return false;
  }
}

bool Producer::flush(RateRecorder& recorder) {
  std::vector<Chunk> entries;
  std::vector<std::size_t> slots;
  std::uint64_t records = 0;
  for (std::size_t i = 0; i < open_.size(); ++i) {
    if (!open_[i].sealed) continue;
    entries.push_back(Chunk{cfg_.partitions[i],
                            cfg_.pin_offsets ? next_offset_[i] : kAppendAtHead,
                            open_[i].sealed_count, open_[i].sealed});
    slots.push_back(i);
    records += open_[i].sealed_count;
  }
  if (entries.empty()) return true;

  for (int attempt = 0;; ++attempt) {
    try {
      Bytes body = wire::call_expecting(transport_, wire::MsgType::Append,
                                        wire::encode_append({cfg_.stream, entries}),
                                        wire::MsgType::AppendAck);
      recorder.add(records, 1);
      wire::AppendAck ack = wire::decode_append_ack(body);
      for (const wire::PartitionHead& h : ack.heads) {
        for (std::size_t i = 0; i < cfg_.partitions.size(); ++i) {
          if (cfg_.partitions[i] == h.partition_id) next_offset_[i] = h.head_offset;
        }
      }
      for (std::size_t slot : slots) {
        open_[slot].sealed.reset();
        open_[slot].sealed_count = 0;
      }
      return true;
    } catch (const wire::RpcError& e) {
      // Another pinned producer won the race: adopt the new heads and retry
      // the same chunks once at the fresh offsets.
      if (e.code == wire::kErrStaleProducer && cfg_.pin_offsets && attempt == 0) {
        if (!sync_offsets(recorder)) return false;
        for (std::size_t k = 0; k < entries.size(); ++k) {
          entries[k].base_offset = next_offset_[slots[k]];
        }
        continue;
      }
      fail(std::string("append rejected: ") + e.what());
      return false;
    } catch (const wire::TransportError& e) {
      fail(std::string("transport lost: ") + e.what());
      return false;
    }
  }
}

ClientReport Producer::run(RecordSource& source, Micros duration) {
  report_ = ClientReport{};
  report_.client_id = cfg_.producer_id;
  RateRecorder recorder(clock_);
  for (OpenChunk& oc : open_) oc = OpenChunk{};

  if (cfg_.pin_offsets && !sync_offsets(recorder)) {
    recorder.fill_report(report_);
    return report_;
  }

  const Micros deadline = clock_.now() + duration;
  const std::size_t n = cfg_.partitions.size();
  std::size_t rr = 0;
  Bytes value;
  Bytes key;
  while (clock_.now() < deadline) {
    if (!source.next(value)) break;

    // Seal anything that went stale while the source was producing. The
    // sweep runs between records, so the seal bound holds whenever the
    // source keeps up with seal_timeout.
    const Micros now = clock_.now();
    bool timed_out = false;
    for (std::size_t i = 0; i < n; ++i) {
      if (open_[i].record_count != 0 && now - open_[i].first_record >= cfg_.seal_timeout) {
        if (open_[i].sealed && !flush(recorder)) break;
        seal(i);
        timed_out = true;
      }
    }
    if (report_.aborted) break;
    if (timed_out && !flush(recorder)) break;

    if (cfg_.key_mode == KeyMode::Random) {
      key.resize(8);
      std::uint64_t word = splitmix64(key_rng_);
      for (int b = 0; b < 8; ++b) key[b] = static_cast<std::uint8_t>(word >> (8 * b));
    }

    const std::size_t slot = rr++ % n;
    OpenChunk& oc = open_[slot];
    const std::size_t rec_size = encoded_record_size(key.size(), value.size());
    if (oc.record_count != 0 && oc.payload.size() + rec_size > cfg_.chunk_size) {
      if (oc.sealed && !flush(recorder)) break;
      seal(slot);
    }
    if (oc.record_count == 0) oc.first_record = clock_.now();
    encode_record_into(oc.payload, key, value);
    ++oc.record_count;

    // Full batch staged (one sealed chunk per partition): ship it.
    if (std::all_of(open_.begin(), open_.end(),
                    [](const OpenChunk& c) { return c.sealed != nullptr; })) {
      if (!flush(recorder)) break;
    }
  }

  if (!report_.aborted) {
    for (std::size_t i = 0; i < n; ++i) {
      if (open_[i].record_count == 0) continue;
      if (open_[i].sealed && !flush(recorder)) break;
      if (!report_.aborted) seal(i);
    }
    if (!report_.aborted) flush(recorder);
  }
  recorder.fill_report(report_);
  return report_;
}

}  // namespace rivulet::client
