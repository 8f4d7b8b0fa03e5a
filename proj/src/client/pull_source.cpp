#include "rivulet/client/pull_source.hpp"

#include <stdexcept>
#include <thread>

#include "rivulet/chunk.hpp"
#include "rivulet/wire/messages.hpp"

namespace rivulet::client {

PullSource::PullSource(wire::ClientTransport& transport, PullSourceConfig cfg, const Clock& clock)
    : transport_(transport), cfg_(std::move(cfg)), clock_(clock) {
  if (cfg_.stream.empty()) throw std::invalid_argument("pull source needs a stream");
  if (cfg_.partitions.empty()) throw std::invalid_argument("pull source needs partitions");
  if (cfg_.start_offsets.empty()) {
    cfg_.start_offsets.assign(cfg_.partitions.size(), 0);
  } else if (cfg_.start_offsets.size() != cfg_.partitions.size()) {
    throw std::invalid_argument("start_offsets must match partitions");
  }
  if (cfg_.max_bytes == 0) throw std::invalid_argument("max_bytes must be positive");
  cursors_ = cfg_.start_offsets;
}

std::uint64_t PullSource::cursor(std::uint32_t partition) const {
  for (std::size_t i = 0; i < cfg_.partitions.size(); ++i) {
    if (cfg_.partitions[i] == partition) return cursors_[i];
  }
  throw std::out_of_range("partition not assigned");
}

ClientReport PullSource::run(const RecordEmit& emit, Micros duration,
                             const std::function<bool()>& finished) {
  ClientReport report;
  report.client_id = cfg_.consumer_id;
  RateRecorder recorder(clock_);
  const Micros deadline = clock_.now() + duration;

  while (clock_.now() < deadline) {
    // Sampled before the pull: a later empty reply proves the log was
    // already drained at this point.
    const bool producers_done = finished && finished();

    wire::PullRequest req;
    req.stream = cfg_.stream;
    for (std::size_t i = 0; i < cfg_.partitions.size(); ++i) {
      req.wants.push_back({cfg_.partitions[i], cursors_[i], cfg_.max_bytes});
    }

    wire::PullReply reply;
    try {
      Bytes body = wire::call_expecting(transport_, wire::MsgType::Pull, wire::encode_pull(req),
                                        wire::MsgType::PullReply);
      reply = wire::decode_pull_reply(body);
    } catch (const std::exception& e) {
      report.aborted = true;
      report.error = std::string("pull failed: ") + e.what();
      break;
    }

    std::uint64_t cycle_records = 0;
    for (std::size_t i = 0; i < reply.parts.size() && i < cursors_.size(); ++i) {
      const std::uint32_t partition = cfg_.partitions[i];
      for (const Chunk& chunk : reply.parts[i].chunks) {
        // The first chunk may reach back before the cursor; skip the
        // already-seen records locally.
        chunk.for_each([&](std::uint64_t offset, const RecordView& rec) {
          if (offset < cursors_[i]) return;
          emit(partition, offset, rec);
          ++cycle_records;
        });
        cursors_[i] = std::max(cursors_[i], chunk.end_offset());
      }
    }
    recorder.add(cycle_records, 1);

    if (cycle_records == 0) {
      if (producers_done) break;
      std::this_thread::sleep_for(cfg_.poll_timeout);
    }
  }

  recorder.fill_report(report);
  return report;
}

}  // namespace rivulet::client
