#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <atomic>
#include <map>
#include <thread>

#include "rivulet/broker/broker.hpp"
#include "rivulet/client/producer.hpp"
#include "rivulet/client/pull_source.hpp"
#include "rivulet/client/push_source.hpp"
#include "rivulet/wire/loopback.hpp"

using namespace rivulet;
using namespace rivulet::client;
using wire::MsgType;

namespace {

std::vector<Chunk> read_all(wire::ClientTransport& client, const std::string& stream,
                            std::uint32_t partition) {
  std::vector<Chunk> out;
  std::uint64_t cursor = 0;
  for (;;) {
    wire::PullRequest req{stream, {{partition, cursor, 8 * 1024 * 1024}}};
    Bytes body = wire::call_expecting(client, MsgType::Pull, wire::encode_pull(req),
                                      MsgType::PullReply);
    wire::PullReply reply = wire::decode_pull_reply(body);
    if (reply.parts[0].chunks.empty()) return out;
    for (Chunk& c : reply.parts[0].chunks) out.push_back(std::move(c));
    cursor = reply.parts[0].next_offset;
  }
}

// Advances a fake clock on every record, standing in for elapsed time
// between arrivals.
class TickingSource final : public RecordSource {
 public:
  TickingSource(FakeClock& clock, Micros step, std::uint64_t limit, std::size_t value_bytes)
      : clock_(clock), step_(step), remaining_(limit), value_bytes_(value_bytes) {}

  bool next(Bytes& value) override {
    if (remaining_ == 0) return false;
    --remaining_;
    clock_.advance(step_);
    value.assign(value_bytes_, 0x5a);
    return true;
  }

 private:
  FakeClock& clock_;
  Micros step_;
  std::uint64_t remaining_;
  std::size_t value_bytes_;
};

// Yields records while appending out-of-band data before the first one, to
// race a pinned producer against another writer.
class IntrudingSource final : public RecordSource {
 public:
  IntrudingSource(RecordSource& inner, std::function<void()> intrude)
      : inner_(inner), intrude_(std::move(intrude)) {}

  bool next(Bytes& value) override {
    if (intrude_) {
      auto f = std::move(intrude_);
      intrude_ = nullptr;
      f();
    }
    return inner_.next(value);
  }

 private:
  RecordSource& inner_;
  std::function<void()> intrude_;
};

}  // namespace

TEST_CASE("synthetic source is deterministic and paced source keeps its rate") {
  SyntheticSource a(100, 42);
  SyntheticSource b(100, 42);
  Bytes va;
  Bytes vb;
  for (int i = 0; i < 10; ++i) {
    REQUIRE(a.next(va));
    REQUIRE(b.next(vb));
    CHECK(va == vb);
    CHECK(va.size() == 100);
  }

  SyntheticSource inner(16, 1);
  PacedSource paced(inner, 2000);
  LimitedSource limited(paced, 200);
  const auto t0 = std::chrono::steady_clock::now();
  Bytes v;
  int produced = 0;
  while (limited.next(v)) ++produced;
  const auto elapsed =
      std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::steady_clock::now() - t0);
  CHECK(produced == 200);
  // 200 records at 2000/s is 100 ms of budget.
  CHECK(elapsed.count() >= 90);
  CHECK(elapsed.count() < 1000);
}

TEST_CASE("producer seals at the chunk boundary") {
  broker::Broker b({.worker_count = 1});
  b.create_stream("s", 1);
  b.start();
  wire::LoopbackHub hub(b);
  auto conn = hub.connect();

  // 100-byte values, empty keys: 108 framed bytes, so 9 records per 1 KiB.
  Producer producer(*conn, {.producer_id = "p0",
                            .stream = "s",
                            .partitions = {0},
                            .chunk_size = 1024,
                            .record_size = 100});
  SyntheticSource synth(100, 7);
  LimitedSource source(synth, 90);
  ClientReport report = producer.run(source, Micros{10'000'000});

  CHECK(!report.aborted);
  CHECK(report.total_records == 90);
  CHECK(report.total_rpcs == 10);  // 10 chunks of 9, one append each
  auto chunks = read_all(*conn, "s", 0);
  REQUIRE(chunks.size() == 10);
  for (const Chunk& c : chunks) CHECK(c.record_count == 9);
  CHECK(b.head_offset("s", 0) == 90);
}

TEST_CASE("producer batches one sealed chunk per partition into one append") {
  broker::Broker b({.worker_count = 1});
  b.create_stream("s", 2);
  b.start();
  wire::LoopbackHub hub(b);
  auto conn = hub.connect();

  Producer producer(*conn, {.producer_id = "p0",
                            .stream = "s",
                            .partitions = {0, 1},
                            .chunk_size = 1024,
                            .record_size = 100});
  SyntheticSource synth(100, 9);
  LimitedSource source(synth, 36);
  ClientReport report = producer.run(source, Micros{10'000'000});

  CHECK(!report.aborted);
  CHECK(report.total_records == 36);
  // Round-robin fill seals both partitions together: two appends, each
  // carrying a chunk for every partition.
  CHECK(report.total_rpcs == 2);
  CHECK(b.metrics().rpcs(MsgType::Append) == 2);
  CHECK(b.head_offset("s", 0) == 18);
  CHECK(b.head_offset("s", 1) == 18);
}

TEST_CASE("a quiet stretch seals the open chunk at the timeout") {
  broker::Broker b({.worker_count = 1});
  b.create_stream("s", 1);
  b.start();
  wire::LoopbackHub hub(b);
  auto conn = hub.connect();

  FakeClock clock;
  Producer producer(*conn,
                    {.producer_id = "p0",
                     .stream = "s",
                     .partitions = {0},
                     .chunk_size = 1 << 20,  // never fills
                     .record_size = 100,
                     .seal_timeout = Micros{1000}},
                    clock);
  // Records arrive 400 us apart: the open chunk crosses the 1 ms seal
  // deadline after every third record.
  TickingSource source(clock, Micros{400}, 10, 100);
  ClientReport report = producer.run(source, Micros{60'000'000});

  CHECK(!report.aborted);
  CHECK(report.total_records == 10);
  auto chunks = read_all(*conn, "s", 0);
  std::vector<std::uint32_t> counts;
  for (const Chunk& c : chunks) counts.push_back(c.record_count);
  CHECK(counts == std::vector<std::uint32_t>{3, 3, 3, 1});
}

TEST_CASE("pinned producer re-syncs once after a stale offset") {
  broker::Broker b({.worker_count = 1});
  b.create_stream("s", 1);
  b.start();
  wire::LoopbackHub hub(b);
  auto conn = hub.connect();
  auto intruder_conn = hub.connect();

  Producer producer(*conn, {.producer_id = "p0",
                            .stream = "s",
                            .partitions = {0},
                            .chunk_size = 1024,
                            .record_size = 100,
                            .pin_offsets = true});
  SyntheticSource synth(100, 11);
  LimitedSource limited(synth, 18);
  // After the producer has synced to head 0, a second writer appends 5
  // records, so the producer's first pinned append is stale.
  IntrudingSource source(limited, [&] {
    ByteWriter w;
    for (int i = 0; i < 5; ++i) encode_record_into(w, {}, Bytes(40, 0x11));
    wire::AppendRequest req{"s", {Chunk::make(0, 0, 5, w.take())}};
    wire::call_expecting(*intruder_conn, MsgType::Append, wire::encode_append(req),
                         MsgType::AppendAck);
  });
  ClientReport report = producer.run(source, Micros{10'000'000});

  CHECK(!report.aborted);
  CHECK(report.total_records == 18);
  CHECK(b.head_offset("s", 0) == 23);
  auto chunks = read_all(*conn, "s", 0);
  std::uint64_t expect = 0;
  for (const Chunk& c : chunks) {
    CHECK(c.base_offset == expect);
    expect += c.record_count;
  }
}

TEST_CASE("pull source on an empty stream polls at the configured cadence") {
  broker::Broker b({.worker_count = 1});
  b.create_stream("s", 1);
  b.start();
  wire::LoopbackHub hub(b);
  auto conn = hub.connect();

  PullSource source(*conn, {.consumer_id = "c0",
                            .stream = "s",
                            .partitions = {0},
                            .poll_timeout = Micros{10'000}});
  std::uint64_t emitted = 0;
  ClientReport report =
      source.run([&](auto, auto, const auto&) { ++emitted; }, Micros{1'000'000});

  CHECK(emitted == 0);
  CHECK(report.total_records == 0);
  // ~100 polls in a second at 10 ms; allow generous scheduler slack.
  CHECK(report.total_rpcs >= 60);
  CHECK(report.total_rpcs <= 110);
}

TEST_CASE("pull source drains pre-appended chunks in offset order") {
  broker::Broker b({.worker_count = 1});
  b.create_stream("s", 1);
  b.start();
  wire::LoopbackHub hub(b);
  auto conn = hub.connect();

  for (int i = 0; i < 10; ++i) {
    ByteWriter w;
    for (int r = 0; r < 5; ++r) {
      encode_record_into(w, {}, Bytes(20, static_cast<std::uint8_t>(i * 5 + r)));
    }
    wire::AppendRequest req{"s", {Chunk::make(0, kAppendAtHead, 5, w.take())}};
    wire::call_expecting(*conn, MsgType::Append, wire::encode_append(req), MsgType::AppendAck);
  }

  SUBCASE("from zero") {
    PullSource source(*conn, {.consumer_id = "c0", .stream = "s", .partitions = {0}});
    std::vector<std::uint64_t> offsets;
    ClientReport report = source.run(
        [&](std::uint32_t partition, std::uint64_t offset, const RecordView&) {
          CHECK(partition == 0);
          offsets.push_back(offset);
        },
        Micros{5'000'000}, [] { return true; });
    CHECK(!report.aborted);
    REQUIRE(offsets.size() == 50);
    for (std::size_t i = 0; i < offsets.size(); ++i) CHECK(offsets[i] == i);
    CHECK(report.total_rpcs == 2);  // one full read, one empty confirming drain
    CHECK(source.cursor(0) == 50);
  }

  SUBCASE("from an offset inside a chunk") {
    PullSource source(*conn, {.consumer_id = "c0",
                              .stream = "s",
                              .partitions = {0},
                              .start_offsets = {7}});
    std::vector<std::uint64_t> offsets;
    source.run([&](auto, std::uint64_t offset, const auto&) { offsets.push_back(offset); },
               Micros{5'000'000}, [] { return true; });
    REQUIRE(offsets.size() == 43);
    CHECK(offsets.front() == 7);  // records 5 and 6 of the covering chunk skipped
    CHECK(offsets.back() == 49);
  }
}

TEST_CASE("concurrent producer and pull consumers hand over every record exactly once") {
  broker::Broker b({.worker_count = 2});
  b.create_stream("s", 2);
  b.start();
  wire::LoopbackHub hub(b);

  constexpr std::uint64_t kRecords = 20'000;
  std::atomic<bool> producer_done{false};
  ClientReport producer_report;
  std::thread producer_thread([&] {
    auto conn = hub.connect();
    Producer producer(*conn, {.producer_id = "p0",
                              .stream = "s",
                              .partitions = {0, 1},
                              .chunk_size = 1024,
                              .record_size = 100});
    SyntheticSource synth(100, 77);
    LimitedSource source(synth, kRecords);
    producer_report = producer.run(source, Micros{30'000'000});
    producer_done.store(true);
  });

  struct Seen {
    std::vector<std::uint64_t> offsets;
    std::uint64_t value_hash_sum = 0;
  };
  Seen seen[2];
  std::vector<std::thread> consumers;
  for (std::uint32_t part = 0; part < 2; ++part) {
    consumers.emplace_back([&, part] {
      auto conn = hub.connect();
      PullSource source(*conn, {.consumer_id = "c" + std::to_string(part),
                                .stream = "s",
                                .partitions = {part},
                                .poll_timeout = Micros{500}});
      source.run(
          [&](std::uint32_t, std::uint64_t offset, const RecordView& rec) {
            seen[part].offsets.push_back(offset);
            seen[part].value_hash_sum += fnv1a64(rec.value);
          },
          Micros{60'000'000}, [&] { return producer_done.load(); });
    });
  }
  producer_thread.join();
  for (auto& t : consumers) t.join();

  REQUIRE(!producer_report.aborted);
  CHECK(producer_report.total_records == kRecords);

  // Exactly once, in order: each partition's emitted offsets are 0..head-1.
  auto conn = hub.connect();
  std::uint64_t total = 0;
  for (std::uint32_t part = 0; part < 2; ++part) {
    const std::uint64_t head = b.head_offset("s", part);
    REQUIRE(seen[part].offsets.size() == head);
    for (std::uint64_t i = 0; i < head; ++i) REQUIRE(seen[part].offsets[i] == i);
    total += head;

    // Content check: hash sum over the log equals the consumer's.
    std::uint64_t expect_sum = 0;
    for (const Chunk& c : read_all(*conn, "s", part)) {
      c.for_each([&](std::uint64_t, const RecordView& rec) { expect_sum += fnv1a64(rec.value); });
    }
    CHECK(expect_sum == seen[part].value_hash_sum);
  }
  CHECK(total == kRecords);
}

TEST_CASE("corpus values round-trip through the log verbatim") {
  broker::Broker b({.worker_count = 1});
  b.create_stream("s", 1);
  b.start();
  wire::LoopbackHub hub(b);
  auto conn = hub.connect();

  auto records = std::make_shared<std::vector<Bytes>>();
  records->push_back(to_bytes("the quick brown fox"));
  records->push_back(to_bytes("jumps over the lazy dog"));
  records->push_back(to_bytes("pack my box"));
  CorpusSource corpus(records);
  LimitedSource source(corpus, 7);

  Producer producer(*conn, {.producer_id = "p0",
                            .stream = "s",
                            .partitions = {0},
                            .chunk_size = 4096,
                            .record_size = 16,
                            .seal_timeout = Micros{200}});
  producer.run(source, Micros{5'000'000});

  std::vector<std::string> values;
  PullSource pull(*conn, {.consumer_id = "c0", .stream = "s", .partitions = {0}});
  pull.run([&](auto, auto, const RecordView& rec) { values.emplace_back(as_string_view(rec.value)); },
           Micros{5'000'000}, [] { return true; });
  REQUIRE(values.size() == 7);
  for (std::size_t i = 0; i < values.size(); ++i) {
    CHECK(values[i] == as_string_view((*records)[i % records->size()]));
  }
}

TEST_CASE("push group: single member consumes pre-appended chunks in order") {
  broker::Broker b({.worker_count = 1});
  b.create_stream("s", 1);
  b.start();
  wire::LoopbackHub hub(b);
  auto conn = hub.connect();

  for (int i = 0; i < 3; ++i) {
    ByteWriter w;
    for (int r = 0; r < 4; ++r) encode_record_into(w, {}, Bytes(30, static_cast<std::uint8_t>(i)));
    wire::AppendRequest req{"s", {Chunk::make(0, kAppendAtHead, 4, w.take())}};
    wire::call_expecting(*conn, MsgType::Append, wire::encode_append(req), MsgType::AppendAck);
  }

  PushGroupConfig cfg;
  cfg.group_id = "g";
  cfg.stream = "s";
  cfg.members = {{0, {{0, 0}}}};
  cfg.object_size = 4096;
  PushGroup group(b, hub.connect(), cfg);

  std::vector<std::uint64_t> offsets;
  ClientReport report = group.run_member(
      0, [&](auto, std::uint64_t offset, const auto&) { offsets.push_back(offset); },
      Micros{10'000'000}, [&] { return offsets.size() == 12; });

  CHECK(!report.aborted);
  CHECK(report.total_records == 12);
  CHECK(group.subscribe_rpcs() == 1);
  REQUIRE(offsets.size() == 12);
  for (std::size_t i = 0; i < offsets.size(); ++i) CHECK(offsets[i] == i);
  CHECK(b.metrics().rpcs(MsgType::SubscribePush) == 1);
  CHECK(b.metrics().rpcs(MsgType::ConsumedNotify) == 3);
}

TEST_CASE("push group of four: one subscribe, no polling, per-task order") {
  broker::Broker b({.worker_count = 1});
  b.create_stream("s", 4);
  b.start();
  wire::LoopbackHub hub(b);

  constexpr std::uint64_t kPerPartition = 500;  // records
  PushGroupConfig cfg;
  cfg.group_id = "g4";
  cfg.stream = "s";
  cfg.members = {{0, {{0, 0}}}, {1, {{1, 0}}}, {2, {{2, 0}}}, {3, {{3, 0}}}};
  cfg.objects_per_consumer = 4;
  cfg.object_size = 8192;
  PushGroup group(b, hub.connect(), cfg);

  std::atomic<bool> producer_done{false};
  std::thread producer_thread([&] {
    auto conn = hub.connect();
    Producer producer(*conn, {.producer_id = "p0",
                              .stream = "s",
                              .partitions = {0, 1, 2, 3},
                              .chunk_size = 1024,
                              .record_size = 100});
    SyntheticSource synth(100, 3);
    LimitedSource source(synth, kPerPartition * 4);
    producer.run(source, Micros{30'000'000});
    producer_done.store(true);
  });

  std::vector<std::uint64_t> next_offset(4, 0);
  std::atomic<int> order_errors{0};
  std::vector<ClientReport> reports(4);
  std::vector<std::thread> members;
  for (std::uint32_t task = 0; task < 4; ++task) {
    members.emplace_back([&, task] {
      reports[task] = group.run_member(
          task,
          [&](std::uint32_t partition, std::uint64_t offset, const RecordView&) {
            if (partition != task || offset != next_offset[task]) order_errors.fetch_add(1);
            ++next_offset[task];
          },
          Micros{60'000'000},
          [&] { return producer_done.load() && next_offset[task] >= kPerPartition; });
    });
  }
  producer_thread.join();
  for (auto& t : members) t.join();

  CHECK(order_errors.load() == 0);
  CHECK(group.subscribe_rpcs() == 1);
  CHECK(b.metrics().rpcs(MsgType::SubscribePush) == 1);
  CHECK(b.metrics().rpcs(MsgType::Pull) == 0);  // nobody polled
  for (std::uint32_t task = 0; task < 4; ++task) {
    CHECK(!reports[task].aborted);
    CHECK(reports[task].total_records == kPerPartition);
  }
  CHECK(b.metrics().push_worker_count() == 1);
  group.close();
  CHECK(b.metrics().push_worker_count() == 0);
}

TEST_CASE("push group respects start offsets inside chunks") {
  broker::Broker b({.worker_count = 1});
  b.create_stream("s", 1);
  b.start();
  wire::LoopbackHub hub(b);
  auto conn = hub.connect();

  ByteWriter w;
  for (int r = 0; r < 10; ++r) encode_record_into(w, {}, Bytes(10, static_cast<std::uint8_t>(r)));
  wire::AppendRequest req{"s", {Chunk::make(0, 0, 10, w.take())}};
  wire::call_expecting(*conn, MsgType::Append, wire::encode_append(req), MsgType::AppendAck);

  PushGroupConfig cfg;
  cfg.group_id = "g";
  cfg.stream = "s";
  cfg.members = {{0, {{0, 6}}}};  // start mid-chunk
  cfg.object_size = 4096;
  PushGroup group(b, hub.connect(), cfg);

  std::vector<std::uint64_t> offsets;
  group.run_member(0, [&](auto, std::uint64_t offset, const auto&) { offsets.push_back(offset); },
                   Micros{5'000'000}, [&] { return offsets.size() == 4; });
  CHECK(offsets == std::vector<std::uint64_t>{6, 7, 8, 9});
}
