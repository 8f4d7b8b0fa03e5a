#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cctype>
#include <sstream>
#include <thread>

#include "rivulet/flow/dataflow.hpp"
#include "rivulet/flow/queue.hpp"

using namespace rivulet;
using namespace rivulet::flow;

namespace {

// Independent reference tokenizer: explicit scan with the C character
// classifiers instead of the operator's table.
std::vector<std::string> oracle_tokens(std::string_view text) {
  std::vector<std::string> out;
  std::size_t i = 0;
  while (i < text.size()) {
    const unsigned char c = static_cast<unsigned char>(text[i]);
    if (c < 128 && std::isalnum(c)) {
      std::size_t j = i;
      std::string word;
      while (j < text.size()) {
        const unsigned char d = static_cast<unsigned char>(text[j]);
        if (d >= 128 || !std::isalnum(d)) break;
        word.push_back(static_cast<char>(std::tolower(d)));
        ++j;
      }
      out.push_back(std::move(word));
      i = j;
    } else {
      ++i;
    }
  }
  return out;
}

std::string random_text(std::uint64_t seed, std::size_t n) {
  static constexpr char alphabet[] =
      "abcdefghijklmnopqrstuvwxyzABCDEFGHIJKLMNOPQRSTUVWXYZ0123456789 .,;:!?-_()\n\t\xc3\xa9";
  std::string out;
  out.reserve(n);
  std::uint64_t rng = seed;
  for (std::size_t i = 0; i < n; ++i) {
    out.push_back(alphabet[splitmix64(rng) % (sizeof(alphabet) - 1)]);
  }
  return out;
}

// Source task that synthesizes records locally and feeds them straight to
// the emit callback; the record content is `values[i]`.
SourceTask local_source(std::vector<std::string> values, FakeClock* clock = nullptr,
                        Micros step = Micros{0}) {
  return [values = std::move(values), clock, step](const client::RecordEmit& emit) {
    std::uint64_t offset = 0;
    for (const std::string& v : values) {
      if (clock) clock->advance(step);
      const Bytes bytes = to_bytes(v);
      emit(0, offset++, RecordView{{}, BytesView(bytes.data(), bytes.size())});
    }
    client::ClientReport report;
    report.client_id = "local";
    report.total_records = values.size();
    return report;
  };
}

}  // namespace

TEST_CASE("tokenizer splits, lowercases and drops empties") {
  std::vector<std::string> tokens;
  auto capture = [&](std::string_view t) { tokens.emplace_back(t); };

  tokenize("Hello, hello world", capture);
  CHECK(tokens == std::vector<std::string>{"hello", "hello", "world"});

  tokens.clear();
  tokenize("", capture);
  CHECK(tokens.empty());

  tokens.clear();
  tokenize("  ,,!!  ", capture);
  CHECK(tokens.empty());

  tokens.clear();
  tokenize("a1-b2 C3\xc3\xa9ok", capture);  // multi-byte sequence acts as a separator
  CHECK(tokens == std::vector<std::string>{"a1", "b2", "c3", "ok"});
}

TEST_CASE("tokenizer agrees with the reference scan on random text") {
  const std::string text = random_text(99, 1 << 20);
  std::vector<std::string> tokens;
  tokenize(text, [&](std::string_view t) { tokens.emplace_back(t); });
  CHECK(tokens == oracle_tokens(text));
  CHECK(tokens.size() > 10000);
}

TEST_CASE("filter predicate is a raw substring match") {
  const Bytes value = to_bytes("error: connection reset by peer");
  CHECK(value_contains(value, ""));
  CHECK(value_contains(value, "error"));
  CHECK(value_contains(value, "reset by"));
  CHECK(value_contains(value, "peer"));
  CHECK(!value_contains(value, "peers"));
  CHECK(!value_contains(value, "ERROR"));

  // Oracle equality over random payloads.
  std::uint64_t rng = 4;
  int passed = 0;
  int oracle = 0;
  for (int i = 0; i < 2000; ++i) {
    const std::string text = random_text(splitmix64(rng), 64);
    if (value_contains(to_bytes(text), "ab")) ++passed;
    if (text.find("ab") != std::string::npos) ++oracle;
  }
  CHECK(passed == oracle);
  CHECK(passed > 0);
}

TEST_CASE("keyed sum emits running totals") {
  KeyedSum sums;
  CHECK(sums.add("a", 1) == 1);
  CHECK(sums.add("a", 1) == 2);
  CHECK(sums.add("b", 5) == 5);
  CHECK(sums.add("a", 3) == 5);
  const auto totals = sums.sorted_totals();
  CHECK(totals.at("a") == 5);
  CHECK(totals.at("b") == 5);
}

TEST_CASE("window specs are validated") {
  CHECK_THROWS_AS(validate(WindowSpec{WindowKind::Count, 0, 1}), std::invalid_argument);
  CHECK_THROWS_AS(validate(WindowSpec{WindowKind::Count, 3, 4}), std::invalid_argument);
  CHECK_THROWS_AS(validate(WindowSpec{WindowKind::Count, 3, 0}), std::invalid_argument);
  CHECK_THROWS_AS(validate(WindowSpec{WindowKind::Time, 5, 2}), std::invalid_argument);
  CHECK_NOTHROW(validate(WindowSpec{WindowKind::Time, 5'000'000, 1'000'000}));
}

TEST_CASE("count window emits on size then every slide") {
  SUBCASE("tumbling: size 3 slide 3") {
    CountWindow w({WindowKind::Count, 3, 3});
    std::vector<std::int64_t> sums;
    for (int i = 0; i < 6; ++i) w.add("a", 1, [&](const WindowEmission& e) { sums.push_back(e.sum); });
    CHECK(sums == std::vector<std::int64_t>{3, 3});
  }

  SUBCASE("sliding: size 3 slide 1") {
    CountWindow w({WindowKind::Count, 3, 1});
    std::vector<std::int64_t> sums;
    for (int i = 0; i < 8; ++i) w.add("a", 1, [&](const WindowEmission& e) { sums.push_back(e.sum); });
    CHECK(sums == std::vector<std::int64_t>(6, 3));
  }

  SUBCASE("random values match a brute-force sliding sum") {
    const int size = 5;
    const int slide = 2;
    CountWindow w({WindowKind::Count, size, slide});
    std::uint64_t rng = 31;
    std::map<std::string, std::vector<std::int64_t>> history;
    std::vector<WindowEmission> got;
    for (int i = 0; i < 500; ++i) {
      const std::string key(1, static_cast<char>('a' + splitmix64(rng) % 3));
      const std::int64_t v = static_cast<std::int64_t>(splitmix64(rng) % 100);
      history[key].push_back(v);
      w.add(key, v, [&](const WindowEmission& e) { got.push_back(e); });
    }
    std::vector<WindowEmission> expect;
    for (const auto& [key, values] : history) {
      for (std::size_t end = size; end <= values.size(); end += slide) {
        std::int64_t sum = 0;
        for (std::size_t i = end - size; i < end; ++i) sum += values[i];
        expect.push_back({static_cast<std::int64_t>(end), key, sum});
      }
    }
    auto order = [](const WindowEmission& a, const WindowEmission& b) {
      return std::tie(a.key, a.tick) < std::tie(b.key, b.tick);
    };
    std::sort(got.begin(), got.end(), order);
    std::sort(expect.begin(), expect.end(), order);
    REQUIRE(got.size() == expect.size());
    for (std::size_t i = 0; i < got.size(); ++i) {
      CHECK(got[i].key == expect[i].key);
      CHECK(got[i].tick == expect[i].tick);
      CHECK(got[i].sum == expect[i].sum);
    }
  }
}

TEST_CASE("time window replays a synthetic timeline exactly") {
  // 5 s window sliding every 1 s, events placed on a made-up timeline.
  const WindowSpec spec{WindowKind::Time, 5'000'000, 1'000'000};
  TimeWindow w(spec, Micros{0});

  struct Event {
    std::int64_t at_us;
    const char* key;
    std::int64_t v;
  };
  std::vector<Event> events;
  std::uint64_t rng = 7;
  for (int i = 0; i < 3000; ++i) {
    events.push_back({static_cast<std::int64_t>(splitmix64(rng) % 12'000'000),
                      splitmix64(rng) % 2 ? "x" : "y", 1});
  }
  std::sort(events.begin(), events.end(),
            [](const Event& a, const Event& b) { return a.at_us < b.at_us; });

  std::vector<WindowEmission> got;
  auto capture = [&](const WindowEmission& e) { got.push_back(e); };
  for (const Event& e : events) {
    w.advance_to(Micros{e.at_us}, capture);  // ticks fire as time passes
    w.add(e.key, e.v, Micros{e.at_us});
  }
  w.advance_to(Micros{17'000'000}, capture);  // flush every window touching data

  // Oracle: tick t sums events with arrival in [(t-4)s, (t+1)s).
  std::vector<WindowEmission> expect;
  for (std::int64_t t = 0; t < 17; ++t) {
    std::map<std::string, std::int64_t> sums;
    for (const Event& e : events) {
      const std::int64_t b = e.at_us / 1'000'000;
      if (b >= t - 4 && b <= t) sums[e.key] += e.v;
    }
    for (const auto& [key, sum] : sums) expect.push_back({t, key, sum});
  }
  REQUIRE(got.size() == expect.size());
  for (std::size_t i = 0; i < got.size(); ++i) {
    CHECK(got[i].tick == expect[i].tick);
    CHECK(got[i].key == expect[i].key);
    CHECK(got[i].sum == expect[i].sum);
  }
}

TEST_CASE("throughput collector keeps one sample per task-second") {
  ThroughputCollector c;
  c.add("map", 0, 0, 60);
  c.add("map", 0, 0, 40);  // same cell accumulates
  c.add("map", 1, 0, 10);
  c.add("map", 0, 1, 7);
  c.add("source", 0, 0, 5);

  const auto samples = c.samples();
  CHECK(samples.size() == 4);
  CHECK(c.total("map") == 117);
  CHECK(c.total("source") == 5);

  const auto agg = c.aggregate("map");
  REQUIRE(agg.size() == 2);
  CHECK(agg[0] == std::pair<std::int64_t, std::uint64_t>{0, 110});
  CHECK(agg[1] == std::pair<std::int64_t, std::uint64_t>{1, 7});

  std::ostringstream csv;
  c.write_csv(csv);
  CHECK(csv.str() ==
        "second,task_id,stage,records\n"
        "0,0,map,100\n"
        "1,0,map,7\n"
        "0,1,map,10\n"
        "0,0,source,5\n");
}

TEST_CASE("nearest-rank percentile") {
  CHECK(nearest_rank({80, 100, 120}, 50.0) == 100);
  CHECK(nearest_rank({120, 80, 100, 90}, 50.0) == 90);
  CHECK(nearest_rank({5}, 50.0) == 5);
  CHECK(nearest_rank({1, 2, 3, 4}, 100.0) == 4);
  CHECK_THROWS_AS(nearest_rank({}, 50.0), std::invalid_argument);

  ThroughputCollector c;
  // Seconds 0..5; warmup 2 and the trailing second excluded -> {200,90,110}.
  const std::uint64_t series[] = {1000, 900, 200, 90, 110, 30};
  for (int s = 0; s < 6; ++s) c.add("map", 0, s, series[s]);
  CHECK(p50_aggregate(c, "map", 2) == 110);
  CHECK(p50_aggregate(c, "missing", 2) == 0);
}

TEST_CASE("bounded queue blocks at capacity and never overshoots") {
  BoundedQueue<int> q(8);
  std::atomic<int> consumed{0};
  std::atomic<bool> overshoot{false};

  std::vector<std::thread> producers;
  for (int p = 0; p < 3; ++p) {
    producers.emplace_back([&, p] {
      for (int i = 0; i < 500; ++i) {
        q.push(p * 1000 + i);
        if (q.size() > 8) overshoot.store(true);
      }
    });
  }
  std::vector<std::thread> consumers;
  for (int c = 0; c < 2; ++c) {
    consumers.emplace_back([&] {
      while (consumed.load() < 1500) {
        if (q.pop(Micros{1000})) consumed.fetch_add(1);
      }
    });
  }
  for (auto& t : producers) t.join();
  for (auto& t : consumers) t.join();
  CHECK(consumed.load() == 1500);
  CHECK(!overshoot.load());
  CHECK(q.max_occupancy() <= 8);

  // A full queue stalls the producer until space opens.
  BoundedQueue<int> full(2);
  full.push(1);
  full.push(2);
  std::atomic<bool> pushed{false};
  std::thread blocked([&] {
    full.push(3);
    pushed.store(true);
  });
  std::this_thread::sleep_for(std::chrono::milliseconds(50));
  CHECK(!pushed.load());
  CHECK(full.pop(Micros{1000}).has_value());
  blocked.join();
  CHECK(pushed.load());

  full.close();
  CHECK(full.pop(Micros{1000}).has_value());   // drains what is left
  CHECK(full.pop(Micros{1000}).has_value());
  CHECK(!full.pop(Micros{1000}).has_value());  // closed and empty
  CHECK(!full.push(9));
}

TEST_CASE("count dataflow conserves records chained and unchained") {
  std::vector<std::string> values(5000, "payload");
  for (bool chained : {true, false}) {
    CAPTURE(chained);
    DataflowConfig cfg;
    cfg.workload = Workload::Count;
    cfg.source_parallelism = 2;
    cfg.map_parallelism = chained ? 2 : 3;
    cfg.chained = chained;
    cfg.queue_capacity = 64;
    cfg.warmup_seconds = 0;
    Dataflow flow(cfg, {local_source(values), local_source(values)});
    DataflowResult result = flow.run();

    CHECK(!result.aborted);
    CHECK(result.source_records == 10000);
    CHECK(result.map_input == 10000);
    CHECK(result.map_output == 10000);
    CHECK(result.metrics->total("source") == 10000);
    CHECK(result.metrics->total("map") == 10000);
    if (!chained) CHECK(result.max_queue_occupancy <= 64);
  }
}

TEST_CASE("filter dataflow matches an independent scan") {
  std::vector<std::string> values;
  std::uint64_t rng = 17;
  std::uint64_t expect = 0;
  for (int i = 0; i < 4000; ++i) {
    values.push_back(random_text(splitmix64(rng), 48));
    if (values.back().find("ab") != std::string::npos) ++expect;
  }
  REQUIRE(expect > 0);

  DataflowConfig cfg;
  cfg.workload = Workload::Filter;
  cfg.source_parallelism = 1;
  cfg.map_parallelism = 2;
  cfg.chained = false;
  cfg.filter_pattern = "ab";
  cfg.warmup_seconds = 0;
  Dataflow flow(cfg, {local_source(values)});
  DataflowResult result = flow.run();

  CHECK(result.map_input == 4000);
  CHECK(result.map_output == expect);

  cfg.filter_pattern = "zqxjzz";
  DataflowResult none = Dataflow(cfg, {local_source(values)}).run();
  CHECK(none.map_output == 0);
}

TEST_CASE("wordcount totals are independent of parallelism and chaining") {
  std::vector<std::string> values;
  std::uint64_t rng = 23;
  for (int i = 0; i < 3000; ++i) values.push_back(random_text(splitmix64(rng), 80));

  // Serial oracle run: one mapper, chained.
  std::map<std::string, std::int64_t> oracle;
  for (const std::string& v : values) {
    tokenize(v, [&](std::string_view t) { ++oracle[std::string(t)]; });
  }
  REQUIRE(!oracle.empty());

  struct Layout {
    std::uint32_t nc;
    std::uint32_t nmap;
    bool chained;
  };
  for (const Layout& layout : {Layout{1, 1, true}, Layout{2, 2, true}, Layout{1, 4, false},
                               Layout{3, 8, false}}) {
    CAPTURE(layout.nc);
    CAPTURE(layout.nmap);
    DataflowConfig cfg;
    cfg.workload = Workload::WordCount;
    cfg.source_parallelism = layout.nc;
    cfg.map_parallelism = layout.nmap;
    cfg.chained = layout.chained;
    cfg.warmup_seconds = 0;

    // Split the same input across the sources.
    std::vector<std::vector<std::string>> shares(layout.nc);
    for (std::size_t i = 0; i < values.size(); ++i) shares[i % layout.nc].push_back(values[i]);
    std::vector<SourceTask> sources;
    for (auto& share : shares) sources.push_back(local_source(std::move(share)));

    DataflowResult result = Dataflow(cfg, std::move(sources)).run();
    CHECK(!result.aborted);
    CHECK(result.word_totals == oracle);
  }
}

TEST_CASE("windowed wordcount equals a brute-force replay of its arrivals") {
  FakeClock clock;
  std::vector<std::string> values;
  std::uint64_t rng = 41;
  for (int i = 0; i < 2000; ++i) values.push_back(random_text(splitmix64(rng), 40));

  DataflowConfig cfg;
  cfg.workload = Workload::WindowedWordCount;
  cfg.source_parallelism = 1;
  cfg.map_parallelism = 2;
  cfg.chained = false;
  cfg.window = {WindowKind::Time, 5'000'000, 1'000'000};
  cfg.warmup_seconds = 0;
  cfg.record_arrivals = true;
  cfg.clock = &clock;

  // Each record arrives 4 ms after the previous one: an 8 s timeline.
  Dataflow flow(cfg, {local_source(values, &clock, Micros{4000})});
  DataflowResult result = flow.run();
  CHECK(!result.aborted);
  REQUIRE(!result.arrival_buckets.empty());

  // Brute force over the recorded arrival buckets, replayed tick by tick up
  // to the last window touching data.
  const std::int64_t per_window = cfg.window.size / cfg.window.slide;
  const std::int64_t last_bucket = result.arrival_buckets.rbegin()->first;
  std::vector<WindowEmission> expect;
  for (std::int64_t t = 0; t <= last_bucket + per_window - 1; ++t) {
    std::map<std::string, std::int64_t> sums;
    for (const auto& [bucket, words] : result.arrival_buckets) {
      if (bucket < t - per_window + 1 || bucket > t) continue;
      for (const auto& [word, n] : words) sums[word] += n;
    }
    for (const auto& [word, sum] : sums) expect.push_back({t, word, sum});
  }

  REQUIRE(result.window_emissions.size() == expect.size());
  for (std::size_t i = 0; i < expect.size(); ++i) {
    CHECK(result.window_emissions[i].tick == expect[i].tick);
    CHECK(result.window_emissions[i].key == expect[i].key);
    CHECK(result.window_emissions[i].sum == expect[i].sum);
  }

  // Every token the sources produced is accounted for in the buckets.
  std::int64_t bucket_tokens = 0;
  for (const auto& [bucket, words] : result.arrival_buckets) {
    for (const auto& [word, n] : words) bucket_tokens += n;
  }
  std::int64_t oracle_tokens_total = 0;
  for (const std::string& v : values) {
    tokenize(v, [&](std::string_view) { ++oracle_tokens_total; });
  }
  CHECK(bucket_tokens == oracle_tokens_total);
}

TEST_CASE("dataflow configuration is validated") {
  DataflowConfig cfg;
  cfg.source_parallelism = 2;
  cfg.map_parallelism = 3;
  cfg.chained = true;
  CHECK_THROWS_AS(Dataflow(cfg, {local_source({}), local_source({})}), std::invalid_argument);

  DataflowConfig ok;
  ok.source_parallelism = 2;
  CHECK_THROWS_AS(Dataflow(ok, {local_source({})}), std::invalid_argument);

  CHECK(default_chaining(4, 4));
  CHECK(!default_chaining(4, 8));
}
