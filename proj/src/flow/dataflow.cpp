#include "rivulet/flow/dataflow.hpp"

#include <algorithm>
#include <atomic>
#include <barrier>
#include <optional>
#include <stdexcept>
#include <thread>

#include "rivulet/flow/queue.hpp"

namespace rivulet::flow {

Workload workload_from_name(std::string_view name) {
  if (name == "count") return Workload::Count;
  if (name == "filter") return Workload::Filter;
  if (name == "wordcount") return Workload::WordCount;
  if (name == "windowed_wordcount") return Workload::WindowedWordCount;
  throw std::invalid_argument("unknown workload: " + std::string(name));
}

std::string_view workload_name(Workload w) {
  switch (w) {
    case Workload::Count: return "count";
    case Workload::Filter: return "filter";
    case Workload::WordCount: return "wordcount";
    case Workload::WindowedWordCount: return "windowed_wordcount";
  }
  return "?";
}

namespace {

struct RecordMsg {
  Micros arrival{0};
  Bytes value;
};

struct PairMsg {
  Micros arrival{0};
  std::string word;
  std::int64_t value = 1;
};

constexpr Micros kPopSlice{2000};

}  // namespace

struct Dataflow::Mapper {
  std::unique_ptr<BoundedQueue<RecordMsg>> records;  // absent when chained
  // Keyed exchange lane. Effectively unbounded: peer map tasks must never
  // block each other mid-swap, or the exchange could deadlock.
  BoundedQueue<PairMsg> pairs{std::size_t(1) << 40};
  KeyedSum sums;
  std::optional<TimeWindow> time_window;
  std::optional<CountWindow> count_window;
  std::vector<WindowEmission> emissions;
  std::map<std::int64_t, std::map<std::string, std::int64_t>> arrivals;
  std::uint64_t records_in = 0;
  std::uint64_t output = 0;
  std::int64_t max_bucket = -1;
};

Dataflow::Dataflow(DataflowConfig cfg, std::vector<SourceTask> sources)
    : cfg_(std::move(cfg)), sources_(std::move(sources)) {
  if (cfg_.source_parallelism == 0 || cfg_.map_parallelism == 0) {
    throw std::invalid_argument("parallelism must be at least 1");
  }
  if (sources_.size() != cfg_.source_parallelism) {
    throw std::invalid_argument("source task count must match source_parallelism");
  }
  if (cfg_.chained && cfg_.source_parallelism != cfg_.map_parallelism) {
    throw std::invalid_argument("chaining requires matching stage parallelism");
  }
  if (cfg_.queue_capacity == 0) throw std::invalid_argument("queue capacity must be positive");
  if (cfg_.workload == Workload::WindowedWordCount) validate(cfg_.window);
}

DataflowResult Dataflow::run() {
  const Clock& clock = cfg_.clock ? *cfg_.clock : SteadyClock::instance();
  const Micros start = clock.now();
  const std::uint32_t nmap = cfg_.map_parallelism;
  auto metrics = std::make_shared<ThroughputCollector>();
  auto second_of = [&](Micros t) { return (t - start).count() / 1'000'000; };

  std::vector<std::unique_ptr<Mapper>> mappers;
  for (std::uint32_t i = 0; i < nmap; ++i) {
    auto m = std::make_unique<Mapper>();
    if (!cfg_.chained) {
      m->records = std::make_unique<BoundedQueue<RecordMsg>>(cfg_.queue_capacity);
    }
    if (cfg_.workload == Workload::WindowedWordCount) {
      if (cfg_.window.kind == WindowKind::Time) {
        m->time_window.emplace(cfg_.window, start);
      } else {
        m->count_window.emplace(cfg_.window);
      }
    }
    mappers.push_back(std::move(m));
  }

  auto emit_window = [&](Mapper& m) {
    return [&m](const WindowEmission& e) { m.emissions.push_back(e); };
  };

  // Aggregation side of the keyed exchange; single-writer per mapper.
  auto process_pair = [&](std::uint32_t idx, const PairMsg& p) {
    Mapper& m = *mappers[idx];
    ++m.output;
    if (cfg_.workload == Workload::WordCount) {
      m.sums.add(p.word, p.value);
      return;
    }
    if (m.time_window) {
      m.time_window->add(p.word, p.value, p.arrival);
      m.max_bucket = std::max(m.max_bucket, m.time_window->bucket_of(p.arrival));
      if (cfg_.record_arrivals) m.arrivals[m.time_window->bucket_of(p.arrival)][p.word] += p.value;
    } else {
      m.count_window->add(p.word, p.value, emit_window(m));
    }
  };

  auto drain_pairs = [&](std::uint32_t idx) {
    while (auto p = mappers[idx]->pairs.try_pop()) process_pair(idx, *p);
  };

  auto process_record = [&](std::uint32_t idx, const RecordMsg& rec) {
    Mapper& m = *mappers[idx];
    ++m.records_in;
    metrics->add("map", idx, second_of(clock.now()), 1);
    switch (cfg_.workload) {
      case Workload::Count:
        ++m.output;
        break;
      case Workload::Filter:
        if (value_contains(rec.value, cfg_.filter_pattern)) ++m.output;
        break;
      case Workload::WordCount:
      case Workload::WindowedWordCount:
        tokenize(as_string_view(rec.value), [&](std::string_view word) {
          const BytesView word_bytes(reinterpret_cast<const std::uint8_t*>(word.data()),
                                     word.size());
          const std::uint32_t owner = static_cast<std::uint32_t>(fnv1a64(word_bytes) % nmap);
          if (owner == idx) {
            process_pair(owner, PairMsg{rec.arrival, std::string(word), 1});
          } else {
            mappers[owner]->pairs.push(PairMsg{rec.arrival, std::string(word), 1});
          }
        });
        break;
    }
  };

  // Time windows bucket silently while data is in flight and fire all their
  // ticks here, by replaying the arrival timeline once the task's pairs have
  // drained. Firing ticks off the live clock instead would race the slide
  // grid against queue latency and drop late pairs.
  auto finalize_windows = [&](std::uint32_t idx) {
    Mapper& m = *mappers[idx];
    if (!m.time_window || m.max_bucket < 0) return;
    const std::int64_t per_window = cfg_.window.size / cfg_.window.slide;
    const std::int64_t last_tick = m.max_bucket + per_window - 1;
    m.time_window->advance_to(start + Micros{(last_tick + 1) * cfg_.window.slide},
                              emit_window(m));
  };

  std::atomic<std::uint64_t> source_records{0};
  std::atomic<bool> failed{false};
  std::vector<client::ClientReport> source_reports(sources_.size());

  // Unchained layout: dedicated map workers behind bounded record queues.
  std::vector<std::thread> map_threads;
  std::barrier<> pairs_flushed(static_cast<std::ptrdiff_t>(nmap));
  if (!cfg_.chained) {
    for (std::uint32_t i = 0; i < nmap; ++i) {
      map_threads.emplace_back([&, i] {
        Mapper& m = *mappers[i];
        for (;;) {
          drain_pairs(i);
          auto rec = m.records->pop(kPopSlice);
          if (rec) {
            process_record(i, *rec);
          } else if (m.records->closed()) {
            break;
          }
        }
        // All records drained everywhere after this point, so no new pairs
        // can appear; one final sweep empties the exchange.
        pairs_flushed.arrive_and_wait();
        drain_pairs(i);
        finalize_windows(i);
      });
    }
  }

  std::vector<std::thread> source_threads;
  for (std::uint32_t i = 0; i < sources_.size(); ++i) {
    source_threads.emplace_back([&, i] {
      std::uint64_t rr = 0;
      client::RecordEmit emit = [&](std::uint32_t, std::uint64_t, const RecordView& rec) {
        const Micros arrival = clock.now();
        metrics->add("source", i, second_of(arrival), 1);
        source_records.fetch_add(1, std::memory_order_relaxed);
        RecordMsg msg{arrival, Bytes(rec.value.begin(), rec.value.end())};
        if (cfg_.chained) {
          process_record(i, msg);
          drain_pairs(i);
        } else {
          mappers[rr++ % nmap]->records->push(std::move(msg));
        }
      };
      source_reports[i] = sources_[i](emit);
      if (source_reports[i].aborted) failed.store(true);
    });
  }
  for (auto& t : source_threads) t.join();

  if (!cfg_.chained) {
    for (auto& m : mappers) m->records->close();
    for (auto& t : map_threads) t.join();
  } else {
    // Sources have stopped; drain the exchange single-threaded.
    for (std::uint32_t i = 0; i < nmap; ++i) drain_pairs(i);
    for (std::uint32_t i = 0; i < nmap; ++i) finalize_windows(i);
  }

  DataflowResult result;
  result.source_reports = std::move(source_reports);
  result.source_records = source_records.load();
  result.metrics = metrics;
  for (std::uint32_t i = 0; i < nmap; ++i) {
    Mapper& m = *mappers[i];
    result.map_input += m.records_in;
    result.map_output += m.output;
    for (const auto& [word, total] : m.sums.totals()) result.word_totals[word] = total;
    result.window_emissions.insert(result.window_emissions.end(), m.emissions.begin(),
                                   m.emissions.end());
    for (const auto& [bucket, words] : m.arrivals) {
      for (const auto& [word, n] : words) result.arrival_buckets[bucket][word] += n;
    }
    if (m.records) {
      result.max_queue_occupancy = std::max(result.max_queue_occupancy, m.records->max_occupancy());
    }
  }
  std::sort(result.window_emissions.begin(), result.window_emissions.end(),
            [](const WindowEmission& a, const WindowEmission& b) {
              return std::tie(a.tick, a.key) < std::tie(b.tick, b.key);
            });
  result.p50_source = p50_aggregate(*metrics, "source", cfg_.warmup_seconds);
  result.p50_map = p50_aggregate(*metrics, "map", cfg_.warmup_seconds);
  if (failed.load()) {
    result.aborted = true;
    for (const auto& r : result.source_reports) {
      if (r.aborted) result.error = r.error;
    }
  }
  return result;
}

}  // namespace rivulet::flow
