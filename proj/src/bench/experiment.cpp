#include "rivulet/bench/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <filesystem>
#include <fstream>
#include <thread>

#include "json.hpp"
#include "rivulet/bench/corpus.hpp"
#include "rivulet/broker/broker.hpp"
#include "rivulet/client/producer.hpp"
#include "rivulet/client/pull_source.hpp"
#include "rivulet/client/push_source.hpp"
#include "rivulet/client/record_source.hpp"
#include "rivulet/wire/loopback.hpp"

namespace rivulet::bench {
namespace {

constexpr const char* kStream = kBenchStream;

void run_single(const ExperimentSpec& spec, const RunOptions& opts, ExperimentResult& res) {
  using namespace std::chrono;

  std::shared_ptr<const std::vector<Bytes>> corpus;
  if (workload_needs_corpus(spec.workload) && !spec.corpus_path.empty()) {
    corpus = load_corpus(spec.corpus_path, spec.recs);
  }

  // Replica first: the primary holds a connection into its hub, so the
  // backup side must outlive the primary.
  std::unique_ptr<broker::Broker> backup;
  std::unique_ptr<wire::LoopbackHub> backup_hub;
  std::unique_ptr<wire::ClientTransport> backup_conn;
  if (spec.replication == 2) {
    broker::BrokerConfig bcfg;
    bcfg.worker_count = spec.nbc;
    bcfg.segment_bytes = spec.segment_bytes;
    bcfg.service_floor = spec.service_floor;
    backup = std::make_unique<broker::Broker>(bcfg);
    backup->create_stream(kStream, spec.ns);
    backup->start();
    backup_hub = std::make_unique<wire::LoopbackHub>(*backup);
    backup_conn = backup_hub->connect();
  }

  broker::BrokerConfig cfg;
  cfg.worker_count = spec.nbc;
  cfg.segment_bytes = spec.segment_bytes;
  cfg.replication = static_cast<int>(spec.replication);
  cfg.service_floor = spec.service_floor;
  broker::Broker broker(cfg, std::move(backup_conn));
  broker.create_stream(kStream, spec.ns);
  broker.start();
  wire::LoopbackHub hub(broker);

  // Delivery tracking: one cursor per partition; every emit must carry the
  // next offset for its partition (partitions are owned by single tasks).
  std::vector<std::atomic<std::uint64_t>> next_expected(spec.ns);
  std::vector<std::atomic<std::uint64_t>> consumed_by_task(spec.nc);
  std::atomic<std::uint64_t> violations{0};

  const Micros prod_cap = spec.duration_seconds
                              ? Micros{static_cast<std::int64_t>(spec.duration_seconds) * 1'000'000}
                              : Micros{3'600'000'000};
  const Micros cons_cap = prod_cap + opts.drain_grace;

  // Producer -> done flag handshake: heads and per-task expectations are
  // written before the flag flips, so a consumer that observes the flag also
  // observes its final target.
  std::atomic<bool> producers_done{false};
  auto cons_parts = assign_partitions(spec.ns, spec.nc);
  std::vector<std::uint64_t> expected_by_task(spec.nc, 0);

  auto plans = plan_producers(spec);
  res.producer_reports.resize(spec.np);
  std::vector<std::thread> prod_threads;
  prod_threads.reserve(spec.np);
  for (std::uint32_t i = 0; i < spec.np; ++i) {
    prod_threads.emplace_back([&, i] {
      auto conn = hub.connect();
      client::ProducerConfig pc;
      pc.producer_id = "producer-" + std::to_string(i);
      pc.stream = kStream;
      pc.partitions = plans[i].partitions;
      pc.chunk_size = spec.cs_producer;
      pc.record_size = spec.recs;
      pc.seal_timeout = spec.seal_timeout;
      client::Producer producer(*conn, pc);

      client::SyntheticSource synth(spec.recs, plans[i].seed);
      std::unique_ptr<client::CorpusSource> corp;
      client::RecordSource* src = &synth;
      if (corpus) {
        corp = std::make_unique<client::CorpusSource>(corpus);
        src = corp.get();
      }
      std::unique_ptr<client::PacedSource> paced;
      if (plans[i].pace_per_sec) {
        paced = std::make_unique<client::PacedSource>(*src, plans[i].pace_per_sec);
        src = paced.get();
      }
      std::unique_ptr<client::LimitedSource> limited;
      if (plans[i].record_limit) {
        limited = std::make_unique<client::LimitedSource>(*src, plans[i].record_limit);
        src = limited.get();
      }
      res.producer_reports[i] = producer.run(*src, prod_cap);
    });
  }

  std::thread waiter([&] {
    for (auto& t : prod_threads) t.join();
    std::vector<std::uint64_t> heads(spec.ns);
    for (std::uint32_t p = 0; p < spec.ns; ++p) heads[p] = broker.head_offset(kStream, p);
    for (std::uint32_t i = 0; i < spec.nc; ++i) {
      for (std::uint32_t p : cons_parts[i]) expected_by_task[i] += heads[p];
    }
    producers_done.store(true);
  });

  // Wraps the dataflow's emit with offset verification and progress counts.
  auto tracked = [&](const client::RecordEmit& inner, std::uint32_t task) {
    return client::RecordEmit(
        [&, inner, task](std::uint32_t partition, std::uint64_t offset, const RecordView& rec) {
          const std::uint64_t want =
              next_expected[partition].fetch_add(1, std::memory_order_relaxed);
          if (offset != want) violations.fetch_add(1, std::memory_order_relaxed);
          consumed_by_task[task].fetch_add(1, std::memory_order_relaxed);
          inner(partition, offset, rec);
        });
  };

  std::unique_ptr<client::PushGroup> group;
  std::vector<flow::SourceTask> sources;
  sources.reserve(spec.nc);
  if (spec.source_mode == SourceMode::Pull) {
    for (std::uint32_t i = 0; i < spec.nc; ++i) {
      sources.push_back([&, i](const client::RecordEmit& emit) {
        auto conn = hub.connect();
        client::PullSourceConfig sc;
        sc.consumer_id = "consumer-" + std::to_string(i);
        sc.stream = kStream;
        sc.partitions = cons_parts[i];
        sc.max_bytes = static_cast<std::uint32_t>(spec.cs_consumer);
        sc.poll_timeout = spec.poll_timeout;
        client::PullSource src(*conn, sc);
        return src.run(tracked(emit, i), cons_cap, [&] { return producers_done.load(); });
      });
    }
  } else {
    client::PushGroupConfig gc;
    gc.group_id = "bench-group";
    gc.stream = kStream;
    gc.objects_per_consumer = spec.objects_per_consumer;
    gc.object_size = static_cast<std::uint32_t>(spec.cs_consumer);
    for (std::uint32_t i = 0; i < spec.nc; ++i) {
      client::PushMemberConfig mc;
      mc.task_id = i;
      for (std::uint32_t p : cons_parts[i]) mc.partitions.push_back({p, 0});
      gc.members.push_back(std::move(mc));
    }
    group = std::make_unique<client::PushGroup>(broker, hub.connect(), gc);
    for (std::uint32_t i = 0; i < spec.nc; ++i) {
      sources.push_back([&, i](const client::RecordEmit& emit) {
        return group->run_member(i, tracked(emit, i), cons_cap, [&, i] {
          return producers_done.load() &&
                 consumed_by_task[i].load(std::memory_order_relaxed) >= expected_by_task[i];
        });
      });
    }
  }

  flow::DataflowConfig dc;
  dc.workload = flow::workload_from_name(spec.workload);
  dc.source_parallelism = spec.nc;
  dc.map_parallelism = spec.nmap;
  dc.chained = spec.chained < 0 ? flow::default_chaining(spec.nc, spec.nmap) : spec.chained == 1;
  dc.filter_pattern = spec.filter_pattern;
  dc.window = spec.window;
  dc.warmup_seconds = spec.warmup_seconds;
  dc.record_arrivals = spec.record_arrivals;
  flow::Dataflow dataflow(dc, std::move(sources));

  // Peak push-worker gauge, sampled while the run is live.
  std::atomic<bool> sampling{true};
  std::atomic<std::uint32_t> push_max{0};
  std::thread sampler([&] {
    while (sampling.load()) {
      const std::uint32_t now = broker.metrics().push_worker_count();
      std::uint32_t prev = push_max.load();
      while (now > prev && !push_max.compare_exchange_weak(prev, now)) {
      }
      std::this_thread::sleep_for(microseconds(opts.sample_interval.count()));
    }
  });

  const auto wall0 = steady_clock::now();
  flow::DataflowResult flow_res = dataflow.run();
  res.wall_seconds = duration_cast<duration<double>>(steady_clock::now() - wall0).count();

  waiter.join();
  {
    std::uint32_t prev = push_max.load();
    const std::uint32_t now = broker.metrics().push_worker_count();
    while (now > prev && !push_max.compare_exchange_weak(prev, now)) {
    }
  }
  if (group) group->close();
  sampling.store(false);
  sampler.join();
  broker.stop();
  if (backup) backup->stop();

  res.heads.resize(spec.ns);
  res.emitted.resize(spec.ns);
  for (std::uint32_t p = 0; p < spec.ns; ++p) {
    res.heads[p] = broker.head_offset(kStream, p);
    res.emitted[p] = next_expected[p].load();
  }
  res.delivery_violations = violations.load();
  for (const auto& r : res.producer_reports) {
    res.produced_records += r.total_records;
    if (r.aborted && res.error.empty()) res.error = "producer " + r.client_id + ": " + r.error;
  }
  for (const auto& r : flow_res.source_reports) {
    if (r.aborted && res.error.empty()) res.error = "source " + r.client_id + ": " + r.error;
  }
  res.consumed_records = flow_res.source_records;

  const auto& m = broker.metrics();
  for (std::uint8_t t = 1; t <= 10; ++t) {
    const auto type = static_cast<wire::MsgType>(t);
    res.rpcs[wire::msg_type_name(type)] = m.rpcs(type);
  }
  res.pull_rpcs = m.rpcs(wire::MsgType::Pull);
  res.subscribe_rpcs = m.rpcs(wire::MsgType::SubscribePush);
  res.polling_consumers = spec.source_mode == SourceMode::Pull ? spec.nc : 0;
  res.push_workers_max = push_max.load();

  res.producer_p50 = report_p50(res.producer_reports, spec.warmup_seconds);
  res.consumer_p50 = flow_res.p50_source;
  res.word_totals = std::move(flow_res.word_totals);
  res.window_emissions = std::move(flow_res.window_emissions);
  res.arrival_buckets = std::move(flow_res.arrival_buckets);
  res.map_output = flow_res.map_output;
  res.max_queue_occupancy = flow_res.max_queue_occupancy;
  res.source_reports = std::move(flow_res.source_reports);
  res.stage_metrics = flow_res.metrics;
  if (flow_res.aborted && res.error.empty()) res.error = flow_res.error;
  res.ok = res.error.empty();
}

}  // namespace

ExperimentResult run_experiment(const ExperimentSpec& spec, const RunOptions& opts) {
  ExperimentResult res;
  res.spec = spec;
  try {
    validate_spec(spec);
    run_single(spec, opts, res);
  } catch (const std::exception& e) {
    res.ok = false;
    if (res.error.empty()) res.error = e.what();
  }
  if (!opts.out_dir.empty()) {
    try {
      write_result_files(res, opts.out_dir);
    } catch (const std::exception& e) {
      res.ok = false;
      res.error = "writing results: " + std::string(e.what());
    }
  }
  return res;
}

std::uint64_t report_p50(const std::vector<client::ClientReport>& reports,
                         std::int64_t warmup_seconds) {
  std::map<std::int64_t, std::uint64_t> sums;
  for (const auto& r : reports) {
    for (const auto& s : r.seconds) sums[s.second] += s.records;
  }
  if (sums.empty()) return 0;
  const std::int64_t last = sums.rbegin()->first;
  std::vector<std::uint64_t> trimmed;
  for (const auto& [sec, records] : sums) {
    if (sec >= warmup_seconds && sec != last) trimmed.push_back(records);
  }
  if (trimmed.empty()) {
    for (const auto& [sec, records] : sums) trimmed.push_back(records);
  }
  return flow::nearest_rank(std::move(trimmed), 50.0);
}

std::string result_json(const ExperimentResult& r) {
  nlohmann::json j;
  j["spec"]["id"] = spec_id(r.spec);
  j["spec"]["name"] = r.spec.name;
  j["spec"]["workload"] = r.spec.workload;
  j["spec"]["source_mode"] = std::string(source_mode_name(r.spec.source_mode));
  j["ok"] = r.ok;
  j["error"] = r.error;
  j["producer_p50"] = r.producer_p50;
  j["consumer_p50"] = r.consumer_p50;
  j["produced_records"] = r.produced_records;
  j["consumed_records"] = r.consumed_records;
  j["wall_seconds"] = r.wall_seconds;
  j["heads"] = r.heads;
  j["emitted"] = r.emitted;
  j["delivery_violations"] = r.delivery_violations;
  j["rpcs"] = r.rpcs;
  j["pull_rpcs"] = r.pull_rpcs;
  j["subscribe_rpcs"] = r.subscribe_rpcs;
  j["polling_consumers"] = r.polling_consumers;
  j["push_workers_max"] = r.push_workers_max;
  j["map_output"] = r.map_output;
  j["max_queue_occupancy"] = r.max_queue_occupancy;
  j["distinct_words"] = r.word_totals.size();
  std::int64_t token_total = 0;
  for (const auto& [_, n] : r.word_totals) token_total += n;
  j["token_total"] = token_total;
  j["window_emission_count"] = r.window_emissions.size();
  return j.dump(2);
}

void write_result_files(const ExperimentResult& r, const std::string& dir) {
  namespace fs = std::filesystem;
  fs::create_directories(dir);
  {
    std::ofstream out(fs::path(dir) / "producers.csv");
    client::write_reports_csv(out, r.producer_reports);
  }
  {
    std::ofstream out(fs::path(dir) / "sources.csv");
    client::write_reports_csv(out, r.source_reports);
  }
  if (r.stage_metrics) {
    std::ofstream out(fs::path(dir) / "stages.csv");
    r.stage_metrics->write_csv(out);
  }
  {
    std::ofstream out(fs::path(dir) / "summary.json");
    out << result_json(r) << '\n';
  }
}

}  // namespace rivulet::bench
