#include "rivulet/bench/orchestrator.hpp"

#include <fcntl.h>
#include <sys/wait.h>
#include <unistd.h>

#include <atomic>
#include <csignal>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <thread>

#include "json.hpp"
#include "rivulet/bench/corpus.hpp"
#include "rivulet/bench/experiment.hpp"
#include "rivulet/broker/broker.hpp"
#include "rivulet/client/producer.hpp"
#include "rivulet/client/pull_source.hpp"
#include "rivulet/client/push_source.hpp"
#include "rivulet/client/record_source.hpp"
#include "rivulet/wire/loopback.hpp"
#include "rivulet/wire/tcp.hpp"

namespace rivulet::bench {
namespace {

namespace fs = std::filesystem;
using namespace std::chrono;

constexpr Micros kDrainGrace{5'000'000};

volatile std::sig_atomic_t g_terminate = 0;
void on_terminate(int) { g_terminate = 1; }

// Publish-by-rename so readers never observe a partial write.
void write_file_atomic(const std::string& path, const std::string& content) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    out << content;
  }
  fs::rename(tmp, path);
}

std::string wait_for_file(const std::string& path, Micros timeout) {
  const auto deadline = steady_clock::now() + microseconds(timeout.count());
  while (steady_clock::now() < deadline) {
    std::ifstream in(path, std::ios::binary);
    if (in) {
      std::string line;
      std::getline(in, line);
      if (!line.empty()) return line;
    }
    std::this_thread::sleep_for(20ms);
  }
  throw std::runtime_error("timed out waiting for " + path);
}

void write_role_summary(const std::string& out_dir, const std::string& role, bool ok,
                        const std::string& error, std::uint64_t records, std::uint64_t rpcs,
                        std::uint64_t p50, std::uint64_t violations,
                        const std::vector<std::uint64_t>& heads,
                        const std::vector<std::uint64_t>& emitted) {
  nlohmann::json j;
  j["role"] = role;
  j["ok"] = ok;
  j["error"] = error;
  j["total_records"] = records;
  j["total_rpcs"] = rpcs;
  j["p50"] = p50;
  j["violations"] = violations;
  j["heads"] = heads;
  j["emitted"] = emitted;
  write_file_atomic((fs::path(out_dir) / "summary.json").string(), j.dump(2) + "\n");
}

nlohmann::json read_summary(const std::string& out_dir) {
  std::ifstream in(fs::path(out_dir) / "summary.json");
  if (!in) throw std::runtime_error("missing summary in " + out_dir);
  return nlohmann::json::parse(in);
}

pid_t spawn_process(const std::vector<std::string>& argv, const std::string& log_path) {
  const pid_t pid = fork();
  if (pid < 0) throw std::runtime_error("fork failed");
  if (pid == 0) {
    const int fd = ::open(log_path.c_str(), O_WRONLY | O_CREAT | O_TRUNC, 0644);
    if (fd >= 0) {
      ::dup2(fd, 1);
      ::dup2(fd, 2);
      ::close(fd);
    }
    std::vector<char*> args;
    args.reserve(argv.size() + 1);
    for (const std::string& a : argv) args.push_back(const_cast<char*>(a.c_str()));
    args.push_back(nullptr);
    ::execv(argv[0].c_str(), args.data());
    _exit(127);
  }
  return pid;
}

// Exit status, or -1 after a timeout kill.
int wait_exit(pid_t pid, Micros timeout) {
  const auto deadline = steady_clock::now() + microseconds(timeout.count());
  while (true) {
    int status = 0;
    const pid_t r = ::waitpid(pid, &status, WNOHANG);
    if (r == pid) {
      if (WIFEXITED(status)) return WEXITSTATUS(status);
      if (WIFSIGNALED(status)) return 128 + WTERMSIG(status);
      return -1;
    }
    if (steady_clock::now() >= deadline) {
      ::kill(pid, SIGKILL);
      ::waitpid(pid, &status, 0);
      return -1;
    }
    std::this_thread::sleep_for(20ms);
  }
}

broker::BrokerConfig broker_config(const ExperimentSpec& spec, bool replica) {
  broker::BrokerConfig cfg;
  cfg.worker_count = spec.nbc;
  cfg.segment_bytes = spec.segment_bytes;
  cfg.replication = replica ? 1 : static_cast<int>(spec.replication);
  cfg.service_floor = spec.service_floor;
  return cfg;
}

}  // namespace

std::pair<std::string, std::uint16_t> split_addr(const std::string& addr) {
  const std::size_t colon = addr.rfind(':');
  if (colon == std::string::npos || colon == 0 || colon + 1 == addr.size()) {
    throw std::invalid_argument("expected host:port, got: " + addr);
  }
  const int port = std::stoi(addr.substr(colon + 1));
  if (port <= 0 || port > 65535) throw std::invalid_argument("bad port in " + addr);
  return {addr.substr(0, colon), static_cast<std::uint16_t>(port)};
}

int run_broker_host(const ExperimentSpec& spec, const std::string& host,
                    const std::string& port_file, std::uint32_t run_seconds) {
  std::signal(SIGTERM, on_terminate);
  std::signal(SIGINT, on_terminate);

  broker::Broker broker(broker_config(spec, /*replica=*/true));
  broker.create_stream(kBenchStream, spec.ns);
  broker.start();
  wire::TcpServer server(host, 0, broker);
  server.start();
  if (!port_file.empty()) write_file_atomic(port_file, std::to_string(server.port()) + "\n");
  std::printf("broker listening on %s:%u\n", host.c_str(), server.port());
  std::fflush(stdout);

  const auto deadline = steady_clock::now() + seconds(run_seconds);
  while (!g_terminate && steady_clock::now() < deadline) {
    std::this_thread::sleep_for(50ms);
  }
  server.stop();
  broker.stop();
  return 0;
}

int run_consumer_host(const ExperimentSpec& spec, const std::string& host,
                      const std::string& port_file, const std::string& backup_addr,
                      const std::string& out_dir) {
  validate_spec(spec);
  fs::create_directories(out_dir);

  std::unique_ptr<wire::ClientTransport> backup_conn;
  if (spec.replication == 2) {
    const auto [bhost, bport] = split_addr(backup_addr);
    backup_conn = std::make_unique<wire::TcpClient>(bhost, bport);
  }
  broker::Broker broker(broker_config(spec, /*replica=*/false), std::move(backup_conn));
  broker.create_stream(kBenchStream, spec.ns);
  broker.start();
  wire::TcpServer server(host, 0, broker);
  server.start();
  wire::LoopbackHub hub(broker);
  if (!port_file.empty()) write_file_atomic(port_file, std::to_string(server.port()) + "\n");
  std::printf("consumer broker listening on %s:%u\n", host.c_str(), server.port());
  std::fflush(stdout);

  std::vector<std::atomic<std::uint64_t>> next_expected(spec.ns);
  std::atomic<std::uint64_t> consumed_total{0};
  std::atomic<std::uint64_t> violations{0};
  auto tracked = [&](const client::RecordEmit& inner) {
    return client::RecordEmit(
        [&, inner](std::uint32_t partition, std::uint64_t offset, const RecordView& rec) {
          const std::uint64_t want =
              next_expected[partition].fetch_add(1, std::memory_order_relaxed);
          if (offset != want) violations.fetch_add(1, std::memory_order_relaxed);
          consumed_total.fetch_add(1, std::memory_order_relaxed);
          inner(partition, offset, rec);
        });
  };
  // Cross-process stop: a record-limited run drains to exactly the limit; a
  // duration run stops on its own clock plus grace.
  auto finished = [&] {
    return spec.record_limit != 0 &&
           consumed_total.load(std::memory_order_relaxed) >= spec.record_limit;
  };
  const Micros cons_cap =
      (spec.duration_seconds
           ? Micros{static_cast<std::int64_t>(spec.duration_seconds) * 1'000'000}
           : Micros{600'000'000}) +
      kDrainGrace;

  auto cons_parts = assign_partitions(spec.ns, spec.nc);
  std::unique_ptr<client::PushGroup> group;
  std::vector<flow::SourceTask> sources;
  sources.reserve(spec.nc);
  if (spec.source_mode == SourceMode::Pull) {
    for (std::uint32_t i = 0; i < spec.nc; ++i) {
      sources.push_back([&, i](const client::RecordEmit& emit) {
        auto conn = hub.connect();
        client::PullSourceConfig sc;
        sc.consumer_id = "consumer-" + std::to_string(i);
        sc.stream = kBenchStream;
        sc.partitions = cons_parts[i];
        sc.max_bytes = static_cast<std::uint32_t>(spec.cs_consumer);
        sc.poll_timeout = spec.poll_timeout;
        client::PullSource src(*conn, sc);
        return src.run(tracked(emit), cons_cap, finished);
      });
    }
  } else {
    client::PushGroupConfig gc;
    gc.group_id = "bench-group";
    gc.stream = kBenchStream;
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
        return group->run_member(i, tracked(emit), cons_cap, finished);
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
  flow::DataflowResult res = dataflow.run();
  if (group) group->close();

  std::vector<std::uint64_t> heads(spec.ns), emitted(spec.ns);
  for (std::uint32_t p = 0; p < spec.ns; ++p) {
    heads[p] = broker.head_offset(kBenchStream, p);
    emitted[p] = next_expected[p].load();
  }
  std::uint64_t rpcs = 0;
  for (const auto& r : res.source_reports) rpcs += r.total_rpcs;
  {
    std::ofstream out(fs::path(out_dir) / "sources.csv");
    client::write_reports_csv(out, res.source_reports);
  }
  if (res.metrics) {
    std::ofstream out(fs::path(out_dir) / "stages.csv");
    res.metrics->write_csv(out);
  }
  const bool ok = !res.aborted && violations.load() == 0;
  write_role_summary(out_dir, "consumer", ok, res.error, res.source_records, rpcs,
                     res.p50_source, violations.load(), heads, emitted);
  server.stop();
  broker.stop();
  return ok ? 0 : 1;
}

int run_producer_client(const ExperimentSpec& spec, const std::string& addr,
                        const std::string& out_dir) {
  validate_spec(spec);
  fs::create_directories(out_dir);
  const auto [host, port] = split_addr(addr);

  std::shared_ptr<const std::vector<Bytes>> corpus;
  if (workload_needs_corpus(spec.workload) && !spec.corpus_path.empty()) {
    corpus = load_corpus(spec.corpus_path, spec.recs);
  }
  const Micros prod_cap =
      spec.duration_seconds ? Micros{static_cast<std::int64_t>(spec.duration_seconds) * 1'000'000}
                            : Micros{600'000'000};

  auto plans = plan_producers(spec);
  std::vector<client::ClientReport> reports(spec.np);
  std::vector<std::thread> threads;
  threads.reserve(spec.np);
  for (std::uint32_t i = 0; i < spec.np; ++i) {
    threads.emplace_back([&, i] {
      try {
        wire::TcpClient conn(host, port);
        client::ProducerConfig pc;
        pc.producer_id = "producer-" + std::to_string(i);
        pc.stream = kBenchStream;
        pc.partitions = plans[i].partitions;
        pc.chunk_size = spec.cs_producer;
        pc.record_size = spec.recs;
        pc.seal_timeout = spec.seal_timeout;
        client::Producer producer(conn, pc);

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
        reports[i] = producer.run(*src, prod_cap);
      } catch (const std::exception& e) {
        reports[i].client_id = "producer-" + std::to_string(i);
        reports[i].aborted = true;
        reports[i].error = e.what();
      }
    });
  }
  for (auto& t : threads) t.join();

  bool ok = true;
  std::string error;
  std::uint64_t records = 0, rpcs = 0;
  for (const auto& r : reports) {
    records += r.total_records;
    rpcs += r.total_rpcs;
    if (r.aborted) {
      ok = false;
      if (error.empty()) error = r.client_id + ": " + r.error;
    }
  }
  {
    std::ofstream out(fs::path(out_dir) / "producers.csv");
    client::write_reports_csv(out, reports);
  }
  write_role_summary(out_dir, "producer", ok, error, records, rpcs,
                     report_p50(reports, spec.warmup_seconds), 0, {}, {});
  return ok ? 0 : 1;
}

MultiRunResult run_experiment_multi(const ExperimentSpec& spec, const std::string& out_dir,
                                    const std::string& bin_dir) {
  MultiRunResult res;
  res.out_dir = out_dir;
  pid_t backup_pid = -1;
  pid_t consume_pid = -1;
  pid_t produce_pid = -1;
  auto kill_all = [&] {
    for (pid_t pid : {produce_pid, consume_pid, backup_pid}) {
      if (pid > 0) {
        ::kill(pid, SIGKILL);
        int status = 0;
        ::waitpid(pid, &status, 0);
      }
    }
  };
  try {
    validate_spec(spec);
    fs::create_directories(out_dir);
    const std::string spec_file = (fs::path(out_dir) / "spec.txt").string();
    write_file_atomic(spec_file, serialize_spec(spec));

    const Micros budget{(static_cast<std::int64_t>(spec.duration_seconds ? spec.duration_seconds
                                                                         : 600) +
                         120) *
                        1'000'000};

    std::string backup_addr;
    if (spec.replication == 2) {
      backup_pid = spawn_process({(fs::path(bin_dir) / "broker").string(), "--spec", spec_file,
                                  "--host", "127.0.0.1", "--port-file",
                                  (fs::path(out_dir) / "backup_port").string(), "--run-seconds",
                                  "900"},
                                 (fs::path(out_dir) / "backup.log").string());
      backup_addr =
          "127.0.0.1:" + wait_for_file((fs::path(out_dir) / "backup_port").string(), Micros{15'000'000});
    }

    std::vector<std::string> consume_argv = {(fs::path(bin_dir) / "consume").string(),
                                             "--spec",
                                             spec_file,
                                             "--host",
                                             "127.0.0.1",
                                             "--port-file",
                                             (fs::path(out_dir) / "broker_port").string(),
                                             "--out-dir",
                                             (fs::path(out_dir) / "consumer").string()};
    if (!backup_addr.empty()) {
      consume_argv.push_back("--backup");
      consume_argv.push_back(backup_addr);
    }
    consume_pid = spawn_process(consume_argv, (fs::path(out_dir) / "consumer.log").string());
    const std::string broker_port =
        wait_for_file((fs::path(out_dir) / "broker_port").string(), Micros{15'000'000});

    produce_pid = spawn_process({(fs::path(bin_dir) / "produce").string(), "--spec", spec_file,
                                 "--broker", "127.0.0.1:" + broker_port, "--out-dir",
                                 (fs::path(out_dir) / "producer").string()},
                                (fs::path(out_dir) / "producer.log").string());

    const int produce_exit = wait_exit(produce_pid, budget);
    produce_pid = -1;
    const int consume_exit = wait_exit(consume_pid, budget);
    consume_pid = -1;
    if (backup_pid > 0) {
      ::kill(backup_pid, SIGTERM);
      wait_exit(backup_pid, Micros{30'000'000});
      backup_pid = -1;
    }

    const nlohmann::json prod = read_summary((fs::path(out_dir) / "producer").string());
    const nlohmann::json cons = read_summary((fs::path(out_dir) / "consumer").string());
    res.produced = prod.at("total_records").get<std::uint64_t>();
    res.consumed = cons.at("total_records").get<std::uint64_t>();
    res.violations = cons.at("violations").get<std::uint64_t>();

    if (produce_exit != 0) {
      res.error = "producer exit " + std::to_string(produce_exit) + ": " +
                  prod.at("error").get<std::string>();
    } else if (consume_exit != 0) {
      res.error = "consumer exit " + std::to_string(consume_exit) + ": " +
                  cons.at("error").get<std::string>();
    } else if (spec.record_limit &&
               (res.produced != spec.record_limit || res.consumed != spec.record_limit)) {
      res.error = "record conservation failed: produced " + std::to_string(res.produced) +
                  ", consumed " + std::to_string(res.consumed) + ", expected " +
                  std::to_string(spec.record_limit);
    } else if (res.violations != 0) {
      res.error = "delivery violations: " + std::to_string(res.violations);
    }
    res.ok = res.error.empty();
  } catch (const std::exception& e) {
    kill_all();
    res.ok = false;
    res.error = e.what();
  }
  return res;
}

}  // namespace rivulet::bench
