#include "rivulet/bench/spec.hpp"

#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>

#include "rivulet/record.hpp"

namespace rivulet::bench {
namespace {

std::string trim(std::string_view s) {
  std::size_t b = 0, e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return std::string(s.substr(b, e - b));
}

std::uint64_t parse_u64(const std::string& key, const std::string& value) {
  try {
    std::size_t pos = 0;
    const std::uint64_t v = std::stoull(value, &pos);
    if (pos != value.size()) throw std::invalid_argument(value);
    return v;
  } catch (const std::exception&) {
    throw std::invalid_argument("bad integer for " + key + ": " + value);
  }
}

bool parse_bool(const std::string& key, const std::string& value) {
  if (value == "true" || value == "1") return true;
  if (value == "false" || value == "0") return false;
  throw std::invalid_argument("bad bool for " + key + ": " + value);
}

}  // namespace

SourceMode source_mode_from_name(std::string_view name) {
  if (name == "pull") return SourceMode::Pull;
  if (name == "push") return SourceMode::Push;
  throw std::invalid_argument("unknown source_mode: " + std::string(name));
}

std::string_view source_mode_name(SourceMode mode) {
  return mode == SourceMode::Pull ? "pull" : "push";
}

ExperimentSpec parse_spec(const std::string& text) {
  ExperimentSpec spec;
  std::istringstream in(text);
  std::string raw;
  int line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    const std::string line = trim(raw);
    if (line.empty() || line[0] == '#') continue;
    const std::size_t eq = line.find('=');
    if (eq == std::string::npos) {
      throw std::invalid_argument("line " + std::to_string(line_no) +
                                  ": expected key=value, got: " + line);
    }
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));

    if (key == "name") spec.name = value;
    else if (key == "workload") spec.workload = value;
    else if (key == "source_mode") spec.source_mode = source_mode_from_name(value);
    else if (key == "np") spec.np = static_cast<std::uint32_t>(parse_u64(key, value));
    else if (key == "nc") spec.nc = static_cast<std::uint32_t>(parse_u64(key, value));
    else if (key == "nmap") spec.nmap = static_cast<std::uint32_t>(parse_u64(key, value));
    else if (key == "ns") spec.ns = static_cast<std::uint32_t>(parse_u64(key, value));
    else if (key == "nbc") spec.nbc = static_cast<std::uint32_t>(parse_u64(key, value));
    else if (key == "nfs") spec.nfs = static_cast<std::uint32_t>(parse_u64(key, value));
    else if (key == "cs_producer") spec.cs_producer = parse_u64(key, value);
    else if (key == "cs_consumer") spec.cs_consumer = parse_u64(key, value);
    else if (key == "recs") spec.recs = parse_u64(key, value);
    else if (key == "replication") spec.replication = static_cast<std::uint32_t>(parse_u64(key, value));
    else if (key == "duration_seconds") spec.duration_seconds = static_cast<std::uint32_t>(parse_u64(key, value));
    else if (key == "corpus_path") spec.corpus_path = value;
    else if (key == "seed") spec.seed = parse_u64(key, value);
    else if (key == "record_limit") spec.record_limit = parse_u64(key, value);
    else if (key == "pace_per_sec") spec.pace_per_sec = parse_u64(key, value);
    else if (key == "poll_timeout_us") spec.poll_timeout = Micros{static_cast<std::int64_t>(parse_u64(key, value))};
    else if (key == "seal_timeout_us") spec.seal_timeout = Micros{static_cast<std::int64_t>(parse_u64(key, value))};
    else if (key == "service_floor_us") spec.service_floor = Micros{static_cast<std::int64_t>(parse_u64(key, value))};
    else if (key == "objects_per_consumer") spec.objects_per_consumer = static_cast<std::uint32_t>(parse_u64(key, value));
    else if (key == "segment_bytes") spec.segment_bytes = parse_u64(key, value);
    else if (key == "filter_pattern") spec.filter_pattern = value;
    else if (key == "window_kind") {
      if (value == "time") spec.window.kind = flow::WindowKind::Time;
      else if (value == "count") spec.window.kind = flow::WindowKind::Count;
      else throw std::invalid_argument("unknown window_kind: " + value);
    }
    else if (key == "window_size") spec.window.size = static_cast<std::int64_t>(parse_u64(key, value));
    else if (key == "window_slide") spec.window.slide = static_cast<std::int64_t>(parse_u64(key, value));
    else if (key == "chained") spec.chained = value == "auto" ? -1 : (parse_bool(key, value) ? 1 : 0);
    else if (key == "record_arrivals") spec.record_arrivals = parse_bool(key, value);
    else if (key == "warmup_seconds") spec.warmup_seconds = static_cast<std::int64_t>(parse_u64(key, value));
    else if (key == "process_mode") {
      if (value == "single") spec.process_mode = ProcessMode::Single;
      else if (value == "multi") spec.process_mode = ProcessMode::Multi;
      else throw std::invalid_argument("unknown process_mode: " + value);
    }
    else throw std::invalid_argument("unknown key: " + key);
  }
  return spec;
}

ExperimentSpec load_spec_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open spec file: " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_spec(buf.str());
}

std::string serialize_spec(const ExperimentSpec& spec) {
  std::ostringstream out;
  out << "name=" << spec.name << '\n'
      << "workload=" << spec.workload << '\n'
      << "source_mode=" << source_mode_name(spec.source_mode) << '\n'
      << "np=" << spec.np << '\n'
      << "nc=" << spec.nc << '\n'
      << "nmap=" << spec.nmap << '\n'
      << "ns=" << spec.ns << '\n'
      << "nbc=" << spec.nbc << '\n'
      << "nfs=" << spec.nfs << '\n'
      << "cs_producer=" << spec.cs_producer << '\n'
      << "cs_consumer=" << spec.cs_consumer << '\n'
      << "recs=" << spec.recs << '\n'
      << "replication=" << spec.replication << '\n'
      << "duration_seconds=" << spec.duration_seconds << '\n';
  if (!spec.corpus_path.empty()) out << "corpus_path=" << spec.corpus_path << '\n';
  out << "seed=" << spec.seed << '\n';
  if (spec.record_limit) out << "record_limit=" << spec.record_limit << '\n';
  if (spec.pace_per_sec) out << "pace_per_sec=" << spec.pace_per_sec << '\n';
  out << "poll_timeout_us=" << spec.poll_timeout.count() << '\n'
      << "seal_timeout_us=" << spec.seal_timeout.count() << '\n'
      << "service_floor_us=" << spec.service_floor.count() << '\n'
      << "objects_per_consumer=" << spec.objects_per_consumer << '\n'
      << "segment_bytes=" << spec.segment_bytes << '\n'
      << "filter_pattern=" << spec.filter_pattern << '\n'
      << "window_kind=" << (spec.window.kind == flow::WindowKind::Time ? "time" : "count") << '\n'
      << "window_size=" << spec.window.size << '\n'
      << "window_slide=" << spec.window.slide << '\n'
      << "chained=" << (spec.chained < 0 ? "auto" : (spec.chained ? "true" : "false")) << '\n'
      << "record_arrivals=" << (spec.record_arrivals ? "true" : "false") << '\n'
      << "warmup_seconds=" << spec.warmup_seconds << '\n'
      << "process_mode=" << (spec.process_mode == ProcessMode::Single ? "single" : "multi") << '\n';
  return out.str();
}

void validate_spec(const ExperimentSpec& spec) {
  if (spec.workload != "count" && spec.workload != "filter" &&
      spec.workload != "wordcount" && spec.workload != "windowed_wordcount") {
    throw std::invalid_argument("unknown workload: " + spec.workload);
  }
  if (spec.np == 0 || spec.nc == 0 || spec.nmap == 0 || spec.ns == 0 || spec.nbc == 0) {
    throw std::invalid_argument("np, nc, nmap, ns and nbc must be positive");
  }
  if (spec.nc > spec.ns) {
    throw std::invalid_argument("nc must not exceed ns: a consumer task without a partition would idle forever");
  }
  // The broker stores whole producer chunks; a push consumer whose objects
  // are smaller than the producer's chunks could never be served.
  if (spec.source_mode == SourceMode::Push && spec.cs_consumer < spec.cs_producer) {
    throw std::invalid_argument("push mode requires cs_consumer >= cs_producer");
  }
  if (spec.cs_producer < spec.recs + kRecordFramingBytes) {
    throw std::invalid_argument("cs_producer too small for one record");
  }
  // A consumer process runs nc source tasks plus, when the exchange is not
  // chained, nmap mapper tasks; nfs caps that concurrency.
  const bool chained = spec.chained == 1 || (spec.chained < 0 && spec.nmap <= spec.nc);
  const std::uint32_t tasks = spec.nc + (chained ? 0u : spec.nmap);
  if (tasks > spec.nfs) {
    throw std::invalid_argument("nc + nmap exceeds nfs processing slots");
  }
  if (spec.replication != 1 && spec.replication != 2) {
    throw std::invalid_argument("replication must be 1 or 2");
  }
  if (workload_needs_corpus(spec.workload) && spec.corpus_path.empty() && spec.recs == 0) {
    throw std::invalid_argument("wordcount workloads need a corpus or a record size");
  }
  if (spec.record_limit > kRecordCap) {
    throw std::invalid_argument("record_limit exceeds the 5M cap");
  }
  if (spec.duration_seconds == 0 && spec.record_limit == 0) {
    throw std::invalid_argument("need a duration or a record limit");
  }
  if (spec.poll_timeout.count() <= 0 || spec.seal_timeout.count() <= 0) {
    throw std::invalid_argument("poll_timeout and seal_timeout must be positive");
  }
  if (spec.objects_per_consumer == 0) {
    throw std::invalid_argument("objects_per_consumer must be positive");
  }
  if (spec.workload == "windowed_wordcount") flow::validate(spec.window);
}

std::vector<std::vector<std::uint32_t>> assign_partitions(std::uint32_t total,
                                                          std::uint32_t tasks) {
  std::vector<std::vector<std::uint32_t>> out(tasks);
  const std::uint32_t q = total / tasks;
  const std::uint32_t r = total % tasks;
  std::uint32_t next = 0;
  for (std::uint32_t i = 0; i < tasks; ++i) {
    const std::uint32_t take = q + (i < r ? 1 : 0);
    for (std::uint32_t k = 0; k < take; ++k) out[i].push_back(next++);
  }
  return out;
}

std::uint64_t share_of(std::uint64_t total, std::uint32_t n, std::uint32_t i) {
  return total / n + (i < total % n ? 1 : 0);
}

std::vector<ProducerPlan> plan_producers(const ExperimentSpec& spec) {
  std::vector<ProducerPlan> plans(spec.np);
  if (spec.np <= spec.ns) {
    auto groups = assign_partitions(spec.ns, spec.np);
    for (std::uint32_t i = 0; i < spec.np; ++i) plans[i].partitions = std::move(groups[i]);
  } else {
    for (std::uint32_t i = 0; i < spec.np; ++i) plans[i].partitions = {i % spec.ns};
  }
  for (std::uint32_t i = 0; i < spec.np; ++i) {
    plans[i].record_limit = spec.record_limit ? share_of(spec.record_limit, spec.np, i) : 0;
    plans[i].pace_per_sec = spec.pace_per_sec ? share_of(spec.pace_per_sec, spec.np, i) : 0;
    plans[i].seed = spec.seed * 1'000'003 + i;
  }
  return plans;
}

std::string spec_id(const ExperimentSpec& spec) {
  std::ostringstream out;
  out << pair_key(spec) << "/" << source_mode_name(spec.source_mode);
  return out.str();
}

std::string pair_key(const ExperimentSpec& spec) {
  std::ostringstream out;
  out << spec.workload << "-np" << spec.np << "-nc" << spec.nc << "-nmap"
      << spec.nmap << "-ns" << spec.ns << "-nbc" << spec.nbc << "-csp"
      << spec.cs_producer << "-csc" << spec.cs_consumer << "-recs" << spec.recs
      << "-repl" << spec.replication;
  if (spec.record_limit) out << "-lim" << spec.record_limit;
  if (spec.pace_per_sec) out << "-pace" << spec.pace_per_sec;
  if (spec.service_floor.count()) out << "-floor" << spec.service_floor.count();
  return out.str();
}

bool workload_needs_corpus(const std::string& workload) {
  return workload == "wordcount" || workload == "windowed_wordcount";
}

}  // namespace rivulet::bench
