#include <cstdio>

#include "CLI11.hpp"
#include "rivulet/bench/orchestrator.hpp"
#include "rivulet/bench/spec.hpp"

int main(int argc, char** argv) {
  CLI::App app{"rivulet broker node (standalone or replication backup)"};
  std::string spec_path;
  std::string host = "127.0.0.1";
  std::string port_file;
  std::uint32_t run_seconds = 600;
  std::uint32_t workers = 0;
  std::uint32_t partitions = 0;
  std::int64_t floor_us = -1;
  app.add_option("--spec", spec_path, "experiment spec file (key=value lines)");
  app.add_option("--host", host, "bind address");
  app.add_option("--port-file", port_file, "publish the bound port to this file");
  app.add_option("--run-seconds", run_seconds, "exit after this long (SIGTERM also stops)");
  app.add_option("--workers", workers, "override storage lane count");
  app.add_option("--partitions", partitions, "override partition count");
  app.add_option("--floor-us", floor_us, "override per-request service floor");
  CLI11_PARSE(app, argc, argv);

  try {
    rivulet::bench::ExperimentSpec spec;
    if (!spec_path.empty()) spec = rivulet::bench::load_spec_file(spec_path);
    if (workers) spec.nbc = workers;
    if (partitions) spec.ns = partitions;
    if (floor_us >= 0) spec.service_floor = rivulet::Micros{floor_us};
    return rivulet::bench::run_broker_host(spec, host, port_file, run_seconds);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "broker: %s\n", e.what());
    return 1;
  }
}
