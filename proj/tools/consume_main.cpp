#include <cstdio>

#include "CLI11.hpp"
#include "rivulet/bench/orchestrator.hpp"
#include "rivulet/bench/spec.hpp"

int main(int argc, char** argv) {
  CLI::App app{
      "rivulet consumer host: embeds the broker, serves producers over TCP "
      "and runs the processing dataflow in pull or push mode"};
  std::string spec_path;
  std::string host = "127.0.0.1";
  std::string port_file;
  std::string backup_addr;
  std::string out_dir = "consume-out";
  app.add_option("--spec", spec_path, "experiment spec file")->required();
  app.add_option("--host", host, "bind address for the embedded broker");
  app.add_option("--port-file", port_file, "publish the bound port to this file");
  app.add_option("--backup", backup_addr, "backup broker host:port (replication=2)");
  app.add_option("--out-dir", out_dir, "reports directory");
  CLI11_PARSE(app, argc, argv);

  try {
    const auto spec = rivulet::bench::load_spec_file(spec_path);
    return rivulet::bench::run_consumer_host(spec, host, port_file, backup_addr, out_dir);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "consume: %s\n", e.what());
    return 1;
  }
}
