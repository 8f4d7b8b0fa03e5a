#include <cstdio>

#include "CLI11.hpp"
#include "rivulet/bench/orchestrator.hpp"
#include "rivulet/bench/spec.hpp"

int main(int argc, char** argv) {
  CLI::App app{"rivulet load producers (np threads against one broker)"};
  std::string spec_path;
  std::string broker_addr = "127.0.0.1:7170";
  std::string out_dir = "produce-out";
  app.add_option("--spec", spec_path, "experiment spec file")->required();
  app.add_option("--broker", broker_addr, "broker host:port");
  app.add_option("--out-dir", out_dir, "reports directory");
  CLI11_PARSE(app, argc, argv);

  try {
    const auto spec = rivulet::bench::load_spec_file(spec_path);
    return rivulet::bench::run_producer_client(spec, broker_addr, out_dir);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "produce: %s\n", e.what());
    return 1;
  }
}
