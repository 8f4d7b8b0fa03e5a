#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <vector>

#include "CLI11.hpp"
#include "rivulet/bench/compare.hpp"
#include "rivulet/bench/experiment.hpp"
#include "rivulet/bench/orchestrator.hpp"

namespace fs = std::filesystem;
using namespace rivulet;

namespace {

int run_one(const std::string& spec_path, const std::string& out_dir, bool multi,
            const std::string& bin_dir) {
  const auto spec = bench::load_spec_file(spec_path);
  if (multi || spec.process_mode == bench::ProcessMode::Multi) {
    const auto res = bench::run_experiment_multi(
        spec, out_dir.empty() ? "bench-out/" + spec.name : out_dir, bin_dir);
    std::printf("%s: %s  produced=%llu consumed=%llu violations=%llu\n",
                bench::spec_id(spec).c_str(), res.ok ? "ok" : res.error.c_str(),
                static_cast<unsigned long long>(res.produced),
                static_cast<unsigned long long>(res.consumed),
                static_cast<unsigned long long>(res.violations));
    return res.ok ? 0 : 1;
  }
  bench::RunOptions opts;
  opts.out_dir = out_dir;
  const auto res = bench::run_experiment(spec, opts);
  std::cout << bench::result_json(res) << '\n';
  return res.ok ? 0 : 1;
}

std::vector<std::string> spec_files(const std::string& dir) {
  std::vector<std::string> files;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (entry.is_regular_file() && entry.path().extension() == ".spec") {
      files.push_back(entry.path().string());
    }
  }
  std::sort(files.begin(), files.end());
  return files;
}

int run_sweep(const std::string& dir, const std::string& out_dir) {
  const auto files = spec_files(dir);
  if (files.empty()) {
    std::fprintf(stderr, "no .spec files in %s\n", dir.c_str());
    return 1;
  }
  std::vector<bench::ExperimentResult> results;
  bool all_ok = true;
  for (const std::string& f : files) {
    const auto spec = bench::load_spec_file(f);
    bench::RunOptions opts;
    if (!out_dir.empty()) opts.out_dir = (fs::path(out_dir) / spec.name).string();
    std::fprintf(stderr, "running %s ...\n", bench::spec_id(spec).c_str());
    auto res = bench::run_experiment(spec, opts);
    if (!res.ok) {
      all_ok = false;
      std::fprintf(stderr, "  failed: %s\n", res.error.c_str());
    } else {
      std::fprintf(stderr, "  producer p50 %llu rec/s, consumer p50 %llu rec/s\n",
                   static_cast<unsigned long long>(res.producer_p50),
                   static_cast<unsigned long long>(res.consumer_p50));
    }
    results.push_back(std::move(res));
  }
  const auto cmp = bench::compare_modes(results);
  bench::write_comparison_table(std::cout, cmp);
  if (!out_dir.empty()) {
    fs::create_directories(out_dir);
    std::ofstream csv(fs::path(out_dir) / "comparison.csv");
    bench::write_comparison_csv(csv, cmp);
  }
  return all_ok ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"rivulet benchmark runner"};
  app.require_subcommand(1);

  auto* run = app.add_subcommand("run", "run one experiment spec");
  std::string spec_path, out_dir, bin_dir = fs::path(argv[0]).parent_path().string();
  bool multi = false;
  run->add_option("spec", spec_path, "spec file")->required();
  run->add_option("--out-dir", out_dir, "write CSVs and summary.json here");
  run->add_flag("--multi", multi, "separate broker/producer/consumer processes");
  run->add_option("--bin-dir", bin_dir, "tool binaries for --multi");

  auto* sweep = app.add_subcommand("sweep", "run every .spec in a directory and compare modes");
  std::string sweep_dir = "presets", sweep_out;
  sweep->add_option("dir", sweep_dir, "directory of .spec files");
  sweep->add_option("--out-dir", sweep_out, "write per-run outputs and comparison.csv here");

  CLI11_PARSE(app, argc, argv);
  try {
    if (run->parsed()) return run_one(spec_path, out_dir, multi, bin_dir);
    return run_sweep(sweep_dir, sweep_out);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "bench: %s\n", e.what());
    return 1;
  }
}
