// giantatom - command-line runner for the waveguide / giant-atom experiments.
//
//   giantatom run --config <path> [--output-dir <path>] [--threads <n>] [--seed <u64>]
//   giantatom check [--output-dir <path>]

#include <cstdint>
#include <cstdio>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "giantatom/error.hpp"
#include "giantatom/experiments.hpp"

using namespace giantatom;

namespace {

int exit_code(const Error& e) {
  switch (e.kind()) {
    case ErrorKind::InvalidConfig: return 2;
    case ErrorKind::ResourceCapExceeded: return 3;
    default: return 1;
  }
}

int run_check(const std::string& output_dir) {
  const ObservableTable t = oracle_check_table();
  bool ok = true;
  for (const auto& row : t.rows) {
    const bool pass = std::get<std::string>(row[5]) == "pass";
    ok &= pass;
    std::printf("%s %-28s value=%.12g reference=%.12g deviation=%.3g tolerance=%.3g\n", pass ? "PASS" : "FAIL",
                std::get<std::string>(row[0]).c_str(), std::get<double>(row[1]), std::get<double>(row[2]),
                std::get<double>(row[3]), std::get<double>(row[4]));
  }
  if (!output_dir.empty()) {
    ObservableTable out = t;
    out.preamble = std::string(kCodeVersion) + "\nkind = oracle_check\n";
    out.write_csv(output_dir + "/oracle_check.csv");
  }
  return ok ? 0 : 4;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Giant atoms in a discretized waveguide: chain mapping, MPS statics and dynamics, oracles"};
  app.require_subcommand(1);

  std::string config_path, output_dir;
  int threads = 0;
  std::optional<std::uint64_t> seed;
  auto* run = app.add_subcommand("run", "Run the experiment described by a config file");
  run->add_option("--config", config_path, "INI configuration file")->required();
  run->add_option("--output-dir", output_dir, "Directory for CSV outputs (overrides [experiment] output)");
  run->add_option("--threads", threads, "Worker threads (default: GIANTATOM_THREADS or 1)")->check(CLI::PositiveNumber);
  run->add_option("--seed", seed, "Seed overriding [experiment] seed");

  std::string check_dir;
  auto* check = app.add_subcommand("check", "Compare the MPS engine against exact small-system oracles");
  check->add_option("--output-dir", check_dir, "Also write oracle_check.csv here");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*check) return run_check(check_dir);
    const ExperimentConfig cfg = load_config(config_path);
    RunOptions opts;
    opts.output_dir = output_dir;
    opts.threads = threads;
    opts.seed = seed;
    opts.log = &std::cerr;
    const RunReport rep = run_experiment(cfg, opts);
    for (const auto& f : rep.files) std::cout << f << '\n';
    return rep.all_passed ? 0 : 4;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return exit_code(e);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
}
