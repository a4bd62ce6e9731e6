#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <sys/wait.h>

#include "doctest.h"
#include "giantatom/config.hpp"
#include "giantatom/error.hpp"
#include "giantatom/experiments.hpp"

using namespace giantatom;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

fs::path scratch(const std::string& name) {
  const fs::path d = fs::temp_directory_path() / ("giantatom_test_" + name);
  fs::remove_all(d);
  fs::create_directories(d);
  return d;
}

int run_cli(const std::string& args) {
  const std::string cmd = std::string(GIANTATOM_CLI) + " " + args + " >/dev/null 2>&1";
  const int st = std::system(cmd.c_str());
  return WIFEXITED(st) ? WEXITSTATUS(st) : -1;
}

void write(const fs::path& p, const std::string& s) { std::ofstream(p) << s; }

}  // namespace

TEST_CASE("config parsing") {
  const auto cfg = parse_config(
      "# comment\n[experiment]\nkind = ground_scan\nseed = 7\n\n[physics]\nlambda = 0.2 ; trailing\n"
      "sector = full\n[scan]\nlambdas = 0.1, 0.3\n");
  CHECK(cfg.kind == ExperimentKind::GroundScan);
  CHECK(cfg.seed == 7);
  CHECK(cfg.physics.lambda == doctest::Approx(0.2));
  CHECK(cfg.physics.sector == Sector::Full);
  REQUIRE(cfg.lambdas.size() == 2);
  CHECK(cfg.lambdas[1] == doctest::Approx(0.3));
  CHECK(cfg.numerics.n_b == 25);

  // the resolved form parses back to the same thing
  CHECK(parse_config(cfg.to_ini()).to_ini() == cfg.to_ini());

  auto fails_at = [](const std::string& text, const std::string& where) {
    try {
      parse_config(text, "x.ini");
      return false;
    } catch (const Error& e) {
      return e.kind() == ErrorKind::InvalidConfig && std::string(e.what()).find(where) != std::string::npos;
    }
  };
  CHECK(fails_at("[experiment]\nkind = modes\n[physics]\nbogus = 1\n", "x.ini:4"));
  CHECK(fails_at("[nowhere]\n", "x.ini:1"));
  CHECK(fails_at("[physics]\nlambda = 0.1\nlambda = 0.2\n", "x.ini:3"));
  CHECK(fails_at("[physics]\nlambda 0.1\n", "x.ini:2"));
  CHECK(fails_at("lambda = 0.1\n", "x.ini:1"));
  CHECK(fails_at("[physics]\nlambda = abc\n", "x.ini:2"));
  CHECK(fails_at("[experiment]\nkind = nonsense\n", "x.ini:2"));

  ExperimentConfig bad;
  bad.physics.cutoff = 0;
  CHECK_THROWS_AS(bad.validate(), Error);
}

TEST_CASE("modes run through the CLI") {
  const auto dir = scratch("modes");
  write(dir / "m.ini", "[experiment]\nkind = modes\n[physics]\ncutoff = 50\nsector = full\n");
  CHECK(run_cli("run --config " + (dir / "m.ini").string() + " --output-dir " + (dir / "out").string()) == 0);
  const auto csv = slurp(dir / "out" / "modes.csv");
  CHECK(csv.find("j,k,omega,re_f,im_f,abs_f") != std::string::npos);
  CHECK(csv.find("mu0") != std::string::npos);
  int rows = 0;
  std::istringstream in(csv);
  for (std::string line; std::getline(in, line);)
    if (!line.empty() && line[0] != '#' && line[0] != 'j') ++rows;
  CHECK(rows == 100);
}

TEST_CASE("dark-state listing and reproducible reruns") {
  const auto dir = scratch("dark");
  write(dir / "d.ini",
        "[experiment]\nkind = dark_states\n[darkstates]\nomega_tau = 31.41592653589793\n"
        "gamma_tau = 3.141592653589793\nratio = 0.5\n");
  const std::string args = "run --config " + (dir / "d.ini").string() + " --output-dir ";
  REQUIRE(run_cli(args + (dir / "a").string()) == 0);
  REQUIRE(run_cli(args + (dir / "b").string()) == 0);
  const auto a = slurp(dir / "a" / "darkstates.csv");
  CHECK(a == slurp(dir / "b" / "darkstates.csv"));
  std::istringstream in(a);
  std::string ns;
  for (std::string line; std::getline(in, line);)
    if (!line.empty() && line[0] != '#' && line[0] != 'n') ns += line.substr(0, line.find(',')) + " ";
  CHECK(ns == "9 10 11 ");
}

TEST_CASE("free atom dynamics stays excited") {
  const auto dir = scratch("dyn");
  write(dir / "y.ini",
        "[experiment]\nkind = dynamics\n[physics]\nlambda = 0\ncutoff = 20\n"
        "[numerics]\nn_b = 2\nmax_bond = 8\ndt = 1e-3\ntotal_time = 0.02\nstride = 0.01\n");
  REQUIRE(run_cli("run --config " + (dir / "y.ini").string() + " --output-dir " + (dir / "o").string()) == 0);
  std::istringstream in(slurp(dir / "o" / "dynamics.csv"));
  int rows = 0;
  for (std::string line; std::getline(in, line);) {
    if (line.empty() || line[0] == '#' || line[0] == 't') continue;
    std::istringstream ls(line);
    std::string t, pe;
    std::getline(ls, t, ',');
    std::getline(ls, pe, ',');
    CHECK(std::stod(pe) == doctest::Approx(1.0).epsilon(1e-12));
    ++rows;
  }
  CHECK(rows == 3);
}

TEST_CASE("errors map to exit codes and write nothing") {
  const auto dir = scratch("errors");
  write(dir / "bad.ini", "[physics]\nwhat = 1\n");
  CHECK(run_cli("run --config " + (dir / "bad.ini").string() + " --output-dir " + (dir / "x").string()) == 2);
  CHECK_FALSE(fs::exists(dir / "x"));

  write(dir / "big.ini",
        "[experiment]\nkind = ground_scan\n[numerics]\nmax_bond = 2000\n[limits]\nmax_memory_mb = 1\n");
  CHECK(run_cli("run --config " + (dir / "big.ini").string() + " --output-dir " + (dir / "y").string()) == 3);
  CHECK_FALSE(fs::exists(dir / "y"));

  CHECK(run_cli("run --config " + (dir / "missing.ini").string()) != 0);
}
