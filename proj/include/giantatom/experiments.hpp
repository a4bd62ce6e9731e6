// experiments.hpp - config-driven runs that produce the CSV outputs, plus the
// small-system oracle comparison used by `check`.

#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "giantatom/config.hpp"
#include "giantatom/observables.hpp"
#include "giantatom/table.hpp"

namespace giantatom {

inline constexpr const char* kCodeVersion = "giantatom 0.1.0";

struct RunOptions {
  std::string output_dir;  // overrides [experiment] output when non-empty
  int threads = 0;         // 0: GIANTATOM_THREADS, else 1
  std::optional<std::uint64_t> seed;
  std::ostream* log = nullptr;
};

struct RunReport {
  std::vector<std::string> files;
  bool all_passed = true;  // OracleCheck only
};

/// Thread count: explicit flag, else the GIANTATOM_THREADS variable, else 1.
int resolve_threads(int flag);

/// Runs fn(i) for i in [0, n) on up to `threads` workers; results keep index order.
void parallel_for(int n, int threads, const std::function<void(int)>& fn);

/// Rough peak memory of a run in MiB (dominant tensors and matrices).
double estimate_memory_mb(const ExperimentConfig& cfg, int threads);

RunReport run_experiment(ExperimentConfig cfg, const RunOptions& options);

// Ground and first excited state of the atom + chain problem.
struct GroundPair {
  DmrgResult gs;
  DmrgResult es;
};
GroundPair solve_ground_pair(const ChainRep& chain, const EmitterSpec& emitter, Variant variant,
                             const DmrgOptions& options, std::uint64_t seed);

// Small system checkable by exact diagonalization: L = 1, Even sector with
// four modes, three coupling points (tau = L/20, d = L/500), Omega = 2 pi and
// lambda sqrt(mu0) = ratio * Omega.
struct OracleSystem {
  ModeBasis basis;
  CouplingVector coupling;
  ChainRep chain;
  EmitterSpec emitter;
};
OracleSystem oracle_system(double ratio, int modes = 4);

/// ED vs DMRG energies, ED vs TEBD populations and ED vs single-excitation
/// propagator; one row per check (check, value, reference, deviation, tolerance, pass).
ObservableTable oracle_check_table(double total_time = 1.0);

}  // namespace giantatom
