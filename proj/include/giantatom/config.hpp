// config.hpp - INI-style experiment configuration.
//
//   [experiment]  kind, output, seed
//   [physics]     length, omega, lambda, points, tau, width, profile, cutoff, sector
//   [numerics]    n_b, max_bond, svd_cutoff, chain_length, reorth, variant, dt,
//                 total_time, stride, order, max_sweeps, energy_tol, penalty_weight
//   [scan]        lambdas (comma list)
//   [darkstates]  omega_tau, gamma_tau, ratio, n_max, propagate, half_band,
//                 disc_length, t_max, t_step
//   [density]     state, lambda, omega_tau_2pi, cutoff, tau, width, grid, t_max, t_step
//   [limits]      max_memory_mb, max_ed_dimension
//
// Omitted keys keep the defaults below (waveguide geometry of Table I).

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "giantatom/chain_builder.hpp"
#include "giantatom/field_model.hpp"
#include "giantatom/mps.hpp"
#include "giantatom/reference_models.hpp"

namespace giantatom {

enum class ExperimentKind {
  Modes,
  Chain,
  GroundScan,
  OccupationScan,
  Dynamics,
  RwaCompare,
  DarkStates,
  TwoAtomDensity,
  OracleCheck
};
const char* to_string(ExperimentKind k);
ExperimentKind parse_experiment_kind(const std::string& name);

struct PhysicsConfig {
  double length = 1.0;
  double omega = 160.0 * 3.141592653589793;
  double lambda = 0.4;
  int points = 3;
  double tau = 0.05;
  double width = 0.002;
  ProfileKind profile = ProfileKind::Gaussian;
  int cutoff = 600;
  Sector sector = Sector::Even;
};

struct NumericsConfig {
  int n_b = 25;
  int max_bond = 200;
  double svd_cutoff = 1e-12;
  int chain_length = 0;  // 0: full sector
  Reorthogonalization reorth = Reorthogonalization::Full;
  Variant variant = Variant::Full;
  double dt = 1e-3;
  double total_time = 1.0;
  double stride = 5e-3;
  int order = 2;
  int max_sweeps = 30;
  double energy_tol = 1e-10;
  double penalty_weight = 0.0;  // 0: automatic
};

struct DarkStatesConfig {
  double omega_tau = 40.0 * 3.141592653589793;
  double gamma_tau = 4.0;
  double ratio = 0.025;
  int n_max = 200;
  bool propagate = false;
  double half_band = 1000.0;
  double disc_length = 50.0;
  double t_max = 20.0;
  double t_step = 0.05;
};

struct DensityConfig {
  std::string state = "both";  // triplet | singlet | both
  double lambda = 0.208;
  double omega_tau_2pi = 5.0;
  int cutoff = 600;
  double tau = 0.1;
  double width = 1.0 / 300.0;
  int grid = 2048;
  double t_max = 0.4;
  double t_step = 0.05;
};

struct LimitsConfig {
  double max_memory_mb = 4096.0;
  long max_ed_dimension = 200000;
};

struct ExperimentConfig {
  ExperimentKind kind = ExperimentKind::Modes;
  std::string output = "out";
  std::uint64_t seed = 1;
  PhysicsConfig physics;
  NumericsConfig numerics;
  std::vector<double> lambdas{0.0, 0.1, 0.2, 0.3, 0.4};
  DarkStatesConfig dark;
  DensityConfig density;
  LimitsConfig limits;

  void validate() const;
  /// Fully resolved configuration in the same INI format.
  std::string to_ini() const;

  ModeBasis mode_basis() const;
  EmitterSpec emitter(double lambda) const;
  EvolutionConfig evolution() const;
  DarkStateParams dark_params() const;
};

ExperimentConfig parse_config(const std::string& text, const std::string& source = "<config>");
ExperimentConfig load_config(const std::string& path);

}  // namespace giantatom
