// observables.hpp - populations, energies, occupations, overlaps and the
// normal-ordered field energy density.

#pragma once

#include <span>
#include <vector>

#include <Eigen/Dense>

#include "giantatom/chain_builder.hpp"
#include "giantatom/field_model.hpp"
#include "giantatom/mps.hpp"

namespace giantatom {

struct EnergyBreakdown {
  double e_total = 0.0;
  double e_atom = 0.0;
  double e_field = 0.0;
  double e_int = 0.0;
};

struct OccupationRecord {
  double p_e = 0.0;
  double n_field = 0.0;
  double n_1 = 0.0;  // lowest mode of the chain's basis
  std::vector<double> n_modes;
  std::vector<double> n_chain;
};

struct OverlapRecord {
  double gs_g0 = 0.0;     // |<g,0|GS>|^2
  double es_e0 = 0.0;     // |<e,0|ES>|^2
  double es_a1gs = 0.0;   // |<ES|a_1^dag|GS>|^2 / ||a_1^dag GS||^2
  double es_gs = 0.0;     // |<ES|GS>|^2
};

struct EnergyDensityField {
  std::vector<double> x;
  std::vector<double> t00;
  std::vector<double> pi_r2;
  std::vector<double> pi_l2;

  /// Periodic rectangle rule over the full uniform grid.
  double integral(double length) const;
  /// Trapezoid over [a, b] with linear interpolation at the ends (a < b, no wrap).
  double integrate(double a, double b) const;
};

std::vector<double> uniform_grid(double length, int points);

double atomic_population(const MpsState& state);
EnergyBreakdown energy_breakdown(const MpsState& state, const HamiltonianMpos& mpos);
OccupationRecord occupations(const MpsState& state, const ChainRep& chain);
OverlapRecord overlaps(const MpsState& gs, const MpsState& es, const ChainRep& chain,
                       const TruncationPolicy& policy);

/// Expands Even-sector (folded) correlators <a+_p^dag a+_q> onto the Full basis.
Eigen::MatrixXcd unfold_correlators(const Eigen::MatrixXcd& even, const ModeBasis& even_basis);

/// T00 = <:pi_R^2:> + <:pi_L^2:> from <a_p^dag a_q> on `basis` (Full or Even).
EnergyDensityField energy_density(const Eigen::MatrixXcd& correlators, const ModeBasis& basis,
                                  std::span<const double> grid);
/// Same for a single-excitation state with photon amplitudes psi_j.
EnergyDensityField energy_density_single(const Eigen::VectorXcd& photon_amplitudes, const ModeBasis& basis,
                                         std::span<const double> grid);

}  // namespace giantatom
