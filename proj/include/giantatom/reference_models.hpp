// reference_models.hpp - independent oracles: the single-excitation
// (rotating-wave) propagator for one or two giant atoms, dark-state analytics
// for two braided giant atoms, and exact diagonalization of small truncated
// atom + boson systems.

#pragma once

#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include "giantatom/chain_builder.hpp"
#include "giantatom/field_model.hpp"
#include "giantatom/mps.hpp"
#include "giantatom/observables.hpp"
#include "giantatom/table.hpp"

namespace giantatom {

// ---------------------------------------------------------------------------
// Single-excitation sector

/// H1 over {|e_a>} + {one photon in mode j}, energies relative to the ground
/// state: [[diag(Omega_a), G], [G^dag, diag(omega_j)]] with G(a, j) = <e_a|H|1_j>.
struct SingleExcitationSetup {
  Eigen::VectorXd emitter_frequencies;
  std::vector<std::vector<double>> emitter_positions;
  Eigen::VectorXd mode_frequencies;
  Eigen::VectorXd mode_wavenumbers;
  Eigen::MatrixXcd couplings;  // emitters x modes
  double length = 1.0;
  // Set when the modes are a periodic ModeBasis (main-text model).
  std::optional<ModeBasis> basis;

  int emitters() const { return static_cast<int>(emitter_frequencies.size()); }
  int modes() const { return static_cast<int>(mode_frequencies.size()); }
  int dimension() const { return emitters() + modes(); }
  Eigen::MatrixXcd dense() const;
  void apply(const Eigen::VectorXcd& x, Eigen::VectorXcd& y) const;
  double hermiticity_error() const;
  /// Interval enclosing the spectrum of H1.
  std::pair<double, double> spectral_bounds() const;
};

/// Main-text model in the rotating-wave approximation on a periodic basis:
/// G(a, j) = lambda_a f^a_j.
SingleExcitationSetup rwa_single_excitation(const ModeBasis& basis, std::span<const EmitterSpec> emitters);

enum class DarkParity { Symmetric, Antisymmetric };
const char* to_string(DarkParity p);

struct DarkStateParams {
  double omega = 40.0 * 3.141592653589793;  // in units of 1/tau
  double gamma_tau = 4.0;
  double ratio = 0.025;  // tau_s / tau
  double tau = 1.0;

  void validate() const;
  double tau_s() const { return ratio * tau; }
  double gamma() const { return gamma_tau / tau; }
};

/// Discretization of the two-branch continuum: right and left movers with
/// linear dispersion, omega in [Omega - W, Omega + W] on a grid 2 pi / L.
struct DarkStateDiscretization {
  double half_band = 1000.0;  // W in units of 1/tau
  double length = 50.0;       // L in units of tau
};

/// Two braided two-point emitters at {0, tau} and {tau_s, tau_s + tau}, each
/// point coupled with sqrt(gamma / 4 pi) per unit bandwidth to both branches.
SingleExcitationSetup dark_state_setup(const DarkStateParams& params,
                                       const DarkStateDiscretization& disc = {});

struct PropagationOptions {
  int dense_limit = 4000;  // exact eigendecomposition up to this dimension
  // Above it: Chebyshev series for exp(-iHt), truncated once the Bessel
  // coefficients fall below series_tol, in chunks of at most
  // max_chunk_phase = (spectral half-width) * dt.
  double series_tol = 1e-16;
  double max_chunk_phase = 200.0;
  bool keep_amplitudes = false;
};

struct SingleExcitationResult {
  ObservableTable populations;  // t, p_e_1.., photon, norm
  std::vector<Eigen::VectorXcd> amplitudes;
};

SingleExcitationResult single_excitation_evolve(const SingleExcitationSetup& setup,
                                                const Eigen::VectorXcd& initial,
                                                std::span<const double> times,
                                                const PropagationOptions& options = {});

// ---------------------------------------------------------------------------
// Dark-state analytics

struct DarkStateSolution {
  int n = 0;
  DarkParity parity = DarkParity::Symmetric;
  cplx amplitude;          // beta at t = 0
  double phase_frequency;  // pi n / (2 tau_s)
};

std::vector<DarkStateSolution> dark_state_conditions(const DarkStateParams& params, int n_max);
cplx dark_state_amplitude(int n, DarkParity parity, const DarkStateParams& params, double t);
/// Long-time amplitude of the initially excited atom: sum of all dark-state amplitudes.
cplx dark_state_superposition(const DarkStateParams& params, int n_max, double t);

// ---------------------------------------------------------------------------
// Bell-state emission

enum class BellState { Triplet, Singlet };
const char* to_string(BellState b);

struct BellStateResult {
  ObservableTable summary;  // t, p_e_1, p_e_2, field_energy, inner_energy
  std::vector<EnergyDensityField> densities;
  double inner_left = 0.0;
  double inner_right = 0.0;
};

/// Two emitters initialized in (|eg> +- |ge>)/sqrt(2) with the field in vacuum;
/// inner_energy is the field energy between the outermost coupling points.
BellStateResult bell_state_emission(const SingleExcitationSetup& setup, BellState initial,
                                    std::span<const double> times, std::span<const double> grid,
                                    const PropagationOptions& options = {});

// ---------------------------------------------------------------------------
// Exact diagonalization

/// One two-level atom coupled to bosonic modes with hopping matrix h:
/// H = Omega/2 sigma_z + sum h_ij b_i^dag b_j + H_int with
/// H_int = sigma_x (x) sum_i (g_i b_i + conj(g_i) b_i^dag) (Full) or
/// sigma_+ sum g_i b_i + h.c. (RWA).
struct EdModel {
  double omega = 1.0;
  Eigen::MatrixXcd hopping;
  Eigen::VectorXcd couplings;
  Variant variant = Variant::Full;
  int n_b = 2;

  static EdModel from_chain(const ChainRep& chain, const EmitterSpec& emitter, Variant variant, int n_b);
  static EdModel from_modes(const ModeBasis& basis, const CouplingVector& coupling,
                            const EmitterSpec& emitter, Variant variant, int n_b);
  int modes() const { return static_cast<int>(hopping.rows()); }
};

struct EdSpectrum {
  Eigen::VectorXd energies;
  Eigen::MatrixXcd states;  // columns
};

class EdOracle {
 public:
  explicit EdOracle(EdModel model, long dimension_cap = 200000);

  long dimension() const { return dimension_; }
  const EdModel& model() const { return model_; }
  const Eigen::SparseMatrix<cplx>& hamiltonian() const { return h_; }
  Eigen::MatrixXcd dense_hamiltonian() const;

  /// Lowest `count` eigenpairs (dense solver for small systems, restarted
  /// Lanczos with deflation otherwise).
  EdSpectrum lowest(int count) const;
  Eigen::VectorXcd basis_state(std::span<const int> local) const;
  std::vector<Eigen::VectorXcd> evolve(const Eigen::VectorXcd& initial, std::span<const double> times) const;
  /// t, p_e, n_field at each time.
  ObservableTable evolve_observables(const Eigen::VectorXcd& initial, std::span<const double> times) const;

  double excited_population(const Eigen::VectorXcd& psi) const;
  double boson_number(const Eigen::VectorXcd& psi) const;

 private:
  EdModel model_;
  long dimension_ = 0;
  Eigen::SparseMatrix<cplx> h_;
};

}  // namespace giantatom
