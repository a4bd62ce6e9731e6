// field_model.hpp - discretized waveguide modes, coupling-point profiles and
// emitter-field coupling coefficients.
//
// Units: hbar = c = 1; the waveguide length L sets the length unit.

#pragma once

#include <complex>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace giantatom {

using cplx = std::complex<double>;

enum class Sector { Full, Even };

/// Periodic waveguide eigenmodes k_j = 2 pi j / L with the zero mode removed.
///
/// Full sector stores j = -N..-1, 1..N in ascending order. Even sector stores
/// one folded mode (a_j + a_{-j})/sqrt(2) per j = 1..N.
struct ModeBasis {
  double length = 1.0;
  int cutoff = 0;
  Sector sector = Sector::Full;
  std::vector<int> indices;
  std::vector<double> wavenumbers;
  std::vector<double> frequencies;

  std::size_t size() const { return indices.size(); }
  int fold_multiplicity() const { return sector == Sector::Even ? 2 : 1; }
  Eigen::VectorXd frequency_vector() const;
  // Position of index j in this basis, or -1.
  int position_of(int j) const;
  // Position of the lowest-frequency mode (j = +1).
  int lowest_mode() const { return position_of(1); }
};

ModeBasis build_mode_basis(double length, int cutoff, Sector sector);

enum class ProfileKind { Gaussian, Lorentzian, Rectangle, Delta };

ProfileKind parse_profile_kind(const std::string& name);
const char* to_string(ProfileKind kind);

/// Normalized smearing function of a single coupling point.
struct CouplingProfile {
  ProfileKind kind = ProfileKind::Gaussian;
  double half_width = 0.0;  // d; ignored for Delta

  static CouplingProfile gaussian(double d) { return {ProfileKind::Gaussian, d}; }
  static CouplingProfile lorentzian(double d) { return {ProfileKind::Lorentzian, d}; }
  static CouplingProfile rectangle(double d) { return {ProfileKind::Rectangle, d}; }
  static CouplingProfile delta() { return {ProfileKind::Delta, 0.0}; }

  void validate() const;
  // Real-space density f^s(x); not defined for Delta.
  double density(double x) const;
};

/// Fourier transform over the infinite line, int dx e^{ikx} f^s(x).
cplx profile_fourier(const CouplingProfile& profile, double k);

struct EmitterSpec {
  double frequency = 0.0;         // Omega
  double coupling = 0.0;          // lambda (dimensionless)
  std::vector<double> positions;  // x_l
  CouplingProfile profile;

  /// M equidistant points centred on `center` with spacing tau.
  static EmitterSpec equidistant(double frequency, double coupling, int points, double spacing,
                                 CouplingProfile profile, double center = 0.0);
  void validate() const;
};

struct CouplingOptions {
  // Delta profiles diverge in the UV; refuse cutoffs beyond this.
  int delta_cutoff_cap = 1000;
};

struct CouplingVector {
  Eigen::VectorXcd coefficients;  // f_j, aligned with the basis, -i phase kept
  double mu0 = 0.0;               // sum_j |f_j|^2
  std::vector<std::string> warnings;

  double interaction_scale(double lambda) const;  // lambda sqrt(mu0)
};

/// f_j = -i sqrt(|k_j| / 2L) sum_l e^{i k_j x_l} F(k_j).
///
/// On an Even basis the full-sector coefficients are computed first and then
/// folded, so the emitter must be even about x = 0.
CouplingVector coupling_vector(const ModeBasis& basis, const EmitterSpec& emitter,
                               const CouplingOptions& options = {});

struct EvenSectorReduction {
  CouplingVector coupling;
  ModeBasis basis;
};

/// Folds a Full-sector coupling onto the even modes: coefficient sqrt(2) f_j.
EvenSectorReduction even_sector_reduce(const CouplingVector& coupling, const ModeBasis& basis);

/// Coupling of the odd modes (f_j - f_{-j})/sqrt(2), j = 1..N.
Eigen::VectorXcd odd_sector_coupling(const CouplingVector& coupling, const ModeBasis& basis);

}  // namespace giantatom
