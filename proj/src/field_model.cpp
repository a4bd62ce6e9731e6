#include "giantatom/field_model.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

#include "giantatom/error.hpp"

namespace giantatom {

namespace {

constexpr double kPi = std::numbers::pi;
constexpr double kEvenTolerance = 1e-12;

}  // namespace

Eigen::VectorXd ModeBasis::frequency_vector() const {
  return Eigen::Map<const Eigen::VectorXd>(frequencies.data(),
                                           static_cast<Eigen::Index>(frequencies.size()));
}

int ModeBasis::position_of(int j) const {
  if (j == 0 || std::abs(j) > cutoff) return -1;
  if (sector == Sector::Even) return j > 0 ? j - 1 : -1;
  return j < 0 ? j + cutoff : cutoff + j - 1;
}

ModeBasis build_mode_basis(double length, int cutoff, Sector sector) {
  if (!(length > 0.0) || !std::isfinite(length)) {
    throw Error(ErrorKind::InvalidArgument, "waveguide length must be positive");
  }
  if (cutoff < 1) {
    throw Error(ErrorKind::InvalidArgument, "mode cutoff must be >= 1");
  }
  ModeBasis basis;
  basis.length = length;
  basis.cutoff = cutoff;
  basis.sector = sector;
  auto push = [&](int j) {
    double k = 2.0 * kPi * j / length;
    basis.indices.push_back(j);
    basis.wavenumbers.push_back(k);
    basis.frequencies.push_back(std::abs(k));
  };
  if (sector == Sector::Full) {
    for (int j = -cutoff; j <= -1; ++j) push(j);
  }
  for (int j = 1; j <= cutoff; ++j) push(j);
  return basis;
}

ProfileKind parse_profile_kind(const std::string& name) {
  std::string s = name;
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::tolower(c); });
  if (s == "gaussian") return ProfileKind::Gaussian;
  if (s == "lorentzian") return ProfileKind::Lorentzian;
  if (s == "rectangle") return ProfileKind::Rectangle;
  if (s == "delta") return ProfileKind::Delta;
  throw Error(ErrorKind::InvalidArgument, "unknown profile kind '" + name + "'");
}

const char* to_string(ProfileKind kind) {
  switch (kind) {
    case ProfileKind::Gaussian: return "gaussian";
    case ProfileKind::Lorentzian: return "lorentzian";
    case ProfileKind::Rectangle: return "rectangle";
    case ProfileKind::Delta: return "delta";
  }
  return "unknown";
}

void CouplingProfile::validate() const {
  if (kind != ProfileKind::Delta && !(half_width > 0.0)) {
    throw Error(ErrorKind::InvalidArgument, "profile half width d must be > 0");
  }
  if (half_width < 0.0) {
    throw Error(ErrorKind::InvalidArgument, "profile half width d must be >= 0");
  }
}

double CouplingProfile::density(double x) const {
  switch (kind) {
    case ProfileKind::Gaussian:
      return std::exp(-x * x / (half_width * half_width)) / (half_width * std::sqrt(kPi));
    case ProfileKind::Lorentzian:
      return half_width / (kPi * (half_width * half_width + x * x));
    case ProfileKind::Rectangle:
      return std::abs(x) <= half_width ? 0.5 / half_width : 0.0;
    case ProfileKind::Delta:
      break;
  }
  throw Error(ErrorKind::InvalidArgument, "delta profile has no pointwise density");
}

cplx profile_fourier(const CouplingProfile& profile, double k) {
  const double d = profile.half_width;
  switch (profile.kind) {
    case ProfileKind::Gaussian:
      return std::exp(-k * k * d * d / 4.0);
    case ProfileKind::Lorentzian:
      return std::exp(-std::abs(k) * d);
    case ProfileKind::Rectangle: {
      const double x = k * d;
      if (std::abs(x) < 1e-8) return 1.0 - x * x / 6.0;
      return std::sin(x) / x;
    }
    case ProfileKind::Delta:
      return 1.0;
  }
  return 0.0;
}

EmitterSpec EmitterSpec::equidistant(double frequency, double coupling, int points,
                                     double spacing, CouplingProfile profile, double center) {
  if (points < 1) throw Error(ErrorKind::InvalidArgument, "emitter needs at least one point");
  EmitterSpec e;
  e.frequency = frequency;
  e.coupling = coupling;
  e.profile = profile;
  const double first = center - 0.5 * spacing * (points - 1);
  for (int l = 0; l < points; ++l) e.positions.push_back(first + spacing * l);
  return e;
}

void EmitterSpec::validate() const {
  if (!(frequency > 0.0)) throw Error(ErrorKind::InvalidArgument, "emitter frequency must be > 0");
  if (!(coupling >= 0.0)) throw Error(ErrorKind::InvalidArgument, "coupling must be >= 0");
  if (positions.empty()) throw Error(ErrorKind::InvalidArgument, "emitter has no coupling points");
  profile.validate();
}

double CouplingVector::interaction_scale(double lambda) const { return lambda * std::sqrt(mu0); }

namespace {

CouplingVector full_sector_coupling(const ModeBasis& full, const EmitterSpec& emitter,
                                    const CouplingOptions& options) {
  emitter.validate();
  CouplingVector out;
  const double L = full.length;
  if (emitter.profile.kind == ProfileKind::Delta && full.cutoff > options.delta_cutoff_cap) {
    std::ostringstream msg;
    msg << "delta coupling with cutoff " << full.cutoff << " above cap "
        << options.delta_cutoff_cap << "; coefficients grow as sqrt(|j|)";
    throw Error(ErrorKind::UvDivergence, msg.str());
  }
  if (emitter.profile.kind != ProfileKind::Delta && emitter.profile.half_width >= L / 50.0) {
    out.warnings.push_back("profile width d >= L/50: infinite-line Fourier transform is inaccurate");
  }
  out.coefficients.resize(static_cast<Eigen::Index>(full.size()));
  for (std::size_t i = 0; i < full.size(); ++i) {
    const double k = full.wavenumbers[i];
    cplx geometric = 0.0;
    for (double x : emitter.positions) geometric += std::polar(1.0, k * x);
    const cplx value = cplx(0.0, -1.0) * std::sqrt(std::abs(k) / (2.0 * L)) * geometric *
                       profile_fourier(emitter.profile, k);
    out.coefficients[static_cast<Eigen::Index>(i)] = value;
  }
  out.mu0 = out.coefficients.squaredNorm();
  return out;
}

}  // namespace

CouplingVector coupling_vector(const ModeBasis& basis, const EmitterSpec& emitter,
                               const CouplingOptions& options) {
  if (basis.sector == Sector::Full) return full_sector_coupling(basis, emitter, options);
  const ModeBasis full = build_mode_basis(basis.length, basis.cutoff, Sector::Full);
  auto full_coupling = full_sector_coupling(full, emitter, options);
  auto reduced = even_sector_reduce(full_coupling, full);
  reduced.coupling.warnings = std::move(full_coupling.warnings);
  return reduced.coupling;
}

EvenSectorReduction even_sector_reduce(const CouplingVector& coupling, const ModeBasis& basis) {
  if (basis.sector != Sector::Full) {
    throw Error(ErrorKind::InvalidArgument, "even_sector_reduce expects a Full-sector basis");
  }
  if (static_cast<std::size_t>(coupling.coefficients.size()) != basis.size()) {
    throw Error(ErrorKind::DimensionMismatch, "coupling not aligned with basis");
  }
  const int N = basis.cutoff;
  const double scale = std::max(coupling.coefficients.cwiseAbs().maxCoeff(), 1e-300);
  EvenSectorReduction out;
  out.basis = build_mode_basis(basis.length, N, Sector::Even);
  out.coupling.coefficients.resize(N);
  for (int j = 1; j <= N; ++j) {
    const cplx plus = coupling.coefficients[basis.position_of(j)];
    const cplx minus = coupling.coefficients[basis.position_of(-j)];
    if (std::abs(plus - minus) > kEvenTolerance * scale) {
      std::ostringstream msg;
      msg << "f_{-j} != f_j at j = " << j << " (|diff| = " << std::abs(plus - minus) << ")";
      throw Error(ErrorKind::NotEvenProfile, msg.str());
    }
    out.coupling.coefficients[j - 1] = (plus + minus) / std::sqrt(2.0);
  }
  out.coupling.mu0 = coupling.mu0;
  out.coupling.warnings = coupling.warnings;
  return out;
}

Eigen::VectorXcd odd_sector_coupling(const CouplingVector& coupling, const ModeBasis& basis) {
  if (basis.sector != Sector::Full) {
    throw Error(ErrorKind::InvalidArgument, "odd sector needs a Full-sector basis");
  }
  Eigen::VectorXcd odd(basis.cutoff);
  for (int j = 1; j <= basis.cutoff; ++j) {
    odd[j - 1] = (coupling.coefficients[basis.position_of(j)] -
                  coupling.coefficients[basis.position_of(-j)]) /
                 std::sqrt(2.0);
  }
  return odd;
}

}  // namespace giantatom
