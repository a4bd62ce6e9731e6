#include "giantatom/reference_models.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numbers>

#include "giantatom/error.hpp"

namespace giantatom {

namespace {

using Vec = Eigen::VectorXcd;
using MatVec = std::function<void(const Vec&, Vec&)>;

constexpr double kPi = std::numbers::pi;

// exp(-iHt) psi by a Chebyshev series in (H - c) / a, where [c - a, c + a]
// encloses the spectrum. Needs only matvecs, so it scales to the ~10^4-10^5
// dimensional single-excitation problems.
class ChebyshevPropagator {
 public:
  ChebyshevPropagator(MatVec op, double lo, double hi, double tol, double max_phase)
      : op_(std::move(op)), c_(0.5 * (hi + lo)), a_(0.5 * (hi - lo) * 1.01 + 1e-12), tol_(tol),
        max_phase_(max_phase) {}

  void propagate(Vec& psi, double T) const {
    if (T == 0.0) return;
    const int chunks = std::max(1, static_cast<int>(std::ceil(std::abs(T) * a_ / max_phase_)));
    for (int i = 0; i < chunks; ++i) chunk(psi, T / chunks);
  }

 private:
  void chunk(Vec& psi, double dt) const {
    const double z = a_ * std::abs(dt);
    const double sgn = dt < 0 ? -1.0 : 1.0;
    // exp(-i x z sgn) = sum_k (2 - delta_k0) (-i sgn)^k J_k(z) T_k(x)
    std::vector<double> J;
    for (int k = 0;; ++k) {
      const double v = std::cyl_bessel_j(static_cast<double>(k), z);
      J.push_back(v);
      if (k > z && std::abs(v) < tol_ && J.size() > 2 && std::abs(J[J.size() - 2]) < tol_) break;
    }
    auto scaled = [&](const Vec& x, Vec& y) {
      op_(x, y);
      y -= c_ * x;
      y *= 1.0 / a_;
    };
    Vec t0 = psi, t1, t2, hx;
    scaled(t0, t1);
    Vec out = J[0] * t0;
    const cplx mi(0.0, -sgn);
    cplx ph = mi;
    out.noalias() += (2.0 * J[1] * ph) * t1;
    for (std::size_t k = 2; k < J.size(); ++k) {
      scaled(t1, hx);
      t2.noalias() = 2.0 * hx - t0;
      ph *= mi;
      out.noalias() += ((2.0 * J[k]) * ph) * t2;
      t0.swap(t1);
      t1.swap(t2);
    }
    psi = out * std::polar(1.0, -c_ * dt);
  }

  MatVec op_;
  double c_, a_, tol_, max_phase_;
};

std::pair<double, double> gershgorin(const Eigen::SparseMatrix<cplx>& h) {
  double lo = INFINITY, hi = -INFINITY;
  // column discs; H is Hermitian so they equal the row discs
  for (int k = 0; k < h.outerSize(); ++k) {
    double d = 0.0, r = 0.0;
    for (Eigen::SparseMatrix<cplx>::InnerIterator it(h, k); it; ++it) {
      if (it.row() == it.col()) {
        d += it.value().real();
      } else {
        r += std::abs(it.value());
      }
    }
    lo = std::min(lo, d - r);
    hi = std::max(hi, d + r);
  }
  return {lo, hi};
}

void require_normalized(const Vec& v) {
  if (std::abs(v.squaredNorm() - 1.0) > 1e-10) {
    throw Error(ErrorKind::NotNormalized, "initial amplitudes are not normalized");
  }
}

// Evolves `initial` to each time, dense eigendecomposition or Chebyshev series.
std::vector<Vec> propagate_all(int dim, const std::function<Eigen::MatrixXcd()>& dense, const MatVec& op,
                               std::pair<double, double> bounds, const Vec& initial, std::span<const double> times,
                               const PropagationOptions& opts) {
  std::vector<Vec> out;
  out.reserve(times.size());
  if (dim <= opts.dense_limit) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(dense());
    if (es.info() != Eigen::Success) throw Error(ErrorKind::NumericalFailure, "eigendecomposition failed");
    const Vec c = es.eigenvectors().adjoint() * initial;
    for (double t : times) {
      Vec ph(c.size());
      for (Eigen::Index i = 0; i < c.size(); ++i) ph[i] = std::polar(1.0, -es.eigenvalues()[i] * t) * c[i];
      out.push_back(es.eigenvectors() * ph);
    }
    return out;
  }
  const ChebyshevPropagator prop(op, bounds.first, bounds.second, opts.series_tol, opts.max_chunk_phase);
  Vec psi = initial;
  double now = 0.0;
  for (double t : times) {
    prop.propagate(psi, t - now);
    now = t;
    out.push_back(psi);
  }
  return out;
}

}  // namespace

// ---------------------------------------------------------------------------
// Single-excitation sector

Eigen::MatrixXcd SingleExcitationSetup::dense() const {
  const int ne = emitters(), nm = modes();
  Eigen::MatrixXcd H = Eigen::MatrixXcd::Zero(ne + nm, ne + nm);
  for (int a = 0; a < ne; ++a) H(a, a) = emitter_frequencies[a];
  for (int j = 0; j < nm; ++j) H(ne + j, ne + j) = mode_frequencies[j];
  H.topRightCorner(ne, nm) = couplings;
  H.bottomLeftCorner(nm, ne) = couplings.adjoint();
  return H;
}

void SingleExcitationSetup::apply(const Vec& x, Vec& y) const {
  const int ne = emitters(), nm = modes();
  y.resize(ne + nm);
  // single pass over the modes; the emitter rows accumulate alongside
  cplx acc[8] = {};
  cplx xe[8] = {};
  if (ne > 8) {
    y.head(ne) = emitter_frequencies.cast<cplx>().cwiseProduct(x.head(ne)) + couplings * x.tail(nm);
    y.tail(nm) = mode_frequencies.cast<cplx>().cwiseProduct(x.tail(nm)) + couplings.adjoint() * x.head(ne);
    return;
  }
  for (int a = 0; a < ne; ++a) xe[a] = x[a];
  // plain real arithmetic: std::complex products go through the slow
  // NaN-aware path without -ffast-math
  const double* G = reinterpret_cast<const double*>(couplings.data());
  const double* xm = reinterpret_cast<const double*>(x.data() + ne);
  double* ym = reinterpret_cast<double*>(y.data() + ne);
  double ar[8] = {}, ai[8] = {}, er[8], ei[8];
  for (int a = 0; a < ne; ++a) er[a] = xe[a].real(), ei[a] = xe[a].imag();
  for (int j = 0; j < nm; ++j) {
    const double xr = xm[2 * j], xi = xm[2 * j + 1], w = mode_frequencies[j];
    double yr = w * xr, yi = w * xi;
    for (int a = 0; a < ne; ++a) {
      const double gr = G[2 * (static_cast<std::size_t>(j) * ne + a)];
      const double gi = G[2 * (static_cast<std::size_t>(j) * ne + a) + 1];
      yr += gr * er[a] + gi * ei[a];
      yi += gr * ei[a] - gi * er[a];
      ar[a] += gr * xr - gi * xi;
      ai[a] += gr * xi + gi * xr;
    }
    ym[2 * j] = yr;
    ym[2 * j + 1] = yi;
  }
  for (int a = 0; a < ne; ++a) acc[a] = cplx(ar[a], ai[a]);
  for (int a = 0; a < ne; ++a) y[a] = emitter_frequencies[a] * xe[a] + acc[a];
}

std::pair<double, double> SingleExcitationSetup::spectral_bounds() const {
  // H = diag + off-diagonal block of spectral norm ||G||_2.
  const Eigen::MatrixXcd gram = couplings * couplings.adjoint();
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(gram, Eigen::EigenvaluesOnly);
  const double g = std::sqrt(std::max(0.0, es.eigenvalues().maxCoeff()));
  const double lo = std::min(emitter_frequencies.minCoeff(), mode_frequencies.minCoeff());
  const double hi = std::max(emitter_frequencies.maxCoeff(), mode_frequencies.maxCoeff());
  return {lo - g, hi + g};
}

double SingleExcitationSetup::hermiticity_error() const {
  // The arrowhead form is Hermitian by construction; what can break is a
  // complex diagonal or non-finite entries.
  double err = 0.0;
  if (couplings.rows() != emitters() || couplings.cols() != modes()) return INFINITY;
  if (!couplings.allFinite() || !emitter_frequencies.allFinite() || !mode_frequencies.allFinite()) return INFINITY;
  if (dimension() <= 2000) {
    const Eigen::MatrixXcd H = dense();
    err = (H - H.adjoint()).cwiseAbs().maxCoeff();
  }
  return err;
}

SingleExcitationSetup rwa_single_excitation(const ModeBasis& basis, std::span<const EmitterSpec> emitters) {
  if (emitters.empty()) throw Error(ErrorKind::InvalidArgument, "at least one emitter required");
  SingleExcitationSetup s;
  const auto ne = static_cast<Eigen::Index>(emitters.size());
  const auto nm = static_cast<Eigen::Index>(basis.size());
  s.emitter_frequencies.resize(ne);
  s.couplings.resize(ne, nm);
  for (Eigen::Index a = 0; a < ne; ++a) {
    const EmitterSpec& e = emitters[a];
    e.validate();
    s.emitter_frequencies[a] = e.frequency;
    s.emitter_positions.push_back(e.positions);
    s.couplings.row(a) = e.coupling * coupling_vector(basis, e).coefficients.transpose();
  }
  s.mode_frequencies = basis.frequency_vector();
  s.mode_wavenumbers = Eigen::Map<const Eigen::VectorXd>(basis.wavenumbers.data(), nm);
  s.length = basis.length;
  s.basis = basis;
  return s;
}

const char* to_string(DarkParity p) { return p == DarkParity::Symmetric ? "symmetric" : "antisymmetric"; }

void DarkStateParams::validate() const {
  if (!(gamma_tau > 0.0)) throw Error(ErrorKind::InvalidArgument, "gamma tau must be positive");
  if (!(ratio > 0.0 && ratio < 1.0)) throw Error(ErrorKind::InvalidArgument, "tau_s / tau must lie in (0, 1)");
  if (!(tau > 0.0) || !std::isfinite(omega)) throw Error(ErrorKind::InvalidArgument, "bad tau or omega");
}

SingleExcitationSetup dark_state_setup(const DarkStateParams& params, const DarkStateDiscretization& disc) {
  params.validate();
  if (!(disc.half_band > 0.0) || !(disc.length > 0.0)) {
    throw Error(ErrorKind::InvalidArgument, "discretization needs positive band and length");
  }
  const double tau = params.tau, L = disc.length * tau, W = disc.half_band / tau;
  const double dk = 2.0 * kPi / L;
  const int nmax = static_cast<int>(std::floor(W / dk));
  const double g = std::sqrt(params.gamma() / (2.0 * L));
  const std::vector<std::vector<double>> points{{0.0, tau}, {params.tau_s(), params.tau_s() + tau}};

  SingleExcitationSetup s;
  s.length = L;
  s.emitter_positions = points;
  s.emitter_frequencies = Eigen::VectorXd::Constant(2, params.omega);
  const int per_branch = 2 * nmax + 1;
  s.mode_frequencies.resize(2 * per_branch);
  s.mode_wavenumbers.resize(2 * per_branch);
  s.couplings.resize(2, 2 * per_branch);
  int col = 0;
  for (int branch : {1, -1}) {
    for (int n = -nmax; n <= nmax; ++n, ++col) {
      const double w = params.omega + dk * n;
      const double k = branch * w;
      s.mode_frequencies[col] = w;
      s.mode_wavenumbers[col] = k;
      for (int a = 0; a < 2; ++a) {
        cplx c = 0.0;
        for (double x : points[a]) c += std::polar(g, k * x);
        s.couplings(a, col) = c;
      }
    }
  }
  return s;
}

SingleExcitationResult single_excitation_evolve(const SingleExcitationSetup& setup, const Vec& initial,
                                                std::span<const double> times,
                                                const PropagationOptions& options) {
  if (initial.size() != setup.dimension()) {
    throw Error(ErrorKind::DimensionMismatch, "initial vector does not match the setup dimension");
  }
  require_normalized(initial);
  const int ne = setup.emitters();
  std::vector<std::string> cols{"t"};
  for (int a = 0; a < ne; ++a) cols.push_back("p_e_" + std::to_string(a + 1));
  cols.push_back("photon");
  cols.push_back("norm");

  const auto states = propagate_all(
      setup.dimension(), [&] { return setup.dense(); },
      [&](const Vec& x, Vec& y) { setup.apply(x, y); }, setup.spectral_bounds(), initial, times, options);

  SingleExcitationResult r;
  r.populations = ObservableTable(cols);
  for (std::size_t i = 0; i < times.size(); ++i) {
    const Vec& psi = states[i];
    std::vector<Cell> row{times[i]};
    for (int a = 0; a < ne; ++a) row.emplace_back(std::norm(psi[a]));
    row.emplace_back(psi.tail(setup.modes()).squaredNorm());
    row.emplace_back(psi.squaredNorm());
    r.populations.add_row(std::move(row));
    if (options.keep_amplitudes) r.amplitudes.push_back(psi);
  }
  return r;
}

// ---------------------------------------------------------------------------
// Dark-state analytics

namespace {

bool near(double a, double b) { return std::abs(a - b) <= 1e-9 * std::max(1.0, std::max(std::abs(a), std::abs(b))); }

bool satisfies(int n, DarkParity parity, const DarkStateParams& p) {
  const double q = n / (4.0 * p.ratio);
  const double s = std::sin(kPi * n / 2.0);
  const double base = (kPi * n / 2.0) / p.ratio;
  const double wt = p.omega * p.tau;
  if (parity == DarkParity::Symmetric) return near(q, std::round(q)) && near(wt, base - p.gamma_tau * s);
  return near(q - 0.5, std::round(q - 0.5)) && near(wt, base + p.gamma_tau * s);
}

}  // namespace

std::vector<DarkStateSolution> dark_state_conditions(const DarkStateParams& params, int n_max) {
  params.validate();
  if (n_max < 1) throw Error(ErrorKind::InvalidArgument, "n_max must be >= 1");
  std::vector<DarkStateSolution> out;
  for (int n = 1; n <= n_max; ++n)
    for (DarkParity par : {DarkParity::Symmetric, DarkParity::Antisymmetric})
      if (satisfies(n, par, params))
        out.push_back({n, par, dark_state_amplitude(n, par, params, 0.0), kPi * n / (2.0 * params.tau_s())});
  return out;
}

cplx dark_state_amplitude(int n, DarkParity parity, const DarkStateParams& params, double t) {
  params.validate();
  if (n < 1 || !satisfies(n, parity, params)) {
    throw Error(ErrorKind::InvalidDarkState, "n = " + std::to_string(n) + " (" + to_string(parity) +
                                                 ") does not satisfy the dark-state condition");
  }
  const double r = params.ratio, gt = params.gamma_tau;
  const double c = std::cos(kPi * n / 2.0), s = std::sin(kPi * n / 2.0);
  const cplx phase = std::polar(1.0, kPi * n * t / (2.0 * params.tau_s()));
  if (parity == DarkParity::Symmetric) {
    const cplx denom = 1.0 - gt * (1.0 + (1.0 + r) * c + cplx(0.0, 2.0 * r * s));
    return 0.5 * phase / denom;
  }
  return 0.5 * phase / (1.0 + gt * (1.0 - (1.0 - r) * c));
}

cplx dark_state_superposition(const DarkStateParams& params, int n_max, double t) {
  cplx sum = 0.0;
  for (const auto& sol : dark_state_conditions(params, n_max)) sum += dark_state_amplitude(sol.n, sol.parity, params, t);
  return sum;
}

// ---------------------------------------------------------------------------
// Bell-state emission

const char* to_string(BellState b) { return b == BellState::Triplet ? "triplet" : "singlet"; }

BellStateResult bell_state_emission(const SingleExcitationSetup& setup, BellState initial,
                                    std::span<const double> times, std::span<const double> grid,
                                    const PropagationOptions& options) {
  if (setup.emitters() != 2) throw Error(ErrorKind::InvalidArgument, "Bell states need two emitters");
  if (!setup.basis) throw Error(ErrorKind::InvalidArgument, "energy density needs a periodic mode basis");
  Vec init = Vec::Zero(setup.dimension());
  init[0] = 1.0 / std::sqrt(2.0);
  init[1] = (initial == BellState::Triplet ? 1.0 : -1.0) / std::sqrt(2.0);

  PropagationOptions opts = options;
  opts.keep_amplitudes = true;
  const auto se = single_excitation_evolve(setup, init, times, opts);

  BellStateResult r;
  double lo = INFINITY, hi = -INFINITY;
  for (const auto& pts : setup.emitter_positions)
    for (double x : pts) lo = std::min(lo, x), hi = std::max(hi, x);
  r.inner_left = lo;
  r.inner_right = hi;
  r.summary = ObservableTable({"t", "p_e_1", "p_e_2", "field_energy", "inner_energy"});
  for (std::size_t i = 0; i < times.size(); ++i) {
    const Vec& psi = se.amplitudes[i];
    const Vec photons = psi.tail(setup.modes());
    auto field = energy_density_single(photons, *setup.basis, grid);
    double e_field = 0.0;
    for (int j = 0; j < setup.modes(); ++j) e_field += setup.mode_frequencies[j] * std::norm(photons[j]);
    const double inner = field.integrate(lo, hi);
    r.summary.add_row({times[i], std::norm(psi[0]), std::norm(psi[1]), e_field, inner});
    r.densities.push_back(std::move(field));
  }
  return r;
}

// ---------------------------------------------------------------------------
// Exact diagonalization

EdModel EdModel::from_chain(const ChainRep& chain, const EmitterSpec& emitter, Variant variant, int n_b) {
  if (chain.is_block()) throw Error(ErrorKind::Unsupported, "ED oracle takes a single-emitter chain");
  EdModel m;
  m.omega = emitter.frequency;
  m.hopping = chain.single_particle_matrix();
  m.couplings = Vec::Zero(chain.length());
  m.couplings[0] = chain.interaction_scale(emitter.coupling);
  m.variant = variant;
  m.n_b = n_b;
  return m;
}

EdModel EdModel::from_modes(const ModeBasis& basis, const CouplingVector& coupling, const EmitterSpec& emitter,
                            Variant variant, int n_b) {
  if (coupling.coefficients.size() != static_cast<Eigen::Index>(basis.size())) {
    throw Error(ErrorKind::DimensionMismatch, "coupling vector not aligned with basis");
  }
  EdModel m;
  m.omega = emitter.frequency;
  m.hopping = basis.frequency_vector().cast<cplx>().asDiagonal();
  m.couplings = emitter.coupling * coupling.coefficients;
  m.variant = variant;
  m.n_b = n_b;
  return m;
}

EdOracle::EdOracle(EdModel model, long dimension_cap) : model_(std::move(model)) {
  const int m = model_.modes();
  const int nb = model_.n_b;
  if (nb < 1) throw Error(ErrorKind::InvalidArgument, "n_b must be >= 1");
  if (model_.couplings.size() != m || model_.hopping.cols() != m) {
    throw Error(ErrorKind::DimensionMismatch, "hopping and couplings disagree on the mode count");
  }
  long double dim = 2.0L;
  for (int i = 0; i < m; ++i) {
    dim *= nb;
    if (dim > static_cast<long double>(dimension_cap)) {
      throw Error(ErrorKind::DimensionCapExceeded,
                  "Hilbert dimension 2 * " + std::to_string(nb) + "^" + std::to_string(m) + " exceeds cap " +
                      std::to_string(dimension_cap));
    }
  }
  dimension_ = static_cast<long>(dim);
  const long B = dimension_ / 2;
  std::vector<long> stride(m);
  for (int i = m - 1, s = 1; i >= 0; --i, s *= nb) stride[i] = s;

  const double scale = std::max(1.0, model_.hopping.cwiseAbs().maxCoeff());
  std::vector<Eigen::Triplet<cplx>> trips;
  std::vector<int> occ(m);
  for (long r = 0; r < B; ++r) {
    long rest = r;
    for (int i = 0; i < m; ++i) occ[i] = static_cast<int>(rest / stride[i]), rest %= stride[i];
    for (int a = 0; a < 2; ++a) {
      const long col = a * B + r;
      double diag = (a == 1 ? 0.5 : -0.5) * model_.omega;
      for (int i = 0; i < m; ++i) diag += model_.hopping(i, i).real() * occ[i];
      trips.emplace_back(col, col, diag);
      for (int i = 0; i < m; ++i)
        for (int j = 0; j < m; ++j) {
          if (i == j || std::abs(model_.hopping(i, j)) <= 1e-15 * scale) continue;
          if (occ[j] == 0 || occ[i] == nb - 1) continue;
          const long row = col - stride[j] + stride[i];
          trips.emplace_back(row, col, model_.hopping(i, j) * std::sqrt(double(occ[j]) * (occ[i] + 1)));
        }
      const long flip = (1 - a) * B;
      const bool full = model_.variant == Variant::Full;
      for (int i = 0; i < m; ++i) {
        const cplx g = model_.couplings[i];
        if (g == cplx(0.0)) continue;
        // sigma_+ b_i (a = 0 -> 1) and, beyond RWA, sigma_- b_i (a = 1 -> 0)
        if (occ[i] > 0 && (full || a == 0)) trips.emplace_back(flip + r - stride[i], col, g * std::sqrt(double(occ[i])));
        if (occ[i] < nb - 1 && (full || a == 1))
          trips.emplace_back(flip + r + stride[i], col, std::conj(g) * std::sqrt(double(occ[i] + 1)));
      }
    }
  }
  h_.resize(dimension_, dimension_);
  h_.setFromTriplets(trips.begin(), trips.end());
  h_.makeCompressed();
}

Eigen::MatrixXcd EdOracle::dense_hamiltonian() const {
  if (dimension_ > 20000) throw Error(ErrorKind::DimensionCapExceeded, "dense ED matrix too large");
  return Eigen::MatrixXcd(h_);
}

EdSpectrum EdOracle::lowest(int count) const {
  if (count < 1 || count > dimension_) throw Error(ErrorKind::InvalidArgument, "bad eigenpair count");
  EdSpectrum out;
  if (dimension_ <= 4000) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(dense_hamiltonian());
    out.energies = es.eigenvalues().head(count);
    out.states = es.eigenvectors().leftCols(count);
    return out;
  }
  // Restarted Lanczos with explicit deflation of converged vectors.
  const long n = dimension_;
  const int kdim = static_cast<int>(std::min<long>(n, 120));
  const double hnorm = [&] {
    double s = 0.0;
    for (int k = 0; k < h_.outerSize(); ++k) {
      double c = 0.0;
      for (Eigen::SparseMatrix<cplx>::InnerIterator it(h_, k); it; ++it) c += std::abs(it.value());
      s = std::max(s, c);
    }
    return s;
  }();
  std::vector<Vec> found;
  std::vector<double> energies;
  auto deflate = [&](Vec& v) {
    for (int pass = 0; pass < 2; ++pass)
      for (const auto& f : found) v -= f * f.dot(v);
  };
  for (int e = 0; e < count; ++e) {
    Vec v = Vec::Zero(n);
    for (long i = 0; i < n; ++i) v[i] = cplx(std::sin(0.37 * (i + 1) + e), std::cos(0.11 * (i + 3)));
    deflate(v);
    v.normalize();
    double theta = 0.0;
    bool ok = false;
    for (int restart = 0; restart < 200 && !ok; ++restart) {
      Eigen::MatrixXcd V(n, kdim);
      std::vector<double> al, be;
      V.col(0) = v;
      int k = 0;
      for (; k < kdim; ++k) {
        Vec w = h_ * V.col(k);
        deflate(w);
        al.push_back(V.col(k).dot(w).real());
        for (int pass = 0; pass < 2; ++pass) w -= V.leftCols(k + 1) * (V.leftCols(k + 1).adjoint() * w);
        const double b = w.norm();
        if (b < 1e-12 * hnorm || k + 1 == kdim) {
          ++k;
          break;
        }
        be.push_back(b);
        V.col(k + 1) = w / b;
      }
      Eigen::MatrixXd T = Eigen::MatrixXd::Zero(k, k);
      for (int i = 0; i < k; ++i) T(i, i) = al[i];
      for (int i = 0; i + 1 < k; ++i) T(i, i + 1) = T(i + 1, i) = be[i];
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(T);
      theta = es.eigenvalues()[0];
      v = V.leftCols(k) * es.eigenvectors().col(0).cast<cplx>();
      deflate(v);
      v.normalize();
      Vec r = h_ * v;
      deflate(r);
      ok = (r - theta * v).norm() <= 1e-11 * hnorm;
    }
    if (!ok) throw Error(ErrorKind::NumericalFailure, "ED Lanczos did not converge");
    found.push_back(v);
    energies.push_back(theta);
  }
  out.energies = Eigen::Map<Eigen::VectorXd>(energies.data(), count);
  out.states.resize(n, count);
  for (int e = 0; e < count; ++e) out.states.col(e) = found[e];
  return out;
}

Vec EdOracle::basis_state(std::span<const int> local) const {
  const int m = model_.modes();
  if (static_cast<int>(local.size()) != m + 1) throw Error(ErrorKind::DimensionMismatch, "one index per site");
  if (local[0] < 0 || local[0] > 1) throw Error(ErrorKind::InvalidArgument, "atom index out of range");
  long idx = local[0];
  for (int i = 1; i <= m; ++i) {
    if (local[i] < 0 || local[i] >= model_.n_b) throw Error(ErrorKind::InvalidArgument, "occupation out of range");
    idx = idx * model_.n_b + local[i];
  }
  Vec v = Vec::Zero(dimension_);
  v[idx] = 1.0;
  return v;
}

std::vector<Vec> EdOracle::evolve(const Vec& initial, std::span<const double> times) const {
  if (initial.size() != dimension_) throw Error(ErrorKind::DimensionMismatch, "initial state size");
  require_normalized(initial);
  PropagationOptions opts;
  return propagate_all(
      static_cast<int>(dimension_), [&] { return dense_hamiltonian(); },
      [&](const Vec& x, Vec& y) { y = h_ * x; }, gershgorin(h_), initial, times, opts);
}

ObservableTable EdOracle::evolve_observables(const Vec& initial, std::span<const double> times) const {
  const auto states = evolve(initial, times);
  ObservableTable t({"t", "p_e", "n_field"});
  for (std::size_t i = 0; i < times.size(); ++i)
    t.add_row({times[i], excited_population(states[i]), boson_number(states[i])});
  return t;
}

double EdOracle::excited_population(const Vec& psi) const { return psi.tail(dimension_ / 2).squaredNorm(); }

double EdOracle::boson_number(const Vec& psi) const {
  const long B = dimension_ / 2;
  const int m = model_.modes(), nb = model_.n_b;
  double total = 0.0;
  for (long idx = 0; idx < dimension_; ++idx) {
    const double p = std::norm(psi[idx]);
    if (p == 0.0) continue;
    long r = idx % B;
    int n = 0;
    for (int i = 0; i < m; ++i) n += static_cast<int>(r % nb), r /= nb;
    total += p * n;
  }
  return total;
}

}  // namespace giantatom
