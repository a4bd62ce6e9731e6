#include "giantatom/observables.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "giantatom/error.hpp"

namespace giantatom {

namespace {

constexpr double kNormTol = 1e-8;

void require_normalized(const MpsState& st) {
  const double n = st.norm();
  if (std::abs(n - 1.0) > kNormTol) {
    throw Error(ErrorKind::NotNormalized, "state norm " + std::to_string(n) + " != 1");
  }
}

// Full-basis weights w_j e^{i k_j x} split by direction.
struct ModeWaves {
  std::vector<int> right, left;  // positions in the Full basis
  Eigen::VectorXd weight;
  Eigen::VectorXd k;
};

ModeWaves mode_waves(const ModeBasis& full) {
  ModeWaves w;
  w.weight.resize(static_cast<Eigen::Index>(full.size()));
  w.k.resize(w.weight.size());
  for (std::size_t i = 0; i < full.size(); ++i) {
    w.k[i] = full.wavenumbers[i];
    w.weight[i] = std::sqrt(std::abs(full.wavenumbers[i]) / (2.0 * full.length));
    (full.indices[i] > 0 ? w.right : w.left).push_back(static_cast<int>(i));
  }
  return w;
}

// |sum_{j in set} w_j e^{i k_j x} v_j|^2
double branch_intensity(const ModeWaves& w, const std::vector<int>& set, const Eigen::VectorXcd& v, double x) {
  cplx s = 0.0;
  for (int i : set) s += w.weight[i] * std::polar(1.0, w.k[i] * x) * v[i];
  return std::norm(s);
}

Eigen::VectorXcd unfold_amplitudes(const Eigen::VectorXcd& even, const ModeBasis& even_basis,
                                   const ModeBasis& full) {
  Eigen::VectorXcd out = Eigen::VectorXcd::Zero(static_cast<Eigen::Index>(full.size()));
  for (std::size_t p = 0; p < even_basis.size(); ++p) {
    const int j = even_basis.indices[p];
    out[full.position_of(j)] = even[p] / std::sqrt(2.0);
    out[full.position_of(-j)] = even[p] / std::sqrt(2.0);
  }
  return out;
}

}  // namespace

double EnergyDensityField::integral(double length) const {
  if (x.empty()) return 0.0;
  double s = 0.0;
  for (double v : t00) s += v;
  return s * length / static_cast<double>(x.size());
}

double EnergyDensityField::integrate(double a, double b) const {
  if (x.size() < 2 || !(b > a)) return 0.0;
  auto value_at = [&](double xq) {
    auto it = std::upper_bound(x.begin(), x.end(), xq);
    if (it == x.begin()) return t00.front();
    if (it == x.end()) return t00.back();
    const std::size_t i = static_cast<std::size_t>(it - x.begin());
    const double u = (xq - x[i - 1]) / (x[i] - x[i - 1]);
    return (1 - u) * t00[i - 1] + u * t00[i];
  };
  std::vector<std::pair<double, double>> pts{{a, value_at(a)}};
  for (std::size_t i = 0; i < x.size(); ++i)
    if (x[i] > a && x[i] < b) pts.emplace_back(x[i], t00[i]);
  pts.emplace_back(b, value_at(b));
  double s = 0.0;
  for (std::size_t i = 1; i < pts.size(); ++i)
    s += 0.5 * (pts[i].second + pts[i - 1].second) * (pts[i].first - pts[i - 1].first);
  return s;
}

std::vector<double> uniform_grid(double length, int points) {
  if (points < 2) throw Error(ErrorKind::InvalidArgument, "grid needs at least two points");
  std::vector<double> g(points);
  for (int i = 0; i < points; ++i) g[i] = length * i / points;
  return g;
}

double atomic_population(const MpsState& state) {
  return 0.5 * (1.0 + local_expectation(state, ops::sigma_z(), 0).real());
}

EnergyBreakdown energy_breakdown(const MpsState& state, const HamiltonianMpos& mpos) {
  require_normalized(state);
  EnergyBreakdown e;
  e.e_atom = expectation(state, mpos.atom).real();
  e.e_field = expectation(state, mpos.field).real();
  e.e_int = expectation(state, mpos.interaction).real();
  e.e_total = expectation(state, mpos.total).real();
  const double sum = e.e_atom + e.e_field + e.e_int;
  const double scale = std::max({1.0, std::abs(e.e_atom), std::abs(e.e_field), std::abs(e.e_int)});
  if (std::abs(e.e_total - sum) > 1e-10 * scale) {
    throw Error(ErrorKind::NumericalFailure, "energy components do not add up to the total");
  }
  return e;
}

OccupationRecord occupations(const MpsState& state, const ChainRep& chain) {
  if (state.size() != chain.length() + 1) throw Error(ErrorKind::LayoutMismatch, "state vs chain length");
  OccupationRecord r;
  r.p_e = atomic_population(state);
  const int nb = state.layout.dim(1);
  const Eigen::MatrixXcd C = two_point(state, ops::creation(nb), ops::annihilation(nb), 1);
  for (int i = 0; i < C.rows(); ++i) r.n_chain.push_back(C(i, i).real());
  ModeCorrelators chain_corr{C, {}};
  const auto modes = back_transform_correlations(chain_corr, chain.transform);
  for (int p = 0; p < modes.normal.rows(); ++p) r.n_modes.push_back(modes.normal(p, p).real());
  for (double v : r.n_chain) r.n_field += v;
  const int low = chain.basis.lowest_mode();
  r.n_1 = low >= 0 && low < static_cast<int>(r.n_modes.size()) ? r.n_modes[low] : 0.0;
  return r;
}

OverlapRecord overlaps(const MpsState& gs, const MpsState& es, const ChainRep& chain,
                       const TruncationPolicy& policy) {
  if (!(gs.layout == es.layout)) throw Error(ErrorKind::LayoutMismatch, "GS and ES layouts differ");
  const int m = gs.size();
  std::vector<int> g0(m, 0), e0(m, 0);
  e0[0] = 1;
  const auto ref_g = product_state(gs.layout, g0);
  const auto ref_e = product_state(gs.layout, e0);
  OverlapRecord r;
  r.gs_g0 = std::norm(overlap(ref_g, gs));
  r.es_e0 = std::norm(overlap(ref_e, es));
  r.es_gs = std::norm(overlap(es, gs));
  const auto a1 = mode_creation_mpo(chain, gs.layout, chain.basis.lowest_mode());
  const auto excited = apply_mpo(gs, a1, policy).state;
  const double nn = overlap(excited, excited).real();
  r.es_a1gs = nn > 0.0 ? std::norm(overlap(es, excited)) / nn : 0.0;
  return r;
}

Eigen::MatrixXcd unfold_correlators(const Eigen::MatrixXcd& even, const ModeBasis& even_basis) {
  const ModeBasis full = build_mode_basis(even_basis.length, even_basis.cutoff, Sector::Full);
  const auto n = static_cast<Eigen::Index>(full.size());
  Eigen::MatrixXcd out = Eigen::MatrixXcd::Zero(n, n);
  for (std::size_t p = 0; p < even_basis.size(); ++p)
    for (std::size_t q = 0; q < even_basis.size(); ++q) {
      const int jp = even_basis.indices[p], jq = even_basis.indices[q];
      const cplx v = 0.5 * even(p, q);
      for (int sp : {-1, 1})
        for (int sq : {-1, 1}) out(full.position_of(sp * jp), full.position_of(sq * jq)) = v;
    }
  return out;
}

EnergyDensityField energy_density(const Eigen::MatrixXcd& correlators, const ModeBasis& basis,
                                  std::span<const double> grid) {
  const auto dim = static_cast<Eigen::Index>(basis.size());
  if (correlators.rows() != dim || correlators.cols() != dim) {
    throw Error(ErrorKind::DimensionMismatch, "correlators not aligned with basis");
  }
  const double scale = std::max(1e-300, correlators.cwiseAbs().maxCoeff());
  if ((correlators - correlators.adjoint()).cwiseAbs().maxCoeff() > 1e-10 * scale) {
    throw Error(ErrorKind::NonHermitian, "correlator matrix is not Hermitian");
  }
  const ModeBasis full = basis.sector == Sector::Full
                             ? basis
                             : build_mode_basis(basis.length, basis.cutoff, Sector::Full);
  const Eigen::MatrixXcd C = basis.sector == Sector::Full ? correlators : unfold_correlators(correlators, basis);
  // C = sum_k lambda_k v_k v_k^dag; <:pi^2:> = 2 sum_k lambda_k |u^dag v_k|^2 ... with u_j = w_j e^{-ikx}
  // conjugated, i.e. 2 sum_k lambda_k |sum_j w_j e^{ikx} v_kj|^2.
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(0.5 * (C + C.adjoint()));
  const double lmax = es.eigenvalues().cwiseAbs().maxCoeff();
  const ModeWaves w = mode_waves(full);
  EnergyDensityField f;
  f.x.assign(grid.begin(), grid.end());
  f.pi_r2.assign(grid.size(), 0.0);
  f.pi_l2.assign(grid.size(), 0.0);
  for (Eigen::Index k = 0; k < es.eigenvalues().size(); ++k) {
    const double lambda = es.eigenvalues()[k];
    if (std::abs(lambda) <= 1e-14 * lmax) continue;
    const Eigen::VectorXcd v = es.eigenvectors().col(k);
    for (std::size_t g = 0; g < grid.size(); ++g) {
      f.pi_r2[g] += 2.0 * lambda * branch_intensity(w, w.right, v, grid[g]);
      f.pi_l2[g] += 2.0 * lambda * branch_intensity(w, w.left, v, grid[g]);
    }
  }
  f.t00.resize(grid.size());
  for (std::size_t g = 0; g < grid.size(); ++g) f.t00[g] = f.pi_r2[g] + f.pi_l2[g];
  return f;
}

EnergyDensityField energy_density_single(const Eigen::VectorXcd& photon_amplitudes, const ModeBasis& basis,
                                         std::span<const double> grid) {
  if (photon_amplitudes.size() != static_cast<Eigen::Index>(basis.size())) {
    throw Error(ErrorKind::DimensionMismatch, "amplitudes not aligned with basis");
  }
  const ModeBasis full = basis.sector == Sector::Full
                             ? basis
                             : build_mode_basis(basis.length, basis.cutoff, Sector::Full);
  const Eigen::VectorXcd psi =
      basis.sector == Sector::Full ? photon_amplitudes : unfold_amplitudes(photon_amplitudes, basis, full);
  const ModeWaves w = mode_waves(full);
  EnergyDensityField f;
  f.x.assign(grid.begin(), grid.end());
  f.pi_r2.resize(grid.size());
  f.pi_l2.resize(grid.size());
  f.t00.resize(grid.size());
  for (std::size_t g = 0; g < grid.size(); ++g) {
    f.pi_r2[g] = 2.0 * branch_intensity(w, w.right, psi, grid[g]);
    f.pi_l2[g] = 2.0 * branch_intensity(w, w.left, psi, grid[g]);
    f.t00[g] = f.pi_r2[g] + f.pi_l2[g];
  }
  return f;
}

}  // namespace giantatom
