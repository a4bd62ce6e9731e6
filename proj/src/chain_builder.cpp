#include "giantatom/chain_builder.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "giantatom/error.hpp"
#include "giantatom/table.hpp"

namespace giantatom {

namespace {

constexpr double kHermitianTol = 1e-12;
constexpr double kAlphaImagTol = 1e-10;
constexpr double kOrthonormalTol = 1e-12;

double max_abs(const Eigen::MatrixXcd& m) { return m.size() ? m.cwiseAbs().maxCoeff() : 0.0; }

void require_hermitian(const Eigen::MatrixXcd& A) {
  if (A.rows() != A.cols()) throw Error(ErrorKind::DimensionMismatch, "matrix is not square");
  const double scale = std::max(1.0, max_abs(A));
  const double asym = max_abs(A - A.adjoint());
  if (asym > kHermitianTol * scale) {
    std::ostringstream msg;
    msg << "matrix not Hermitian (max |A - A^dag| = " << asym << ")";
    throw Error(ErrorKind::NonHermitian, msg.str());
  }
}

double infinity_norm(const Eigen::MatrixXcd& A) {
  return A.size() ? A.cwiseAbs().rowwise().sum().maxCoeff() : 0.0;
}

// Two passes of classical Gram-Schmidt against columns [0, count) of V.
void orthogonalize_against(const Eigen::MatrixXcd& V, int count, Eigen::VectorXcd& r) {
  if (count <= 0) return;
  const auto block = V.leftCols(count);
  for (int pass = 0; pass < 2; ++pass) r.noalias() -= block * (block.adjoint() * r);
}

}  // namespace

void LanczosOptions::validate() const {
  if (!(roundoff_unit > 0.0)) throw Error(ErrorKind::InvalidArgument, "roundoff unit must be > 0");
  if (breakdown_tol && !(*breakdown_tol >= 0.0)) {
    throw Error(ErrorKind::InvalidArgument, "breakdown_tol must be >= 0");
  }
  if (max_steps < 0) throw Error(ErrorKind::InvalidArgument, "max_steps must be >= 1");
}

double LanczosOptions::semi_orthogonality_threshold() const { return std::sqrt(roundoff_unit); }

Eigen::MatrixXd TridiagonalResult::matrix() const {
  const int m = size();
  Eigen::MatrixXd T = Eigen::MatrixXd::Zero(m, m);
  for (int i = 0; i < m; ++i) T(i, i) = alphas[i];
  for (int i = 0; i + 1 < m; ++i) T(i, i + 1) = T(i + 1, i) = betas[i];
  return T;
}

// ---------------------------------------------------------------------------
// xi recurrence

OrthogonalityMonitor::OrthogonalityMonitor(int dimension, double roundoff_unit, std::uint64_t seed)
    : dimension_(dimension), eps_(roundoff_unit), rng_(seed), current_{1.0} {}

double OrthogonalityMonitor::draw(double variance) {
  std::normal_distribution<double> dist(0.0, std::sqrt(variance));
  ++draws_;
  return dist(rng_);
}

const std::vector<double>& OrthogonalityMonitor::advance(std::span<const double> alphas,
                                                         std::span<const double> betas) {
  const int j = step_;
  if (static_cast<int>(alphas.size()) < j || static_cast<int>(betas.size()) < j) {
    throw Error(ErrorKind::DimensionMismatch, "xi recurrence needs alpha_1..j and beta_1..j");
  }
  // 1-based accessors; beta_0 = 0.
  auto a = [&](int k) { return alphas[k - 1]; };
  auto b = [&](int k) { return k >= 1 ? betas[k - 1] : 0.0; };
  auto cur = [&](int k) { return k >= 1 ? current_[k - 1] : 0.0; };       // xi_{k,j}
  auto prev = [&](int k) { return k >= 1 ? previous_[k - 1] : 0.0; };     // xi_{k,j-1}

  const double bj = b(j);
  std::vector<double> next(static_cast<std::size_t>(j) + 1, 0.0);
  for (int k = 1; k <= j - 1; ++k) {
    double v = b(k) * cur(k + 1) + (a(k) - a(j)) * cur(k) + b(k - 1) * cur(k - 1) -
               b(j - 1) * prev(k);
    v += eps_ * (b(k) + bj) * draw(0.3);
    next[k - 1] = v / bj;
  }
  next[j - 1] = dimension_ * eps_ * (b(1) / bj) * draw(0.6);
  next[j] = 1.0;
  previous_ = std::move(current_);
  current_ = std::move(next);
  ++step_;
  return current_;
}

void OrthogonalityMonitor::reset_current() {
  for (std::size_t k = 0; k + 1 < current_.size(); ++k) current_[k] = eps_ * draw(1.5);
}

double OrthogonalityMonitor::max_offdiagonal() const {
  double m = 0.0;
  for (std::size_t k = 0; k + 1 < current_.size(); ++k) m = std::max(m, std::abs(current_[k]));
  return m;
}

const std::vector<double>& simulate_orthogonality_loss(OrthogonalityMonitor& state,
                                                       std::span<const double> alphas,
                                                       std::span<const double> betas) {
  return state.advance(alphas, betas);
}

// ---------------------------------------------------------------------------
// Lanczos

TridiagonalResult lanczos_operator(const MatVec& apply, int n, double operator_norm,
                                   const Eigen::VectorXcd& start, const LanczosOptions& options) {
  options.validate();
  if (start.size() != n) throw Error(ErrorKind::DimensionMismatch, "start vector size mismatch");
  const double start_norm = start.norm();
  if (!(start_norm > 0.0)) throw Error(ErrorKind::ZeroStartVector, "Lanczos start vector is zero");

  const int max_steps = options.max_steps > 0 ? std::min(options.max_steps, n) : n;
  const double tol = options.breakdown_tol.value_or(1e-13 * operator_norm);
  const double alpha_tol = kAlphaImagTol * std::max(1.0, operator_norm);
  const double threshold = options.semi_orthogonality_threshold();
  const auto mode = options.reorth_mode;

  TridiagonalResult out;
  auto& report = out.report;
  Eigen::MatrixXcd V(n, max_steps);
  V.col(0) = start / start_norm;
  std::optional<OrthogonalityMonitor> monitor;
  if (mode == Reorthogonalization::Partial) monitor.emplace(n, options.roundoff_unit, options.rng_seed);

  Eigen::VectorXcd w(n), r(n);
  bool reorth_next = false;
  for (int j = 0; j < max_steps; ++j) {
    apply(V.col(j), w);
    const cplx alpha = V.col(j).dot(w);
    if (std::abs(alpha.imag()) > alpha_tol) {
      std::ostringstream msg;
      msg << "alpha_" << j + 1 << " has imaginary part " << alpha.imag();
      throw Error(ErrorKind::NumericalFailure, msg.str());
    }
    out.alphas.push_back(alpha.real());
    r = w - alpha.real() * V.col(j);
    if (j > 0) r -= out.betas.back() * V.col(j - 1);

    bool reorthogonalized = false;
    if (mode == Reorthogonalization::Full) {
      orthogonalize_against(V, j + 1, r);
      reorthogonalized = true;
    }
    double beta = r.norm();

    if (mode == Reorthogonalization::Partial && beta > tol) {
      std::vector<double> betas_upto(out.betas);
      betas_upto.push_back(beta);
      simulate_orthogonality_loss(*monitor, out.alphas, betas_upto);
      if (reorth_next || monitor->max_offdiagonal() >= threshold) {
        orthogonalize_against(V, j + 1, r);
        monitor->reset_current();
        beta = r.norm();
        reorthogonalized = true;
        // A triggered step also forces the next one; a forced step does not chain.
        reorth_next = !reorth_next;
      }
      report.orthogonality_estimate.push_back(monitor->max_offdiagonal());
    } else {
      report.orthogonality_estimate.push_back(0.0);
    }
    if (reorthogonalized && mode == Reorthogonalization::Partial) report.reorth_steps.push_back(j + 1);

    report.steps = j + 1;
    report.trailing_beta = beta;
    if (beta <= tol) {
      report.breakdown = true;
      break;
    }
    if (j + 1 == max_steps) break;
    out.betas.push_back(beta);
    V.col(j + 1) = r / beta;
  }
  if (monitor) report.rng_draws = monitor->draws();
  out.basis = V.leftCols(report.steps);
  return out;
}

TridiagonalResult lanczos(const Eigen::MatrixXcd& A, const Eigen::VectorXcd& start,
                          const LanczosOptions& options) {
  require_hermitian(A);
  auto apply = [&A](const Eigen::VectorXcd& x, Eigen::VectorXcd& y) { y.noalias() = A * x; };
  return lanczos_operator(apply, static_cast<int>(A.rows()), infinity_norm(A), start, options);
}

TridiagonalResult lanczos_diagonal(const Eigen::VectorXd& values, const Eigen::VectorXcd& start,
                                   const LanczosOptions& options) {
  auto apply = [&values](const Eigen::VectorXcd& x, Eigen::VectorXcd& y) {
    y = values.cast<cplx>().cwiseProduct(x);
  };
  const double norm = values.size() ? values.cwiseAbs().maxCoeff() : 0.0;
  return lanczos_operator(apply, static_cast<int>(values.size()), norm, start, options);
}

// ---------------------------------------------------------------------------
// Block Lanczos

Eigen::MatrixXcd BlockTridiagonalResult::matrix() const {
  const int p = blocks();
  const int b = block_size;
  Eigen::MatrixXcd T = Eigen::MatrixXcd::Zero(p * b, p * b);
  for (int i = 0; i < p; ++i) {
    T.block(i * b, i * b, b, b) = diagonal_blocks[i];
    if (i + 1 < p) {
      T.block((i + 1) * b, i * b, b, b) = offdiagonal_blocks[i];
      T.block(i * b, (i + 1) * b, b, b) = offdiagonal_blocks[i].adjoint();
    }
  }
  return T;
}

BlockTridiagonalResult block_lanczos(const Eigen::MatrixXcd& A, const Eigen::MatrixXcd& start,
                                     const LanczosOptions& options) {
  options.validate();
  require_hermitian(A);
  const int n = static_cast<int>(A.rows());
  const int b = static_cast<int>(start.cols());
  if (start.rows() != n || b < 1) throw Error(ErrorKind::DimensionMismatch, "start block shape");
  const double ortho_err =
      max_abs(start.adjoint() * start - Eigen::MatrixXcd::Identity(b, b));
  if (ortho_err > kOrthonormalTol) {
    throw Error(ErrorKind::NonOrthonormal, "start block columns are not orthonormal");
  }
  const int max_blocks = (options.max_steps > 0 ? std::min(options.max_steps, n) : n) / b;
  const double tol = options.breakdown_tol.value_or(1e-13 * infinity_norm(A));

  BlockTridiagonalResult out;
  out.block_size = b;
  Eigen::MatrixXcd Q(n, std::max(max_blocks, 1) * b);
  Q.leftCols(b) = start;
  int p = 0;
  for (int j = 0; j < std::max(max_blocks, 1); ++j) {
    const auto Qj = Q.middleCols(j * b, b);
    Eigen::MatrixXcd Y = A * Qj;
    Eigen::MatrixXcd M = Qj.adjoint() * Y;
    M = 0.5 * (M + M.adjoint()).eval();
    Eigen::MatrixXcd R = Y - Qj * M;
    if (j > 0) R -= Q.middleCols((j - 1) * b, b) * out.offdiagonal_blocks.back().adjoint();
    out.diagonal_blocks.push_back(M);
    p = j + 1;
    if (p == max_blocks) break;
    const auto prior = Q.leftCols(p * b);
    for (int pass = 0; pass < 2; ++pass) R -= prior * (prior.adjoint() * R);

    Eigen::HouseholderQR<Eigen::MatrixXcd> qr(R);
    Eigen::MatrixXcd B = qr.matrixQR().topRows(b).triangularView<Eigen::Upper>();
    Eigen::MatrixXcd Qn = qr.householderQ() * Eigen::MatrixXcd::Identity(n, b);
    bool deficient = false;
    for (int i = 0; i < b; ++i) {
      const double mag = std::abs(B(i, i));
      if (mag <= tol) {
        deficient = true;
        break;
      }
      const cplx phase = B(i, i) / mag;
      Qn.col(i) *= phase;
      B.row(i) *= std::conj(phase);
      B(i, i) = mag;
    }
    if (deficient) {
      out.rank_deficient_stop = true;
      break;
    }
    out.offdiagonal_blocks.push_back(B);
    Q.middleCols(p * b, b) = Qn;
  }
  out.basis = Q.leftCols(p * b);
  return out;
}

// ---------------------------------------------------------------------------
// Chain representation

double ChainRep::interaction_scale(double lambda) const { return lambda * std::sqrt(mu0); }

Eigen::MatrixXcd ChainRep::single_particle_matrix() const {
  if (block) return block->matrix().conjugate();
  const int m = static_cast<int>(alphas.size());
  Eigen::MatrixXcd h = Eigen::MatrixXcd::Zero(m, m);
  for (int i = 0; i < m; ++i) h(i, i) = alphas[i];
  for (int i = 0; i + 1 < m; ++i) h(i, i + 1) = h(i + 1, i) = betas[i];
  return h;
}

int ChainRep::hopping_range() const {
  if (!block) return 1;
  const Eigen::MatrixXcd h = single_particle_matrix();
  const double scale = std::max(1.0, max_abs(h));
  int range = 0;
  for (int i = 0; i < h.rows(); ++i)
    for (int j = i + 1; j < h.cols(); ++j)
      if (std::abs(h(i, j)) > 1e-12 * scale) range = std::max(range, j - i);
  return range;
}

namespace {

int resolve_chain_length(const ChainOptions& options, int dim) {
  if (options.chain_length < 0) throw Error(ErrorKind::InvalidArgument, "chain length must be >= 0");
  return options.chain_length == 0 ? dim : std::min(options.chain_length, dim);
}

}  // namespace

ChainRep build_chain(const ModeBasis& basis, const CouplingVector& coupling,
                     const ChainOptions& options) {
  const int dim = static_cast<int>(basis.size());
  if (coupling.coefficients.size() != dim) {
    throw Error(ErrorKind::DimensionMismatch, "coupling vector not aligned with mode basis");
  }
  if (!(coupling.mu0 > 0.0)) throw Error(ErrorKind::DecoupledEmitter, "mu0 = 0: emitter decoupled");
  LanczosOptions lopts = options.lanczos;
  lopts.max_steps = resolve_chain_length(options, dim);
  // A = diag(|k_j|); running on f (not conj f) makes Lambda = Q^T with row 0 = f / sqrt(mu0).
  auto tri = lanczos_diagonal(basis.frequency_vector(), coupling.coefficients, lopts);

  ChainRep chain;
  chain.basis = basis;
  chain.mu0 = coupling.mu0;
  chain.transform = tri.basis.transpose();
  // Row 0 exactly as defined, free of Lanczos normalization roundoff.
  chain.transform.row(0) = coupling.coefficients.transpose() / std::sqrt(coupling.mu0);
  chain.alphas = tri.alphas;
  chain.betas = tri.betas;
  chain.emitter_couplings = Eigen::MatrixXcd::Zero(1, tri.size());
  chain.emitter_couplings(0, 0) = std::sqrt(coupling.mu0);
  chain.report = tri.report;
  chain.trailing_beta = tri.report.breakdown ? 0.0 : tri.report.trailing_beta;
  if (tri.size() == dim) chain.trailing_beta = 0.0;
  return chain;
}

ChainRep build_block_chain(const ModeBasis& basis, std::span<const CouplingVector> couplings,
                           const ChainOptions& options) {
  if (couplings.empty()) throw Error(ErrorKind::InvalidArgument, "no emitters given");
  if (couplings.size() == 1) return build_chain(basis, couplings[0], options);
  const int dim = static_cast<int>(basis.size());
  const int b = static_cast<int>(couplings.size());
  Eigen::MatrixXcd F(dim, b);
  double mu0_total = 0.0;
  for (int e = 0; e < b; ++e) {
    if (couplings[e].coefficients.size() != dim) {
      throw Error(ErrorKind::DimensionMismatch, "coupling vector not aligned with mode basis");
    }
    if (!(couplings[e].mu0 > 0.0)) throw Error(ErrorKind::DecoupledEmitter, "emitter with mu0 = 0");
    F.col(e) = couplings[e].coefficients;
    mu0_total += couplings[e].mu0;
  }
  Eigen::HouseholderQR<Eigen::MatrixXcd> qr(F);
  Eigen::MatrixXcd Q1 = qr.householderQ() * Eigen::MatrixXcd::Identity(dim, b);
  Eigen::MatrixXcd Rf = qr.matrixQR().topRows(b).triangularView<Eigen::Upper>();
  for (int i = 0; i < b; ++i) {
    const double mag = std::abs(Rf(i, i));
    if (mag <= 1e-12 * std::sqrt(mu0_total)) {
      throw Error(ErrorKind::InvalidArgument, "emitter couplings are linearly dependent");
    }
    Q1.col(i) *= Rf(i, i) / mag;
  }

  LanczosOptions lopts = options.lanczos;
  lopts.max_steps = resolve_chain_length(options, dim);
  const Eigen::MatrixXcd A = basis.frequency_vector().cast<cplx>().asDiagonal();
  auto blk = block_lanczos(A, Q1, lopts);

  ChainRep chain;
  chain.basis = basis;
  chain.mu0 = mu0_total;
  chain.transform = blk.basis.transpose();
  chain.emitter_couplings = (blk.basis.adjoint() * F).transpose();
  chain.report.steps = blk.blocks();
  chain.report.breakdown = blk.rank_deficient_stop;
  chain.block = std::move(blk);
  return chain;
}

ModeCorrelators back_transform_correlations(const ModeCorrelators& chain,
                                            const Eigen::MatrixXcd& transform) {
  const auto m = transform.rows();
  auto check = [m](const Eigen::MatrixXcd& c, const char* what) {
    if (c.size() && (c.rows() != m || c.cols() != m)) {
      throw Error(ErrorKind::DimensionMismatch, std::string(what) + " correlator shape mismatch");
    }
  };
  check(chain.normal, "normal");
  check(chain.anomalous, "anomalous");
  ModeCorrelators out;
  // a_q = sum_i conj(Lambda_iq) c_i.
  if (chain.normal.size()) {
    out.normal = transform.transpose() * chain.normal * transform.conjugate();
    out.normal = 0.5 * (out.normal + out.normal.adjoint()).eval();
  }
  if (chain.anomalous.size()) {
    out.anomalous = transform.adjoint() * chain.anomalous * transform.conjugate();
  }
  return out;
}

void write_chain_csv(const ChainRep& chain, const std::string& chain_path,
                     const std::string& transform_path, const std::string& preamble) {
  ObservableTable c({"index", "alpha", "beta"});
  c.preamble = preamble;
  const int m = static_cast<int>(chain.alphas.size());
  for (int i = 0; i < m; ++i) {
    const double beta = i + 1 < m ? chain.betas[i] : chain.trailing_beta;
    c.add_row({static_cast<double>(i), chain.alphas[i], beta});
  }
  c.write_csv(chain_path);

  ObservableTable t({"row", "col", "re", "im"});
  t.preamble = preamble;
  for (Eigen::Index i = 0; i < chain.transform.rows(); ++i)
    for (Eigen::Index j = 0; j < chain.transform.cols(); ++j)
      t.add_row({static_cast<double>(i), static_cast<double>(j), chain.transform(i, j).real(),
                 chain.transform(i, j).imag()});
  t.write_csv(transform_path);
}

}  // namespace giantatom
