#include "giantatom/mps.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>
#include <sstream>

#include "giantatom/error.hpp"

namespace giantatom {

using Mat = Eigen::MatrixXcd;
using Vec = Eigen::VectorXcd;
using SiteTensor = std::vector<Mat>;
using Env = std::vector<Mat>;

// ---------------------------------------------------------------------------
// Layout and local operators

SiteLayout SiteLayout::atom_chain(int chain_sites, int n_b) {
  if (chain_sites < 1) throw Error(ErrorKind::InvalidArgument, "need at least one chain site");
  if (n_b < 2) throw Error(ErrorKind::InvalidArgument, "bosons per site must be >= 2");
  SiteLayout l;
  l.dims.push_back(2);
  l.dims.insert(l.dims.end(), chain_sites, n_b);
  return l;
}

void SiteLayout::validate() const {
  if (dims.empty()) throw Error(ErrorKind::InvalidArgument, "empty site layout");
  for (int d : dims)
    if (d < 2) throw Error(ErrorKind::InvalidArgument, "local dimensions must be >= 2");
}

namespace ops {
Mat identity(int d) { return Mat::Identity(d, d); }
Mat sigma_z() {
  Mat m = Mat::Zero(2, 2);
  m(0, 0) = -1.0;
  m(1, 1) = 1.0;
  return m;
}
Mat sigma_x() {
  Mat m = Mat::Zero(2, 2);
  m(0, 1) = m(1, 0) = 1.0;
  return m;
}
Mat sigma_plus() {
  Mat m = Mat::Zero(2, 2);
  m(1, 0) = 1.0;
  return m;
}
Mat sigma_minus() {
  Mat m = Mat::Zero(2, 2);
  m(0, 1) = 1.0;
  return m;
}
Mat annihilation(int d) {
  Mat m = Mat::Zero(d, d);
  for (int n = 1; n < d; ++n) m(n - 1, n) = std::sqrt(static_cast<double>(n));
  return m;
}
Mat creation(int d) { return annihilation(d).adjoint(); }
Mat number(int d) {
  Mat m = Mat::Zero(d, d);
  for (int n = 0; n < d; ++n) m(n, n) = n;
  return m;
}
}  // namespace ops

void TruncationPolicy::validate() const {
  if (max_bond < 1) throw Error(ErrorKind::InvalidArgument, "max bond dimension must be >= 1");
  if (!(cutoff >= 0.0)) throw Error(ErrorKind::InvalidArgument, "SVD cutoff must be >= 0");
  if (n_b < 2) throw Error(ErrorKind::InvalidArgument, "bosons per site must be >= 2");
}

// ---------------------------------------------------------------------------
// Tensor helpers

namespace {

int left_dim(const SiteTensor& t) { return static_cast<int>(t[0].rows()); }
int right_dim(const SiteTensor& t) { return static_cast<int>(t[0].cols()); }

// Rows s * Dl + a.
Mat stack_rows(const SiteTensor& t) {
  const int d = static_cast<int>(t.size()), Dl = left_dim(t), Dr = right_dim(t);
  Mat m(d * Dl, Dr);
  for (int s = 0; s < d; ++s) m.middleRows(s * Dl, Dl) = t[s];
  return m;
}

// Columns s * Dr + b.
Mat stack_cols(const SiteTensor& t) {
  const int d = static_cast<int>(t.size()), Dl = left_dim(t), Dr = right_dim(t);
  Mat m(Dl, d * Dr);
  for (int s = 0; s < d; ++s) m.middleCols(s * Dr, Dr) = t[s];
  return m;
}

SiteTensor unstack_rows(const Mat& m, int d) {
  const int Dl = static_cast<int>(m.rows()) / d;
  SiteTensor t(d);
  for (int s = 0; s < d; ++s) t[s] = m.middleRows(s * Dl, Dl);
  return t;
}

SiteTensor unstack_cols(const Mat& m, int d) {
  const int Dr = static_cast<int>(m.cols()) / d;
  SiteTensor t(d);
  for (int s = 0; s < d; ++s) t[s] = m.middleCols(s * Dr, Dr);
  return t;
}

struct Truncated {
  Mat U;
  Eigen::VectorXd S;
  Mat Vh;
  double discarded = 0.0;  // relative weight
  bool forced = false;     // max_bond, not cutoff, decided
};

Truncated truncated_svd(const Mat& M, const TruncationPolicy& policy) {
  Eigen::BDCSVD<Mat> svd(M, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const Eigen::VectorXd& s = svd.singularValues();
  const int n = static_cast<int>(s.size());
  const double total = s.squaredNorm();
  int keep = n;
  double discarded = 0.0;
  if (total > 0.0) {
    // Drop from the tail while the relative discarded weight stays within cutoff.
    double tail = 0.0;
    while (keep > 1 && (tail + s[keep - 1] * s[keep - 1]) / total <= policy.cutoff) {
      tail += s[keep - 1] * s[keep - 1];
      --keep;
    }
    discarded = tail / total;
  } else {
    keep = 1;
  }
  Truncated out;
  if (keep > policy.max_bond) {
    double tail = 0.0;
    for (int i = policy.max_bond; i < n; ++i) tail += s[i] * s[i];
    keep = policy.max_bond;
    discarded = total > 0.0 ? tail / total : 0.0;
    out.forced = discarded > policy.cutoff;
  }
  out.U = svd.matrixU().leftCols(keep);
  out.S = s.head(keep);
  out.Vh = svd.matrixV().leftCols(keep).adjoint();
  out.discarded = discarded;
  return out;
}

void require_same_layout(const SiteLayout& a, const SiteLayout& b) {
  if (!(a == b)) throw Error(ErrorKind::LayoutMismatch, "site layouts differ");
}

Env boundary_env() { return Env{Mat::Ones(1, 1)}; }

// L'[b] = sum W_ab(s, s') bra[s]^dag L[a] ket[s'].
Env left_step(const Env& L, const SiteTensor& bra, const SiteTensor& ket, const MpoSite& W) {
  const int d = static_cast<int>(ket.size());
  Env out(W.right_dim, Mat::Zero(right_dim(bra), right_dim(ket)));
  std::vector<std::vector<Mat>> X(L.size());
  for (const auto& e : W.entries) {
    auto& x = X[e.left];
    if (x.empty()) {
      x.resize(d);
      for (int s = 0; s < d; ++s) x[s] = L[e.left] * ket[s];
    }
    for (int s = 0; s < d; ++s) {
      if (e.identity) {
        out[e.right].noalias() += bra[s].adjoint() * x[s];
        continue;
      }
      Mat y;
      bool any = false;
      for (int sp = 0; sp < d; ++sp) {
        const cplx w = e.op(s, sp);
        if (w == cplx(0.0)) continue;
        if (!any) {
          y = w * x[sp];
          any = true;
        } else {
          y += w * x[sp];
        }
      }
      if (any) out[e.right].noalias() += bra[s].adjoint() * y;
    }
  }
  return out;
}

// R'[a] = sum W_ab(s, s') conj(bra[s]) R[b] ket[s']^T.
Env right_step(const Env& R, const SiteTensor& bra, const SiteTensor& ket, const MpoSite& W) {
  const int d = static_cast<int>(ket.size());
  Env out(W.left_dim, Mat::Zero(left_dim(bra), left_dim(ket)));
  std::vector<std::vector<Mat>> X(R.size());
  for (const auto& e : W.entries) {
    auto& x = X[e.right];
    if (x.empty()) {
      x.resize(d);
      for (int s = 0; s < d; ++s) x[s] = R[e.right] * ket[s].transpose();
    }
    for (int s = 0; s < d; ++s) {
      if (e.identity) {
        out[e.left].noalias() += bra[s].conjugate() * x[s];
        continue;
      }
      Mat y;
      bool any = false;
      for (int sp = 0; sp < d; ++sp) {
        const cplx w = e.op(s, sp);
        if (w == cplx(0.0)) continue;
        if (!any) {
          y = w * x[sp];
          any = true;
        } else {
          y += w * x[sp];
        }
      }
      if (any) out[e.left].noalias() += bra[s].conjugate() * y;
    }
  }
  return out;
}

// Identity transfer: bra^dag E ket summed over s.
Mat left_transfer(const Mat& E, const SiteTensor& bra, const SiteTensor& ket) {
  Mat out = Mat::Zero(right_dim(bra), right_dim(ket));
  for (std::size_t s = 0; s < ket.size(); ++s) out.noalias() += bra[s].adjoint() * (E * ket[s]);
  return out;
}

Mat left_transfer_op(const Mat& E, const SiteTensor& bra, const SiteTensor& ket, const Mat& op) {
  const int d = static_cast<int>(ket.size());
  Mat out = Mat::Zero(right_dim(bra), right_dim(ket));
  std::vector<Mat> x(d);
  for (int s = 0; s < d; ++s) x[s] = E * ket[s];
  for (int s = 0; s < d; ++s)
    for (int sp = 0; sp < d; ++sp)
      if (op(s, sp) != cplx(0.0)) out.noalias() += op(s, sp) * (bra[s].adjoint() * x[sp]);
  return out;
}

Mat right_transfer(const Mat& E, const SiteTensor& bra, const SiteTensor& ket) {
  Mat out = Mat::Zero(left_dim(bra), left_dim(ket));
  for (std::size_t s = 0; s < ket.size(); ++s)
    out.noalias() += bra[s].conjugate() * (E * ket[s].transpose());
  return out;
}

// sum op(s, s') tr(A^s^dag EL A^s' ER^T)
cplx close_site(const Mat& EL, const SiteTensor& A, const Mat& ER, const Mat& op) {
  const int d = static_cast<int>(A.size());
  cplx v = 0.0;
  for (int sp = 0; sp < d; ++sp) {
    bool any = false;
    for (int s = 0; s < d; ++s) any = any || op(s, sp) != cplx(0.0);
    if (!any) continue;
    const Mat x = EL * A[sp] * ER.transpose();
    for (int s = 0; s < d; ++s)
      if (op(s, sp) != cplx(0.0)) v += op(s, sp) * (A[s].conjugate().cwiseProduct(x)).sum();
  }
  return v;
}

std::vector<Mat> left_identity_envs(const MpsState& st) {
  const int m = st.size();
  std::vector<Mat> E(m + 1);
  E[0] = Mat::Ones(1, 1);
  for (int i = 0; i < m; ++i) E[i + 1] = left_transfer(E[i], st.tensors[i], st.tensors[i]);
  return E;
}

std::vector<Mat> right_identity_envs(const MpsState& st) {
  const int m = st.size();
  std::vector<Mat> E(m + 1);
  E[m] = Mat::Ones(1, 1);
  for (int i = m - 1; i >= 0; --i) E[i] = right_transfer(E[i + 1], st.tensors[i], st.tensors[i]);
  return E;
}

void left_orthonormalize_site(MpsState& st, int i) {
  const int d = st.layout.dim(i);
  const Mat M = stack_rows(st.tensors[i]);
  const int k = static_cast<int>(std::min(M.rows(), M.cols()));
  Eigen::HouseholderQR<Mat> qr(M);
  Mat Q = qr.householderQ() * Mat::Identity(M.rows(), k);
  Mat R = qr.matrixQR().topRows(k).triangularView<Eigen::Upper>();
  st.tensors[i] = unstack_rows(Q, d);
  for (auto& a : st.tensors[i + 1]) a = R * a;
}

void right_orthonormalize_site(MpsState& st, int i) {
  const int d = st.layout.dim(i);
  const Mat M = stack_cols(st.tensors[i]);
  const Mat Mh = M.adjoint();
  const int k = static_cast<int>(std::min(Mh.rows(), Mh.cols()));
  Eigen::HouseholderQR<Mat> qr(Mh);
  Mat Q = qr.householderQ() * Mat::Identity(Mh.rows(), k);
  Mat R = qr.matrixQR().topRows(k).triangularView<Eigen::Upper>();
  st.tensors[i] = unstack_cols(Q.adjoint(), d);
  const Mat Rh = R.adjoint();
  for (auto& a : st.tensors[i - 1]) a = a * Rh;
}

}  // namespace

// ---------------------------------------------------------------------------
// MpsState

int MpsState::bond_dimension(int bond) const { return right_dim(tensors[bond]); }

int MpsState::max_bond_dimension() const {
  int m = 1;
  for (int b = 0; b + 1 < size(); ++b) m = std::max(m, bond_dimension(b));
  return m;
}

double MpsState::norm() const { return std::sqrt(std::max(0.0, overlap(*this, *this).real())); }

MpsState product_state(const SiteLayout& layout, std::span<const int> local_indices) {
  layout.validate();
  if (static_cast<int>(local_indices.size()) != layout.size()) {
    throw Error(ErrorKind::DimensionMismatch, "one local index per site required");
  }
  MpsState st;
  st.layout = layout;
  for (int i = 0; i < layout.size(); ++i) {
    const int d = layout.dim(i);
    const int s0 = local_indices[i];
    if (s0 < 0 || s0 >= d) {
      std::ostringstream msg;
      msg << "local index " << s0 << " out of range at site " << i << " (dim " << d << ")";
      throw Error(ErrorKind::InvalidArgument, msg.str());
    }
    SiteTensor t(d, Mat::Zero(1, 1));
    t[s0](0, 0) = 1.0;
    st.tensors.push_back(std::move(t));
  }
  return st;
}

MpsState product_state(const SiteLayout& layout, std::span<const Eigen::VectorXcd> local_states) {
  layout.validate();
  if (static_cast<int>(local_states.size()) != layout.size()) {
    throw Error(ErrorKind::DimensionMismatch, "one local state per site required");
  }
  MpsState st;
  st.layout = layout;
  for (int i = 0; i < layout.size(); ++i) {
    const int d = layout.dim(i);
    if (local_states[i].size() != d) throw Error(ErrorKind::DimensionMismatch, "local state size");
    const double n = local_states[i].norm();
    if (!(n > 0.0)) throw Error(ErrorKind::InvalidArgument, "zero local state");
    SiteTensor t(d, Mat::Zero(1, 1));
    for (int s = 0; s < d; ++s) t[s](0, 0) = local_states[i][s] / n;
    st.tensors.push_back(std::move(t));
  }
  return st;
}

MpsState random_mps(const SiteLayout& layout, int bond_dim, std::uint64_t seed) {
  layout.validate();
  if (bond_dim < 1) throw Error(ErrorKind::InvalidArgument, "bond dimension must be >= 1");
  const int m = layout.size();
  // Bond caps from both ends, saturating to avoid overflow.
  std::vector<double> left(m + 1, 1.0), right(m + 1, 1.0);
  for (int i = 0; i < m; ++i) left[i + 1] = std::min(1e9, left[i] * layout.dim(i));
  for (int i = m - 1; i >= 0; --i) right[i] = std::min(1e9, right[i + 1] * layout.dim(i));
  std::vector<int> D(m + 1);
  for (int b = 0; b <= m; ++b)
    D[b] = static_cast<int>(std::min<double>({static_cast<double>(bond_dim), left[b], right[b]}));
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g;
  MpsState st;
  st.layout = layout;
  for (int i = 0; i < m; ++i) {
    SiteTensor t(layout.dim(i), Mat(D[i], D[i + 1]));
    for (auto& a : t)
      for (Eigen::Index c = 0; c < a.cols(); ++c)
        for (Eigen::Index r = 0; r < a.rows(); ++r) a(r, c) = cplx(g(rng), g(rng));
    st.tensors.push_back(std::move(t));
  }
  st.center = m - 1;
  canonicalize(st, 0);
  normalize(st);
  return st;
}

void canonicalize(MpsState& st, int center) {
  const int m = st.size();
  if (center < 0 || center >= m) throw Error(ErrorKind::InvalidArgument, "center out of range");
  for (int i = 0; i < center; ++i) left_orthonormalize_site(st, i);
  for (int i = m - 1; i > center; --i) right_orthonormalize_site(st, i);
  st.center = center;
}

void normalize(MpsState& st) {
  canonicalize(st, st.center);
  double n = 0.0;
  for (const auto& a : st.tensors[st.center]) n += a.squaredNorm();
  n = std::sqrt(n);
  if (!(n > 0.0)) throw Error(ErrorKind::NotNormalized, "cannot normalize a zero state");
  for (auto& a : st.tensors[st.center]) a /= n;
}

double canonical_residual(const MpsState& st) {
  double worst = 0.0;
  for (int i = 0; i < st.size(); ++i) {
    if (i == st.center) continue;
    const auto& t = st.tensors[i];
    Mat G;
    if (i < st.center) {
      G = Mat::Zero(right_dim(t), right_dim(t));
      for (const auto& a : t) G += a.adjoint() * a;
    } else {
      G = Mat::Zero(left_dim(t), left_dim(t));
      for (const auto& a : t) G += a * a.adjoint();
    }
    G -= Mat::Identity(G.rows(), G.cols());
    worst = std::max(worst, G.cwiseAbs().maxCoeff());
  }
  return worst;
}

cplx overlap(const MpsState& bra, const MpsState& ket) {
  require_same_layout(bra.layout, ket.layout);
  Mat E = Mat::Ones(1, 1);
  for (int i = 0; i < bra.size(); ++i) E = left_transfer(E, bra.tensors[i], ket.tensors[i]);
  return E(0, 0);
}

Vec to_dense_vector(const MpsState& st) {
  long total = 1;
  for (int d : st.layout.dims) {
    total *= d;
    if (total > 1L << 22) throw Error(ErrorKind::DimensionCapExceeded, "state too large for dense form");
  }
  // rows[k] holds amplitudes of the first sites' configuration k, as a row vector over the open bond.
  Mat rows = Mat::Ones(1, 1);
  for (const auto& t : st.tensors) {
    const int d = static_cast<int>(t.size());
    Mat next(rows.rows() * d, t[0].cols());
    for (Eigen::Index k = 0; k < rows.rows(); ++k)
      for (int s = 0; s < d; ++s) next.row(k * d + s) = rows.row(k) * t[s];
    rows = std::move(next);
  }
  return rows.col(0);
}

// ---------------------------------------------------------------------------
// MPO construction

const char* to_string(MpoTag tag) {
  switch (tag) {
    case MpoTag::AtomHamiltonian: return "H_A";
    case MpoTag::FieldHamiltonian: return "H_f";
    case MpoTag::InteractionHamiltonian: return "H_int";
    case MpoTag::TotalHamiltonian: return "H_tot";
    case MpoTag::NumberOperator: return "number";
    case MpoTag::ExcitationNumber: return "N_exc";
    case MpoTag::ModeCreation: return "mode_creation";
    case MpoTag::Identity: return "identity";
    case MpoTag::Custom: return "custom";
  }
  return "unknown";
}

int MpoOperator::max_bond_dimension() const {
  int m = 1;
  for (const auto& s : sites) m = std::max(m, s.right_dim);
  return m;
}

Mat MpoOperator::to_dense() const {
  long total = 1;
  for (int d : layout.dims) {
    total *= d;
    if (total > 4096) throw Error(ErrorKind::DimensionCapExceeded, "MPO too large for dense form");
  }
  // blocks[a] is the partial operator ending in MPO state a.
  std::vector<Mat> blocks{Mat::Ones(1, 1)};
  for (const auto& site : sites) {
    const long prev = blocks[0].rows();
    const int d = static_cast<int>(site.entries.empty() ? 1 : site.entries[0].op.rows());
    std::vector<Mat> next(site.right_dim, Mat::Zero(prev * d, prev * d));
    for (const auto& e : site.entries) {
      Mat kron(prev * d, prev * d);
      const Mat& A = blocks[e.left];
      for (long r = 0; r < prev; ++r)
        for (long c = 0; c < prev; ++c) kron.block(r * d, c * d, d, d) = A(r, c) * e.op;
      next[e.right] += kron;
    }
    blocks = std::move(next);
  }
  return blocks[0];
}

MpoOperator build_mpo(const SiteLayout& layout, std::span<const LocalTerm> local,
                      std::span<const PairTerm> pairs, MpoTag tag, bool hermitian) {
  layout.validate();
  const int m = layout.size();
  auto check_op = [&](const Mat& op, int site) {
    if (site < 0 || site >= m) throw Error(ErrorKind::InvalidArgument, "term site out of range");
    if (op.rows() != layout.dim(site) || op.cols() != layout.dim(site)) {
      throw Error(ErrorKind::DimensionMismatch, "operator dimension does not match site");
    }
  };
  for (const auto& t : local) check_op(t.op, t.site);
  for (const auto& t : pairs) {
    if (t.i >= t.j) throw Error(ErrorKind::InvalidArgument, "pair term needs i < j");
    check_op(t.op_i, t.i);
    check_op(t.op_j, t.j);
  }
  // Channels per bond b (between b and b+1): 0 = not started, 1 = done, 2.. = open pair terms.
  std::vector<std::vector<int>> channel(pairs.size(), std::vector<int>(m, -1));
  std::vector<int> bond_dim(m, 2);
  for (std::size_t t = 0; t < pairs.size(); ++t)
    for (int b = pairs[t].i; b < pairs[t].j; ++b) channel[t][b] = bond_dim[b]++;

  // Index of a state on the bond left of `site`; boundaries hold a single state.
  auto left_index = [&](int site, int state) -> int {
    if (site == 0) return state == 0 ? 0 : -1;
    return state;
  };
  auto right_index = [&](int site, int state) -> int {
    if (site == m - 1) return state == 1 ? 0 : -1;
    return state;
  };

  MpoOperator mpo;
  mpo.layout = layout;
  mpo.tag = tag;
  mpo.hermitian = hermitian;
  mpo.sites.resize(m);
  for (int s = 0; s < m; ++s) {
    auto& site = mpo.sites[s];
    const int d = layout.dim(s);
    site.left_dim = s == 0 ? 1 : bond_dim[s - 1];
    site.right_dim = s == m - 1 ? 1 : bond_dim[s];
    auto add = [&](int l, int r, Mat op, bool identity) {
      const int li = left_index(s, l), ri = right_index(s, r);
      if (li < 0 || ri < 0) return;
      for (auto& e : site.entries) {
        if (e.left == li && e.right == ri) {
          e.op += op;
          e.identity = false;
          return;
        }
      }
      site.entries.push_back({li, ri, std::move(op), identity});
    };
    add(0, 0, Mat::Identity(d, d), true);
    add(1, 1, Mat::Identity(d, d), true);
    Mat onsite = Mat::Zero(d, d);
    bool has_onsite = false;
    for (const auto& t : local) {
      if (t.site != s) continue;
      onsite += t.coefficient * t.op;
      has_onsite = true;
    }
    if (has_onsite) add(0, 1, onsite, false);
    for (std::size_t t = 0; t < pairs.size(); ++t) {
      const auto& p = pairs[t];
      if (p.i == s) add(0, channel[t][s], p.coefficient * p.op_i, false);
      if (p.i < s && s < p.j) add(channel[t][s - 1], channel[t][s], Mat::Identity(d, d), true);
      if (p.j == s) add(channel[t][s - 1], 1, p.op_j, false);
    }
  }
  return mpo;
}

MpoOperator identity_mpo(const SiteLayout& layout) {
  layout.validate();
  MpoOperator mpo;
  mpo.layout = layout;
  mpo.tag = MpoTag::Identity;
  mpo.hermitian = true;
  for (int d : layout.dims) {
    MpoSite s;
    s.entries.push_back({0, 0, Mat::Identity(d, d), true});
    mpo.sites.push_back(std::move(s));
  }
  return mpo;
}

const char* to_string(Variant v) { return v == Variant::Full ? "full" : "rwa"; }

Variant parse_variant(const std::string& name) {
  if (name == "full" || name == "Full") return Variant::Full;
  if (name == "rwa" || name == "RWA" || name == "Rwa") return Variant::Rwa;
  throw Error(ErrorKind::InvalidArgument, "unknown variant '" + name + "'");
}

namespace {

struct TermSet {
  std::vector<LocalTerm> local;
  std::vector<PairTerm> pairs;
  void append(const TermSet& o) {
    local.insert(local.end(), o.local.begin(), o.local.end());
    pairs.insert(pairs.end(), o.pairs.begin(), o.pairs.end());
  }
};

TermSet atom_terms(double omega) { return {{{0, ops::sigma_z(), 0.5 * omega}}, {}}; }

// Hopping matrix h over chain sites placed at `offset`.
TermSet field_terms(const Mat& h, int n_b, int offset) {
  TermSet t;
  const Mat a = ops::annihilation(n_b), ad = ops::creation(n_b), n = ops::number(n_b);
  const double scale = std::max(1.0, h.cwiseAbs().maxCoeff());
  for (int i = 0; i < h.rows(); ++i) {
    t.local.push_back({offset + i, n, h(i, i).real()});
    for (int j = i + 1; j < h.cols(); ++j) {
      if (std::abs(h(i, j)) <= 1e-14 * scale && std::abs(h(j, i)) <= 1e-14 * scale) continue;
      t.pairs.push_back({offset + i, offset + j, ad, a, h(i, j)});
      t.pairs.push_back({offset + i, offset + j, a, ad, h(j, i)});
    }
  }
  return t;
}

TermSet interaction_terms(double g, Variant variant, int n_b) {
  TermSet t;
  const Mat a = ops::annihilation(n_b), ad = ops::creation(n_b);
  if (variant == Variant::Full) {
    t.pairs.push_back({0, 1, ops::sigma_x(), a + ad, g});
  } else {
    t.pairs.push_back({0, 1, ops::sigma_plus(), a, g});
    t.pairs.push_back({0, 1, ops::sigma_minus(), ad, g});
  }
  return t;
}

MpoOperator from_terms(const SiteLayout& layout, const TermSet& t, MpoTag tag) {
  return build_mpo(layout, t.local, t.pairs, tag, true);
}

}  // namespace

HamiltonianMpos hamiltonian_mpos(const ChainRep& chain, const EmitterSpec& emitter, Variant variant,
                                 int n_b) {
  if (chain.is_block()) {
    throw Error(ErrorKind::Unsupported, "block chains support the field Hamiltonian only");
  }
  const SiteLayout layout = SiteLayout::atom_chain(chain.length(), n_b);
  const double g = chain.interaction_scale(emitter.coupling);
  const TermSet atom = atom_terms(emitter.frequency);
  const TermSet field = field_terms(chain.single_particle_matrix(), n_b, 1);
  const TermSet inter = interaction_terms(g, variant, n_b);
  TermSet total = atom;
  total.append(field);
  total.append(inter);
  return {from_terms(layout, atom, MpoTag::AtomHamiltonian),
          from_terms(layout, field, MpoTag::FieldHamiltonian),
          from_terms(layout, inter, MpoTag::InteractionHamiltonian),
          from_terms(layout, total, MpoTag::TotalHamiltonian)};
}

MpoOperator field_hamiltonian_mpo(const ChainRep& chain, int n_b, bool with_atom_site) {
  const int m = chain.length();
  SiteLayout layout = with_atom_site ? SiteLayout::atom_chain(m, n_b) : SiteLayout{std::vector<int>(m, n_b)};
  layout.validate();
  return from_terms(layout, field_terms(chain.single_particle_matrix(), n_b, with_atom_site ? 1 : 0),
                    MpoTag::FieldHamiltonian);
}

MpoOperator excitation_number_mpo(const SiteLayout& layout) {
  std::vector<LocalTerm> local{{0, ops::sigma_plus() * ops::sigma_minus(), 1.0}};
  for (int i = 1; i < layout.size(); ++i) local.push_back({i, ops::number(layout.dim(i)), 1.0});
  return build_mpo(layout, local, {}, MpoTag::ExcitationNumber, true);
}

MpoOperator chain_sum_mpo(const SiteLayout& layout, std::span<const cplx> coefficients,
                          const Mat& op, MpoTag tag) {
  if (static_cast<int>(coefficients.size()) != layout.size() - 1) {
    throw Error(ErrorKind::DimensionMismatch, "one coefficient per chain site required");
  }
  std::vector<LocalTerm> local;
  for (std::size_t i = 0; i < coefficients.size(); ++i)
    if (coefficients[i] != cplx(0.0)) local.push_back({static_cast<int>(i) + 1, op, coefficients[i]});
  return build_mpo(layout, local, {}, tag, false);
}

MpoOperator mode_creation_mpo(const ChainRep& chain, const SiteLayout& layout, int mode_position) {
  if (mode_position < 0 || mode_position >= chain.transform.cols()) {
    throw Error(ErrorKind::InvalidArgument, "mode position out of range");
  }
  if (layout.size() != chain.length() + 1) throw Error(ErrorKind::LayoutMismatch, "layout vs chain length");
  std::vector<cplx> coeff(chain.length());
  for (int i = 0; i < chain.length(); ++i) coeff[i] = chain.transform(i, mode_position);
  return chain_sum_mpo(layout, coeff, ops::creation(layout.dim(1)), MpoTag::ModeCreation);
}

// ---------------------------------------------------------------------------
// Expectation values

cplx expectation(const MpsState& state, const MpoOperator& mpo) {
  require_same_layout(state.layout, mpo.layout);
  Env L = boundary_env();
  for (int i = 0; i < state.size(); ++i) L = left_step(L, state.tensors[i], state.tensors[i], mpo.sites[i]);
  return L[0](0, 0);
}

cplx local_expectation(const MpsState& state, const Mat& op, int site) {
  if (site < 0 || site >= state.size()) throw Error(ErrorKind::InvalidArgument, "site out of range");
  if (op.rows() != state.layout.dim(site)) throw Error(ErrorKind::LayoutMismatch, "operator dimension");
  Mat E = Mat::Ones(1, 1);
  for (int i = 0; i < state.size(); ++i)
    E = i == site ? left_transfer_op(E, state.tensors[i], state.tensors[i], op)
                  : left_transfer(E, state.tensors[i], state.tensors[i]);
  return E(0, 0);
}

std::vector<cplx> local_expectations(const MpsState& state, std::span<const Mat> op_list) {
  if (static_cast<int>(op_list.size()) != state.size()) {
    throw Error(ErrorKind::LayoutMismatch, "one operator slot per site required");
  }
  const auto EL = left_identity_envs(state);
  const auto ER = right_identity_envs(state);
  std::vector<cplx> out(state.size(), 0.0);
  for (int i = 0; i < state.size(); ++i) {
    if (op_list[i].size() == 0) continue;
    if (op_list[i].rows() != state.layout.dim(i)) throw Error(ErrorKind::LayoutMismatch, "operator dimension");
    out[i] = close_site(EL[i], state.tensors[i], ER[i + 1], op_list[i]);
  }
  return out;
}

Mat two_point(const MpsState& state, const Mat& op_a, const Mat& op_b, int first_site) {
  const int m = state.size();
  if (first_site < 0 || first_site >= m) throw Error(ErrorKind::InvalidArgument, "first site out of range");
  for (int i = first_site; i < m; ++i)
    if (state.layout.dim(i) != op_a.rows() || state.layout.dim(i) != op_b.rows())
      throw Error(ErrorKind::LayoutMismatch, "operator dimension");
  const auto EL = left_identity_envs(state);
  const auto ER = right_identity_envs(state);
  const int n = m - first_site;
  Mat out(n, n);
  const Mat ab = op_a * op_b;
  for (int i = first_site; i < m; ++i) {
    const auto& Ai = state.tensors[i];
    out(i - first_site, i - first_site) = close_site(EL[i], Ai, ER[i + 1], ab);
    // op_a at i, op_b at j > i, and the mirrored pair.
    Mat Ta = left_transfer_op(EL[i], Ai, Ai, op_a);
    Mat Tb = left_transfer_op(EL[i], Ai, Ai, op_b);
    for (int j = i + 1; j < m; ++j) {
      const auto& Aj = state.tensors[j];
      out(i - first_site, j - first_site) = close_site(Ta, Aj, ER[j + 1], op_b);
      out(j - first_site, i - first_site) = close_site(Tb, Aj, ER[j + 1], op_a);
      if (j + 1 < m) {
        Ta = left_transfer(Ta, Aj, Aj);
        Tb = left_transfer(Tb, Aj, Aj);
      }
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// MPO application

MpoApplication apply_mpo(const MpsState& state, const MpoOperator& mpo, const TruncationPolicy& policy) {
  require_same_layout(state.layout, mpo.layout);
  policy.validate();
  const int m = state.size();
  MpsState out;
  out.layout = state.layout;
  for (int i = 0; i < m; ++i) {
    const auto& A = state.tensors[i];
    const auto& W = mpo.sites[i];
    const int d = state.layout.dim(i), Dl = left_dim(A), Dr = right_dim(A);
    SiteTensor N(d, Mat::Zero(W.left_dim * Dl, W.right_dim * Dr));
    for (const auto& e : W.entries)
      for (int s = 0; s < d; ++s)
        for (int sp = 0; sp < d; ++sp)
          if (e.op(s, sp) != cplx(0.0)) N[s].block(e.left * Dl, e.right * Dr, Dl, Dr) += e.op(s, sp) * A[sp];
    out.tensors.push_back(std::move(N));
  }
  // Compress: left-orthonormalize, then truncate right to left.
  for (int i = 0; i + 1 < m; ++i) left_orthonormalize_site(out, i);
  MpoApplication res;
  for (int i = m - 1; i > 0; --i) {
    const int d = out.layout.dim(i);
    const auto t = truncated_svd(stack_cols(out.tensors[i]), policy);
    out.tensors[i] = unstack_cols(t.Vh, d);
    const Mat US = t.U * t.S.asDiagonal();
    for (auto& a : out.tensors[i - 1]) a = a * US;
    res.discarded_weight += t.discarded;
    res.truncation_flagged = res.truncation_flagged || t.forced;
  }
  out.center = 0;
  out.truncation_weight = state.truncation_weight + res.discarded_weight;
  res.state = std::move(out);
  return res;
}

// ---------------------------------------------------------------------------
// DMRG

namespace {

// Local eigenproblem on a two-site block.
struct TwoSiteProblem {
  const Env* L;
  const Env* R;
  const MpoSite* W1;
  const MpoSite* W2;
  int d1, d2, Dl, Dr;
  std::vector<Vec> penalties;  // projected orthogonal states
  double weight = 0.0;

  Eigen::Index size() const { return static_cast<Eigen::Index>(d1) * d2 * Dl * Dr; }

  // theta block (s1, s2) occupies [(s1 d2 + s2) Dl Dr, ...) in column-major Dl x Dr.
  std::vector<Mat> unpack(const Vec& x) const {
    std::vector<Mat> t(d1 * d2);
    const Eigen::Index blk = static_cast<Eigen::Index>(Dl) * Dr;
    for (int k = 0; k < d1 * d2; ++k) t[k] = Eigen::Map<const Mat>(x.data() + k * blk, Dl, Dr);
    return t;
  }
  Vec pack(const std::vector<Mat>& t) const {
    Vec x(size());
    const Eigen::Index blk = static_cast<Eigen::Index>(Dl) * Dr;
    for (int k = 0; k < d1 * d2; ++k) Eigen::Map<Mat>(x.data() + k * blk, Dl, Dr) = t[k];
    return x;
  }

  Vec apply(const Vec& x) const {
    const auto theta = unpack(x);
    const int wl = W1->left_dim, wm = W1->right_dim, wr = W2->right_dim;
    // X[a][s1 s2] = L[a] theta
    std::vector<std::vector<Mat>> X(wl);
    for (const auto& e : W1->entries) {
      if (!X[e.left].empty()) continue;
      X[e.left].resize(d1 * d2);
      for (int k = 0; k < d1 * d2; ++k) X[e.left][k] = (*L)[e.left] * theta[k];
    }
    // Y[b][t1 s2] = sum W1_ab(t1, s1) X[a][s1 s2]
    std::vector<std::vector<Mat>> Y(wm);
    auto accumulate = [](std::vector<Mat>& dst, int k, const Mat& src, cplx w, int rows, int cols) {
      if (dst[k].size() == 0) dst[k] = Mat::Zero(rows, cols);
      if (w == cplx(1.0)) {
        dst[k] += src;
      } else {
        dst[k] += w * src;
      }
    };
    for (const auto& e : W1->entries) {
      auto& y = Y[e.right];
      if (y.empty()) y.resize(d1 * d2);
      for (int t1 = 0; t1 < d1; ++t1)
        for (int s1 = 0; s1 < d1; ++s1) {
          const cplx w = e.identity ? (t1 == s1 ? cplx(1.0) : cplx(0.0)) : e.op(t1, s1);
          if (w == cplx(0.0)) continue;
          for (int s2 = 0; s2 < d2; ++s2) accumulate(y, t1 * d2 + s2, X[e.left][s1 * d2 + s2], w, Dl, Dr);
        }
    }
    // Z[c][t1 t2] = sum W2_bc(t2, s2) Y[b][t1 s2]
    std::vector<std::vector<Mat>> Z(wr);
    for (const auto& e : W2->entries) {
      if (Y[e.left].empty()) continue;
      auto& z = Z[e.right];
      if (z.empty()) z.resize(d1 * d2);
      for (int t2 = 0; t2 < d2; ++t2)
        for (int s2 = 0; s2 < d2; ++s2) {
          const cplx w = e.identity ? (t2 == s2 ? cplx(1.0) : cplx(0.0)) : e.op(t2, s2);
          if (w == cplx(0.0)) continue;
          for (int t1 = 0; t1 < d1; ++t1) {
            const Mat& src = Y[e.left][t1 * d2 + s2];
            if (src.size() == 0) continue;
            accumulate(z, t1 * d2 + t2, src, w, Dl, Dr);
          }
        }
    }
    std::vector<Mat> out(d1 * d2, Mat::Zero(Dl, Dr));
    for (int c = 0; c < wr; ++c) {
      if (Z[c].empty()) continue;
      const Mat Rt = (*R)[c].transpose();
      for (int k = 0; k < d1 * d2; ++k)
        if (Z[c][k].size()) out[k].noalias() += Z[c][k] * Rt;
    }
    Vec y = pack(out);
    for (const auto& p : penalties) y += weight * p * p.dot(x);
    return y;
  }
};

struct EigenPair {
  double value;
  Vec vector;
};

EigenPair lowest_eigenpair(const TwoSiteProblem& prob, Vec x, int krylov_dim, int max_restarts, double tol) {
  const Eigen::Index n = prob.size();
  if (!(x.norm() > 0.0)) x = Vec::Ones(n);
  x.normalize();
  const int kmax = static_cast<int>(std::min<Eigen::Index>(krylov_dim, n));
  double theta = 0.0;
  for (int restart = 0; restart <= max_restarts; ++restart) {
    Mat V(n, kmax);
    std::vector<double> alpha, beta;
    V.col(0) = x;
    int k = 0;
    double last_beta = 0.0;
    for (; k < kmax; ++k) {
      Vec w = prob.apply(V.col(k));
      const double a = V.col(k).dot(w).real();
      alpha.push_back(a);
      w -= a * V.col(k);
      if (k > 0) w -= beta.back() * V.col(k - 1);
      for (int pass = 0; pass < 2; ++pass) w -= V.leftCols(k + 1) * (V.leftCols(k + 1).adjoint() * w);
      last_beta = w.norm();
      if (k + 1 == kmax || last_beta < 1e-14 * std::max(1.0, std::abs(a))) {
        ++k;
        break;
      }
      beta.push_back(last_beta);
      V.col(k + 1) = w / last_beta;
    }
    Eigen::MatrixXd T = Eigen::MatrixXd::Zero(k, k);
    for (int i = 0; i < k; ++i) T(i, i) = alpha[i];
    for (int i = 0; i + 1 < k; ++i) T(i, i + 1) = T(i + 1, i) = beta[i];
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(T);
    theta = es.eigenvalues()[0];
    const Eigen::VectorXd y = es.eigenvectors().col(0);
    x = V.leftCols(k) * y.cast<cplx>();
    x.normalize();
    const double residual = last_beta * std::abs(y[k - 1]);
    if (residual <= tol * std::max(1.0, std::abs(theta)) || k < kmax || k == n) break;
  }
  return {theta, x};
}

}  // namespace

DmrgResult dmrg_minimize(const MpoOperator& H, const MpsState& init, const DmrgOptions& options,
                         std::span<const MpsState> orthogonal_to) {
  if (!H.hermitian) throw Error(ErrorKind::NonHermitian, "DMRG requires a Hermitian operator");
  require_same_layout(H.layout, init.layout);
  for (const auto& o : orthogonal_to) {
    if (!(o.layout == init.layout)) throw Error(ErrorKind::LayoutMismatch, "penalty state layout differs");
  }
  options.policy.validate();
  const int m = init.size();
  if (m < 2) throw Error(ErrorKind::InvalidArgument, "DMRG needs at least two sites");

  MpsState st = init;
  canonicalize(st, 0);
  normalize(st);

  double weight = 0.0;
  if (!orthogonal_to.empty()) {
    if (options.penalty_weight) {
      weight = *options.penalty_weight;
    } else {
      const auto& ref = orthogonal_to[0];
      const double e_ref = expectation(ref, H).real() / std::max(1e-300, overlap(ref, ref).real());
      weight = 10.0 * std::max(std::abs(e_ref), 1.0);
    }
  }

  // Environments: Lenv[i] covers sites < i, Renv[i] covers sites >= i.
  std::vector<Env> Lenv(m + 1), Renv(m + 1);
  Lenv[0] = boundary_env();
  Renv[m] = boundary_env();
  for (int i = m - 1; i >= 1; --i) Renv[i] = right_step(Renv[i + 1], st.tensors[i], st.tensors[i], H.sites[i]);
  const std::size_t P = orthogonal_to.size();
  std::vector<std::vector<Mat>> OL(P, std::vector<Mat>(m + 1)), OR(P, std::vector<Mat>(m + 1));
  for (std::size_t k = 0; k < P; ++k) {
    OL[k][0] = Mat::Ones(1, 1);
    OR[k][m] = Mat::Ones(1, 1);
    for (int i = m - 1; i >= 1; --i)
      OR[k][i] = right_transfer(OR[k][i + 1], st.tensors[i], orthogonal_to[k].tensors[i]);
  }

  DmrgResult result;
  double previous = std::numeric_limits<double>::infinity();
  double eigen = 0.0;

  auto optimize = [&](int i, bool moving_right) {
    TwoSiteProblem prob;
    prob.L = &Lenv[i];
    prob.R = &Renv[i + 2];
    prob.W1 = &H.sites[i];
    prob.W2 = &H.sites[i + 1];
    prob.d1 = st.layout.dim(i);
    prob.d2 = st.layout.dim(i + 1);
    prob.Dl = left_dim(st.tensors[i]);
    prob.Dr = right_dim(st.tensors[i + 1]);
    prob.weight = weight;
    std::vector<Mat> theta(prob.d1 * prob.d2);
    for (int s1 = 0; s1 < prob.d1; ++s1)
      for (int s2 = 0; s2 < prob.d2; ++s2) theta[s1 * prob.d2 + s2] = st.tensors[i][s1] * st.tensors[i + 1][s2];
    for (std::size_t k = 0; k < P; ++k) {
      const auto& phi = orthogonal_to[k].tensors;
      std::vector<Mat> p(prob.d1 * prob.d2);
      for (int s1 = 0; s1 < prob.d1; ++s1)
        for (int s2 = 0; s2 < prob.d2; ++s2)
          p[s1 * prob.d2 + s2] = OL[k][i] * phi[i][s1] * phi[i + 1][s2] * OR[k][i + 2].transpose();
      prob.penalties.push_back(prob.pack(p));
    }
    auto ep = lowest_eigenpair(prob, prob.pack(theta), options.krylov_dim, options.max_restarts,
                               options.eigen_tol);
    eigen = ep.value;
    const auto block = prob.unpack(ep.vector);
    // Matrix rows s1 Dl + a, columns s2 Dr + b.
    Mat M(prob.d1 * prob.Dl, prob.d2 * prob.Dr);
    for (int s1 = 0; s1 < prob.d1; ++s1)
      for (int s2 = 0; s2 < prob.d2; ++s2)
        M.block(s1 * prob.Dl, s2 * prob.Dr, prob.Dl, prob.Dr) = block[s1 * prob.d2 + s2];
    auto t = truncated_svd(M, options.policy);
    t.S /= t.S.norm();
    result.max_truncation = std::max(result.max_truncation, t.discarded);
    st.truncation_weight += t.discarded;
    if (moving_right) {
      st.tensors[i] = unstack_rows(t.U, prob.d1);
      st.tensors[i + 1] = unstack_cols(t.S.cast<cplx>().asDiagonal() * t.Vh, prob.d2);
      st.center = i + 1;
      Lenv[i + 1] = left_step(Lenv[i], st.tensors[i], st.tensors[i], H.sites[i]);
      for (std::size_t k = 0; k < P; ++k)
        OL[k][i + 1] = left_transfer(OL[k][i], st.tensors[i], orthogonal_to[k].tensors[i]);
    } else {
      st.tensors[i] = unstack_rows(t.U * t.S.cast<cplx>().asDiagonal(), prob.d1);
      st.tensors[i + 1] = unstack_cols(t.Vh, prob.d2);
      st.center = i;
      Renv[i + 1] = right_step(Renv[i + 2], st.tensors[i + 1], st.tensors[i + 1], H.sites[i + 1]);
      for (std::size_t k = 0; k < P; ++k)
        OR[k][i + 1] = right_transfer(OR[k][i + 2], st.tensors[i + 1], orthogonal_to[k].tensors[i + 1]);
    }
  };

  for (int sweep = 0; sweep < options.max_sweeps; ++sweep) {
    for (int i = 0; i + 1 < m; ++i) optimize(i, true);
    for (int i = m - 2; i >= 0; --i) optimize(i, false);
    result.sweep_energies.push_back(eigen);
    if (sweep + 1 >= options.min_sweeps && std::abs(previous - eigen) < options.energy_tol) {
      result.converged = true;
      break;
    }
    previous = eigen;
  }
  result.penalized_energy = eigen;
  result.energy = expectation(st, H).real();
  result.state = std::move(st);
  return result;
}

// ---------------------------------------------------------------------------
// TEBD

void EvolutionConfig::validate() const {
  if (!(dt > 0.0)) throw Error(ErrorKind::InvalidArgument, "dt must be > 0");
  if (!(total_time >= 0.0)) throw Error(ErrorKind::InvalidArgument, "total time must be >= 0");
  if (order != 1 && order != 2) throw Error(ErrorKind::InvalidArgument, "Trotter order must be 1 or 2");
  if (!(stride >= dt * (1 - 1e-9))) throw Error(ErrorKind::InvalidArgument, "stride must be >= dt");
  policy.validate();
}

int EvolutionConfig::steps_per_stride() const {
  return std::max(1, static_cast<int>(std::lround(stride / dt)));
}

int EvolutionConfig::strides() const {
  return static_cast<int>(std::lround(total_time / (dt * steps_per_stride())));
}

const char* column_name(Observable o) {
  switch (o) {
    case Observable::Population: return "p_e";
    case Observable::FieldNumber: return "n_field";
    case Observable::TotalEnergy: return "e_total";
    case Observable::ExcitationNumber: return "n_exc";
    case Observable::Norm: return "norm";
    case Observable::Truncation: return "truncation";
  }
  return "unknown";
}

namespace {

Mat kron(const Mat& a, const Mat& b) {
  Mat out(a.rows() * b.rows(), a.cols() * b.cols());
  for (Eigen::Index i = 0; i < a.rows(); ++i)
    for (Eigen::Index j = 0; j < a.cols(); ++j) out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
  return out;
}

Mat hermitian_exp(const Mat& h, double t) {
  Eigen::SelfAdjointEigenSolver<Mat> es(h);
  const Vec phases = (es.eigenvalues() * (-t)).unaryExpr([](double x) { return std::polar(1.0, x); }).cast<cplx>();
  return es.eigenvectors() * phases.asDiagonal() * es.eigenvectors().adjoint();
}

}  // namespace

TebdEvolver::TebdEvolver(const ChainRep& chain, const EmitterSpec& emitter, Variant variant,
                         const EvolutionConfig& config)
    : config_(config) {
  config.validate();
  if (chain.is_block()) {
    throw Error(ErrorKind::Unsupported, "TEBD needs a nearest-neighbour chain; block chains are unsupported");
  }
  const int n_b = config.policy.n_b;
  const int m = chain.length();
  layout_ = SiteLayout::atom_chain(m, n_b);
  mpos_ = hamiltonian_mpos(chain, emitter, variant, n_b);
  excitations_ = excitation_number_mpo(layout_);

  const Mat a = ops::annihilation(n_b), ad = ops::creation(n_b), n = ops::number(n_b);
  const Mat Ib = ops::identity(n_b), Ia = ops::identity(2);
  const double g = chain.interaction_scale(emitter.coupling);
  // Chain site 0 shares the atom bond; the last site has a single bond.
  auto bonds_touching = [m](int c) { return m == 1 ? 1 : (c == m - 1 ? 1 : 2); };

  Mat h0 = 0.5 * emitter.frequency * kron(ops::sigma_z(), Ib) +
           (chain.alphas[0] / bonds_touching(0)) * kron(Ia, n);
  if (variant == Variant::Full) {
    h0 += g * kron(ops::sigma_x(), a + ad);
  } else {
    h0 += g * (kron(ops::sigma_plus(), a) + kron(ops::sigma_minus(), ad));
  }
  bond_hamiltonians_.push_back(h0);
  for (int c = 0; c + 1 < m; ++c) {
    Mat h = chain.betas[c] * (kron(ad, a) + kron(a, ad)) + (chain.alphas[c] / bonds_touching(c)) * kron(n, Ib) +
            (chain.alphas[c + 1] / bonds_touching(c + 1)) * kron(Ib, n);
    bond_hamiltonians_.push_back(h);
  }
  for (const auto& h : bond_hamiltonians_) {
    half_gates_.push_back(hermitian_exp(h, 0.5 * config.dt));
    full_gates_.push_back(hermitian_exp(h, config.dt));
  }
}

void TebdEvolver::apply_gate(MpsState& st, int bond, const Mat& gate, bool move_right) const {
  const int i = bond;
  const int d1 = st.layout.dim(i), d2 = st.layout.dim(i + 1);
  const int Dl = left_dim(st.tensors[i]), Dr = right_dim(st.tensors[i + 1]);
  std::vector<Mat> theta(d1 * d2);
  for (int s1 = 0; s1 < d1; ++s1)
    for (int s2 = 0; s2 < d2; ++s2) theta[s1 * d2 + s2] = st.tensors[i][s1] * st.tensors[i + 1][s2];
  Mat M = Mat::Zero(d1 * Dl, d2 * Dr);
  for (int t = 0; t < d1 * d2; ++t) {
    const int t1 = t / d2, t2 = t % d2;
    for (int s = 0; s < d1 * d2; ++s) {
      const cplx w = gate(t, s);
      if (w == cplx(0.0)) continue;
      M.block(t1 * Dl, t2 * Dr, Dl, Dr) += w * theta[s];
    }
  }
  auto tr = truncated_svd(M, config_.policy);
  tr.S /= tr.S.norm();
  st.truncation_weight += tr.discarded;
  if (move_right) {
    st.tensors[i] = unstack_rows(tr.U, d1);
    st.tensors[i + 1] = unstack_cols(tr.S.cast<cplx>().asDiagonal() * tr.Vh, d2);
    st.center = i + 1;
  } else {
    st.tensors[i] = unstack_rows(tr.U * tr.S.cast<cplx>().asDiagonal(), d1);
    st.tensors[i + 1] = unstack_cols(tr.Vh, d2);
    st.center = i;
  }
}

void TebdEvolver::step(MpsState& st) const {
  const int B = static_cast<int>(bond_hamiltonians_.size());
  if (config_.order == 2) {
    if (st.center != 0) canonicalize(st, 0);
    for (int b = 0; b < B; ++b) apply_gate(st, b, half_gates_[b], true);
    for (int b = B - 1; b >= 0; --b) apply_gate(st, b, half_gates_[b], false);
  } else {
    if (st.center != 0) canonicalize(st, 0);
    for (int b = 0; b < B; ++b) apply_gate(st, b, full_gates_[b], true);
  }
}

ObservableTable TebdEvolver::evolve(MpsState st, std::span<const Observable> observers,
                                    const std::function<void(double, const MpsState&)>& callback) const {
  require_same_layout(st.layout, layout_);
  canonicalize(st, 0);
  std::vector<std::string> names{"t"};
  for (auto o : observers) names.push_back(column_name(o));
  ObservableTable table(names);
  const int m = layout_.size();
  std::vector<Mat> number_ops(m);
  for (int i = 1; i < m; ++i) number_ops[i] = ops::number(layout_.dim(i));
  number_ops[0] = ops::sigma_z();

  auto record = [&](double t) {
    std::vector<Cell> row{t};
    std::vector<cplx> locals;
    auto ensure_locals = [&] {
      if (locals.empty()) locals = local_expectations(st, number_ops);
    };
    for (auto o : observers) {
      switch (o) {
        case Observable::Population:
          ensure_locals();
          row.push_back(0.5 * (1.0 + locals[0].real()));
          break;
        case Observable::FieldNumber: {
          ensure_locals();
          double nf = 0.0;
          for (int i = 1; i < m; ++i) nf += locals[i].real();
          row.push_back(nf);
          break;
        }
        case Observable::TotalEnergy: row.push_back(expectation(st, mpos_.total).real()); break;
        case Observable::ExcitationNumber: row.push_back(expectation(st, excitations_).real()); break;
        case Observable::Norm: row.push_back(st.norm()); break;
        case Observable::Truncation: row.push_back(st.truncation_weight); break;
      }
    }
    table.add_row(std::move(row));
    if (callback) callback(t, st);
  };

  const int per = config_.steps_per_stride();
  const int strides = config_.strides();
  record(0.0);
  long steps = 0;
  for (int k = 0; k < strides; ++k) {
    for (int s = 0; s < per; ++s) {
      step(st);
      ++steps;
    }
    record(steps * config_.dt);
  }
  return table;
}

ObservableTable tebd_evolve(const ChainRep& chain, const EmitterSpec& emitter, Variant variant,
                            const MpsState& init, const EvolutionConfig& config,
                            std::span<const Observable> observers) {
  TebdEvolver ev(chain, emitter, variant, config);
  return ev.evolve(init, observers);
}

}  // namespace giantatom
