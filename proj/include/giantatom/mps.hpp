// mps.hpp - matrix-product states and operators for the atom + chain system:
// MPO assembly, two-site DMRG with penalty projection, TEBD with truncated
// SVD, and expectation values.
//
// Site 0 is the atom (|g> = 0, |e> = 1); sites 1..m are chain modes with
// occupations 0..n_b-1, ordered as the Lanczos chain.

#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "giantatom/chain_builder.hpp"
#include "giantatom/field_model.hpp"
#include "giantatom/table.hpp"

namespace giantatom {

struct SiteLayout {
  std::vector<int> dims;

  static SiteLayout atom_chain(int chain_sites, int n_b);
  int size() const { return static_cast<int>(dims.size()); }
  int dim(int site) const { return dims[site]; }
  bool operator==(const SiteLayout&) const = default;
  void validate() const;
};

// Local operators.
namespace ops {
Eigen::MatrixXcd identity(int d);
Eigen::MatrixXcd sigma_z();      // diag(-1, +1) in (g, e) order
Eigen::MatrixXcd sigma_x();
Eigen::MatrixXcd sigma_plus();   // |e><g|
Eigen::MatrixXcd sigma_minus();  // |g><e|
Eigen::MatrixXcd annihilation(int d);
Eigen::MatrixXcd creation(int d);
Eigen::MatrixXcd number(int d);
}  // namespace ops

struct TruncationPolicy {
  int max_bond = 200;
  double cutoff = 1e-12;  // discarded weight per truncation
  int n_b = 25;

  void validate() const;
};

/// Site tensors A[i][s] of shape D_{i} x D_{i+1}.
struct MpsState {
  SiteLayout layout;
  std::vector<std::vector<Eigen::MatrixXcd>> tensors;
  int center = 0;
  double truncation_weight = 0.0;

  int size() const { return layout.size(); }
  int bond_dimension(int bond) const;  // between sites bond and bond+1
  int max_bond_dimension() const;
  double norm() const;
};

MpsState product_state(const SiteLayout& layout, std::span<const int> local_indices);
/// Product state with a given complex local vector on every site.
MpsState product_state(const SiteLayout& layout, std::span<const Eigen::VectorXcd> local_states);
MpsState random_mps(const SiteLayout& layout, int bond_dim, std::uint64_t seed);

/// Mixed canonical form with orthogonality center `center`.
void canonicalize(MpsState& state, int center);
void normalize(MpsState& state);
/// max |A^dag A - 1| over left isometries and |B B^dag - 1| over right ones.
double canonical_residual(const MpsState& state);

cplx overlap(const MpsState& bra, const MpsState& ket);
/// Full state vector in the product basis (site 0 most significant); small systems only.
Eigen::VectorXcd to_dense_vector(const MpsState& state);

enum class MpoTag {
  AtomHamiltonian,
  FieldHamiltonian,
  InteractionHamiltonian,
  TotalHamiltonian,
  NumberOperator,
  ExcitationNumber,
  ModeCreation,
  Identity,
  Custom
};
const char* to_string(MpoTag tag);

struct MpoEntry {
  int left = 0;
  int right = 0;
  Eigen::MatrixXcd op;  // d x d, op(s, s') = <s|O|s'>
  bool identity = false;
};

struct MpoSite {
  int left_dim = 1;
  int right_dim = 1;
  std::vector<MpoEntry> entries;
};

struct MpoOperator {
  SiteLayout layout;
  std::vector<MpoSite> sites;
  MpoTag tag = MpoTag::Custom;
  bool hermitian = false;

  int size() const { return layout.size(); }
  int max_bond_dimension() const;
  /// Dense matrix in the product basis (site 0 most significant); small systems only.
  Eigen::MatrixXcd to_dense() const;
};

struct LocalTerm {
  int site = 0;
  Eigen::MatrixXcd op;
  cplx coefficient = 1.0;
};

/// coefficient * op_i (x) op_j, identities elsewhere; requires i < j.
struct PairTerm {
  int i = 0;
  int j = 1;
  Eigen::MatrixXcd op_i;
  Eigen::MatrixXcd op_j;
  cplx coefficient = 1.0;
};

MpoOperator build_mpo(const SiteLayout& layout, std::span<const LocalTerm> local,
                      std::span<const PairTerm> pairs, MpoTag tag, bool hermitian);
MpoOperator identity_mpo(const SiteLayout& layout);

enum class Variant { Full, Rwa };
const char* to_string(Variant v);
Variant parse_variant(const std::string& name);

struct HamiltonianMpos {
  MpoOperator atom;
  MpoOperator field;
  MpoOperator interaction;
  MpoOperator total;
};

/// H_A = Omega/2 sigma_z, H_f = sum alpha n + beta (c^dag c + h.c.),
/// H_int = lambda sqrt(mu0) sigma_x (c_0 + c_0^dag) (Full) or its
/// excitation-conserving part (RWA).
HamiltonianMpos hamiltonian_mpos(const ChainRep& chain, const EmitterSpec& emitter, Variant variant,
                                 int n_b);
/// H_f alone; also accepts block chains (chain sites only, no atom).
MpoOperator field_hamiltonian_mpo(const ChainRep& chain, int n_b, bool with_atom_site);
/// sigma_+ sigma_- + sum_i n_i.
MpoOperator excitation_number_mpo(const SiteLayout& layout);
/// Sum over chain sites of coefficients[i] * op at site i+1.
MpoOperator chain_sum_mpo(const SiteLayout& layout, std::span<const cplx> coefficients,
                          const Eigen::MatrixXcd& op, MpoTag tag);
/// a_p^dag = sum_i Lambda_ip c_i^dag for mode position p of the chain basis.
MpoOperator mode_creation_mpo(const ChainRep& chain, const SiteLayout& layout, int mode_position);

cplx expectation(const MpsState& state, const MpoOperator& mpo);
cplx local_expectation(const MpsState& state, const Eigen::MatrixXcd& op, int site);
/// <op> at each site in one pass (ops[i] empty means skip, result 0).
std::vector<cplx> local_expectations(const MpsState& state, std::span<const Eigen::MatrixXcd> ops);
/// M(i, j) = <op_a at first_site+i, op_b at first_site+j>; on the diagonal the
/// product op_a op_b acts on one site.
Eigen::MatrixXcd two_point(const MpsState& state, const Eigen::MatrixXcd& op_a,
                           const Eigen::MatrixXcd& op_b, int first_site = 1);

struct MpoApplication {
  MpsState state;  // not normalized
  double discarded_weight = 0.0;
  bool truncation_flagged = false;
};

MpoApplication apply_mpo(const MpsState& state, const MpoOperator& mpo, const TruncationPolicy& policy);

struct DmrgOptions {
  int max_sweeps = 30;
  int min_sweeps = 2;
  double energy_tol = 1e-10;
  TruncationPolicy policy;
  // Penalty weight; when unset, 10 |<H>| of the first penalty state (at least 1).
  std::optional<double> penalty_weight;
  int krylov_dim = 24;
  int max_restarts = 60;
  double eigen_tol = 1e-12;
};

struct DmrgResult {
  double energy = 0.0;            // <H> of the returned state
  double penalized_energy = 0.0;  // eigenvalue including penalty terms
  MpsState state;
  std::vector<double> sweep_energies;
  bool converged = false;
  double max_truncation = 0.0;
};

DmrgResult dmrg_minimize(const MpoOperator& H, const MpsState& init, const DmrgOptions& options,
                         std::span<const MpsState> orthogonal_to = {});

struct EvolutionConfig {
  double dt = 1e-3;
  double total_time = 1.0;
  int order = 2;
  double stride = 1e-3;  // observation interval
  TruncationPolicy policy{.max_bond = 64, .cutoff = 1e-9, .n_b = 2};

  void validate() const;
  int steps_per_stride() const;
  int strides() const;
};

enum class Observable { Population, FieldNumber, TotalEnergy, ExcitationNumber, Norm, Truncation };
const char* column_name(Observable o);

/// Second-order (or first-order) Trotterized evolution over nearest-neighbour
/// bond gates. The atom bond carries H_A + H_int and half of alpha_0; chain
/// on-site energies are split evenly between the bonds touching each site.
class TebdEvolver {
 public:
  TebdEvolver(const ChainRep& chain, const EmitterSpec& emitter, Variant variant,
              const EvolutionConfig& config);

  const SiteLayout& layout() const { return layout_; }
  const HamiltonianMpos& hamiltonian() const { return mpos_; }
  /// One full Trotter step of size dt.
  void step(MpsState& state) const;
  ObservableTable evolve(MpsState state, std::span<const Observable> observers,
                         const std::function<void(double, const MpsState&)>& callback = {}) const;

 private:
  void apply_gate(MpsState& state, int bond, const Eigen::MatrixXcd& gate, bool move_right) const;

  SiteLayout layout_;
  EvolutionConfig config_;
  HamiltonianMpos mpos_;
  MpoOperator excitations_;
  std::vector<Eigen::MatrixXcd> bond_hamiltonians_;
  std::vector<Eigen::MatrixXcd> half_gates_;
  std::vector<Eigen::MatrixXcd> full_gates_;
};

ObservableTable tebd_evolve(const ChainRep& chain, const EmitterSpec& emitter, Variant variant,
                            const MpsState& init, const EvolutionConfig& config,
                            std::span<const Observable> observers);

}  // namespace giantatom
