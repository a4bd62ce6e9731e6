// chain_builder.hpp - Lanczos tridiagonalization (plain, partial and full
// reorthogonalization), block Lanczos, and the star-to-chain mapping of the
// waveguide field.

#pragma once

#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "giantatom/field_model.hpp"

namespace giantatom {

enum class Reorthogonalization { None, Partial, Full };

struct LanczosOptions {
  Reorthogonalization reorth_mode = Reorthogonalization::Full;
  double roundoff_unit = std::numeric_limits<double>::epsilon();
  // Absolute tolerance; when unset, 1e-13 * ||A||.
  std::optional<double> breakdown_tol;
  // 0 means "dimension of A".
  int max_steps = 0;
  std::uint64_t rng_seed = 0x6a09e667f3bcc908ULL;

  void validate() const;
  double semi_orthogonality_threshold() const;
};

struct LanczosReport {
  int steps = 0;
  bool breakdown = false;
  double trailing_beta = 0.0;  // beta_m after the last accepted step
  std::vector<int> reorth_steps;
  // max_k |xi_{k,j+1}| after each step (simulated for Partial, exact 0 otherwise).
  std::vector<double> orthogonality_estimate;
  std::uint64_t rng_draws = 0;
};

struct TridiagonalResult {
  std::vector<double> alphas;
  std::vector<double> betas;  // size m-1, all >= 0
  Eigen::MatrixXcd basis;     // n x m, orthonormal columns
  LanczosReport report;

  int size() const { return static_cast<int>(alphas.size()); }
  Eigen::MatrixXd matrix() const;
};

/// Simulated loss-of-orthogonality recurrence for partial reorthogonalization.
///
/// Holds rows xi_{., j-1} and xi_{., j} of the symmetric estimate matrix
/// (1-based step index j). Random terms use N(0, 0.3), N(0, 0.6) and N(0, 1.5)
/// with the second parameter a variance.
class OrthogonalityMonitor {
 public:
  OrthogonalityMonitor(int dimension, double roundoff_unit, std::uint64_t seed);

  /// Advances to xi_{., j+1} given alpha_1..alpha_j and beta_1..beta_j
  /// (beta_j > 0). Returns the new row, entries k = 1..j+1 at index k-1.
  const std::vector<double>& advance(std::span<const double> alphas,
                                     std::span<const double> betas);
  /// Resets xi_{k, j+1}, k <= j, after a reorthogonalization.
  void reset_current();

  double max_offdiagonal() const;
  int step() const { return step_; }
  std::uint64_t draws() const { return draws_; }

 private:
  double draw(double variance);

  int dimension_;
  double eps_;
  std::mt19937_64 rng_;
  std::uint64_t draws_ = 0;
  int step_ = 1;  // rows currently describe xi_{., step_}
  std::vector<double> previous_;
  std::vector<double> current_;
};

/// One call of the xi recurrence; free-function form of OrthogonalityMonitor::advance.
const std::vector<double>& simulate_orthogonality_loss(OrthogonalityMonitor& state,
                                                       std::span<const double> alphas,
                                                       std::span<const double> betas);

using MatVec = std::function<void(const Eigen::VectorXcd&, Eigen::VectorXcd&)>;

/// Lanczos on a Hermitian operator given as a matrix-vector product.
TridiagonalResult lanczos_operator(const MatVec& apply, int dimension, double operator_norm,
                                   const Eigen::VectorXcd& start, const LanczosOptions& options);

TridiagonalResult lanczos(const Eigen::MatrixXcd& A, const Eigen::VectorXcd& start,
                          const LanczosOptions& options = {});

/// Lanczos with A = diag(values).
TridiagonalResult lanczos_diagonal(const Eigen::VectorXd& values, const Eigen::VectorXcd& start,
                                   const LanczosOptions& options = {});

struct BlockTridiagonalResult {
  std::vector<Eigen::MatrixXcd> diagonal_blocks;     // M_i, Hermitian
  std::vector<Eigen::MatrixXcd> offdiagonal_blocks;  // B_i, upper triangular
  Eigen::MatrixXcd basis;                            // n x (p b)
  int block_size = 1;
  bool rank_deficient_stop = false;

  int blocks() const { return static_cast<int>(diagonal_blocks.size()); }
  Eigen::MatrixXcd matrix() const;
};

BlockTridiagonalResult block_lanczos(const Eigen::MatrixXcd& A, const Eigen::MatrixXcd& start,
                                     const LanczosOptions& options = {});

/// Field Hamiltonian in chain form.
///
/// transform() maps eigenmode operators to chain operators, c_i = sum_j
/// Lambda_ij a_j, so row 0 is f / sqrt(mu0) for a single emitter.
struct ChainRep {
  ModeBasis basis;
  double mu0 = 0.0;
  Eigen::MatrixXcd transform;  // chain length x basis size
  // Tridiagonal chain (single emitter).
  std::vector<double> alphas;
  std::vector<double> betas;
  // Block chain (several emitters); empty optional for a single emitter.
  std::optional<BlockTridiagonalResult> block;
  // emitter_couplings(e, i) = sum_j f^e_j conj(Lambda_ij); nonzero only for
  // the first block of chain sites.
  Eigen::MatrixXcd emitter_couplings;
  LanczosReport report;
  double trailing_beta = 0.0;

  int length() const { return static_cast<int>(transform.rows()); }
  bool is_block() const { return block.has_value(); }
  double interaction_scale(double lambda) const;
  /// Hopping matrix of the chain, H_f = sum_ij h_ij c_i^dag c_j.
  Eigen::MatrixXcd single_particle_matrix() const;
  /// Hopping range (1 for tridiagonal chains, up to 2b-1 for block chains).
  int hopping_range() const;
};

struct ChainOptions {
  LanczosOptions lanczos;
  // 0 means the full sector dimension.
  int chain_length = 0;
};

ChainRep build_chain(const ModeBasis& basis, const CouplingVector& coupling,
                     const ChainOptions& options = {});

/// Block chain for several emitters sharing the field.
ChainRep build_block_chain(const ModeBasis& basis, std::span<const CouplingVector> couplings,
                           const ChainOptions& options = {});

struct ModeCorrelators {
  Eigen::MatrixXcd normal;     // <x_p^dag x_q>
  Eigen::MatrixXcd anomalous;  // <x_p x_q>
};

/// Chain correlators to eigenmode correlators, a = Lambda^dag c.
ModeCorrelators back_transform_correlations(const ModeCorrelators& chain,
                                            const Eigen::MatrixXcd& transform);

/// Writes chain.csv (index, alpha, beta) and lambda.csv (row, col, re, im).
void write_chain_csv(const ChainRep& chain, const std::string& chain_path,
                     const std::string& transform_path, const std::string& preamble = {});

}  // namespace giantatom
