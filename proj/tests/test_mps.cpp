#include <cmath>
#include <numbers>
#include <vector>

#include "doctest.h"
#include "giantatom/chain_builder.hpp"
#include "giantatom/error.hpp"
#include "giantatom/experiments.hpp"
#include "giantatom/mps.hpp"
#include "giantatom/reference_models.hpp"

using namespace giantatom;

namespace {

constexpr double pi = std::numbers::pi;

Eigen::VectorXd sorted_eigenvalues(const Eigen::MatrixXcd& H) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(H, Eigen::EigenvaluesOnly);
  return es.eigenvalues();
}

}  // namespace

TEST_CASE("product states and canonical form") {
  const auto layout = SiteLayout::atom_chain(4, 3);
  CHECK(layout.size() == 5);
  CHECK(layout.dim(0) == 2);
  CHECK(layout.dim(3) == 3);

  const std::vector<int> idx{1, 0, 2, 0, 1};
  auto s = product_state(layout, idx);
  CHECK(s.norm() == doctest::Approx(1.0));
  CHECK(s.max_bond_dimension() == 1);
  CHECK(local_expectation(s, ops::number(3), 2).real() == doctest::Approx(2.0));
  CHECK(local_expectation(s, ops::sigma_z(), 0).real() == doctest::Approx(1.0));

  auto r = random_mps(layout, 6, 42);
  canonicalize(r, 2);
  CHECK(canonical_residual(r) < 1e-12);
  normalize(r);
  CHECK(r.norm() == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(std::abs(overlap(r, r) - 1.0) < 1e-12);

  // same seed, same state
  auto r2 = random_mps(layout, 6, 42);
  normalize(r2);
  CHECK(std::abs(std::abs(overlap(r, r2)) - 1.0) < 1e-12);

  const std::vector<int> bad{2, 0, 0, 0, 0};
  CHECK_THROWS_AS(product_state(layout, bad), Error);
}

TEST_CASE("MPO construction matches dense operators") {
  const auto sys = oracle_system(0.5);
  const int nb = 3;
  const auto mpos = hamiltonian_mpos(sys.chain, sys.emitter, Variant::Full, nb);
  const Eigen::MatrixXcd H = mpos.total.to_dense();
  CHECK((H - H.adjoint()).cwiseAbs().maxCoeff() < 1e-10);
  const Eigen::MatrixXcd parts = mpos.atom.to_dense() + mpos.field.to_dense() + mpos.interaction.to_dense();
  CHECK((H - parts).cwiseAbs().maxCoeff() < 1e-9);

  const EdOracle ed(EdModel::from_chain(sys.chain, sys.emitter, Variant::Full, nb));
  const auto a = sorted_eigenvalues(H);
  const auto b = sorted_eigenvalues(ed.dense_hamiltonian());
  REQUIRE(a.size() == b.size());
  CHECK((a - b).cwiseAbs().maxCoeff() < 1e-8 * a.cwiseAbs().maxCoeff());

  // expectation of an MPO agrees with the dense sandwich
  auto r = random_mps(mpos.total.layout, 4, 3);
  normalize(r);
  const Eigen::VectorXcd v = to_dense_vector(r);
  CHECK(std::abs(expectation(r, mpos.total) - v.dot(H * v)) < 1e-8 * H.cwiseAbs().maxCoeff());
}

TEST_CASE("apply_mpo against dense product") {
  const auto sys = oracle_system(1.0);
  const auto mpos = hamiltonian_mpos(sys.chain, sys.emitter, Variant::Full, 3);
  auto r = random_mps(mpos.total.layout, 3, 8);
  normalize(r);
  const auto out = apply_mpo(r, mpos.total, {64, 1e-16, 3});
  const Eigen::VectorXcd want = mpos.total.to_dense() * to_dense_vector(r);
  const Eigen::VectorXcd got = to_dense_vector(out.state);
  CHECK((want - got).norm() < 1e-8 * want.norm());
}

TEST_CASE("DMRG ground and excited states agree with exact diagonalization") {
  for (double ratio : {0.1, 1.0}) {
    const auto sys = oracle_system(ratio);
    const EdOracle ed(EdModel::from_chain(sys.chain, sys.emitter, Variant::Full, 4));
    const auto spec = ed.lowest(2);
    DmrgOptions o;
    o.policy = {64, 1e-14, 4};
    const auto pair = solve_ground_pair(sys.chain, sys.emitter, Variant::Full, o, 2);
    CHECK(std::abs(pair.gs.energy - spec.energies[0]) < 1e-8);
    CHECK(pair.gs.energy >= spec.energies[0] - 1e-8);
    CHECK(std::abs(pair.es.energy - spec.energies[1]) < 1e-7);
    CHECK(std::abs(overlap(pair.gs.state, pair.es.state)) < 1e-6);
  }
}

TEST_CASE("uncoupled atom keeps its energies") {
  const auto sys = oracle_system(0.0);
  DmrgOptions o;
  o.policy = {8, 1e-14, 2};
  const auto pair = solve_ground_pair(sys.chain, sys.emitter, Variant::Full, o, 4);
  // ground |g,0>, first excitation the lowest of Omega and 2 pi / L
  CHECK(pair.gs.energy == doctest::Approx(-sys.emitter.frequency / 2).epsilon(1e-10));
  CHECK(pair.es.energy - pair.gs.energy == doctest::Approx(2 * pi).epsilon(1e-8));
}

TEST_CASE("TEBD follows exact evolution and conserves the RWA excitation number") {
  const auto sys = oracle_system(0.5);
  const EdOracle ed(EdModel::from_chain(sys.chain, sys.emitter, Variant::Full, 3));
  EvolutionConfig ec;
  ec.dt = 1e-3;
  ec.total_time = 0.5;
  ec.stride = 0.05;
  ec.policy = {64, 1e-20, 3};
  const TebdEvolver ev(sys.chain, sys.emitter, Variant::Full, ec);
  const std::vector<int> init{1, 0, 0, 0, 0};
  const std::vector<Observable> obs{Observable::Population, Observable::Norm};
  const auto tab = ev.evolve(product_state(ev.layout(), init), obs);
  const auto t = tab.column("t");
  const auto pe = tab.column("p_e");
  const auto ref = ed.evolve_observables(ed.basis_state(init), t).column("p_e");
  for (std::size_t i = 0; i < t.size(); ++i) CHECK(std::abs(pe[i] - ref[i]) < 1e-4);
  for (double n : tab.column("norm")) CHECK(std::abs(n - 1.0) < 1e-10);

  const TebdEvolver rwa(sys.chain, sys.emitter, Variant::Rwa, ec);
  const std::vector<Observable> nex{Observable::ExcitationNumber};
  const auto n = rwa.evolve(product_state(rwa.layout(), init), nex).column("n_exc");
  for (double x : n) CHECK(std::abs(x - 1.0) < 1e-10);
}

TEST_CASE("evolution config validation") {
  EvolutionConfig ec;
  ec.dt = 1e-3;
  ec.stride = 5e-4;
  CHECK_THROWS_AS(ec.validate(), Error);
  ec.stride = 5e-3;
  CHECK(ec.steps_per_stride() == 5);
  ec.order = 3;
  CHECK_THROWS_AS(ec.validate(), Error);
}
