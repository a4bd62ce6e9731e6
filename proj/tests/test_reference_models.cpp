#include <cmath>
#include <numbers>
#include <vector>

#include "doctest.h"
#include "giantatom/error.hpp"
#include "giantatom/experiments.hpp"
#include "giantatom/reference_models.hpp"

using namespace giantatom;

namespace {

constexpr double pi = std::numbers::pi;

}  // namespace

TEST_CASE("dark-state conditions") {
  const DarkStateParams b{40 * pi, 4.0, 0.025, 1.0};
  const auto sb = dark_state_conditions(b, 200);
  REQUIRE(sb.size() == 1);
  CHECK(sb[0].n == 2);
  CHECK(sb[0].parity == DarkParity::Symmetric);
  // 1 / (2 (1 - 4 (1 - 1.025))) = 1 / 2.2
  CHECK(std::norm(sb[0].amplitude) == doctest::Approx(0.25 / (1.1 * 1.1)));
  CHECK(std::norm(sb[0].amplitude) == doctest::Approx(0.2066).epsilon(0.001));

  const DarkStateParams c{10 * pi, pi, 0.5, 1.0};
  const auto sc = dark_state_conditions(c, 200);
  REQUIRE(sc.size() == 3);
  CHECK(sc[0].n == 9);
  CHECK(sc[0].parity == DarkParity::Antisymmetric);
  CHECK(sc[1].n == 10);
  CHECK(sc[1].parity == DarkParity::Symmetric);
  CHECK(sc[2].n == 11);
  CHECK(sc[2].parity == DarkParity::Antisymmetric);

  // beating of the three components has period 2 tau
  const double hi = std::norm(dark_state_superposition(c, 200, 0.0));
  const double lo = std::norm(dark_state_superposition(c, 200, 1.0));
  CHECK(hi == doctest::Approx(0.190).epsilon(0.03));
  CHECK(lo == doctest::Approx(0.0022).epsilon(0.5));
  CHECK(std::norm(dark_state_superposition(c, 200, 2.7)) ==
        doctest::Approx(std::norm(dark_state_superposition(c, 200, 0.7))));

  CHECK_THROWS_AS(dark_state_amplitude(3, DarkParity::Symmetric, b, 0.0), Error);
  try {
    dark_state_amplitude(3, DarkParity::Symmetric, b, 0.0);
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::InvalidDarkState);
  }
}

TEST_CASE("dark states are invariant under a change of time unit") {
  const DarkStateParams a{10 * pi, pi, 0.5, 1.0};
  const DarkStateParams b{5 * pi, pi, 0.5, 2.0};
  const auto sa = dark_state_conditions(a, 100);
  const auto sb = dark_state_conditions(b, 100);
  REQUIRE(sa.size() == sb.size());
  for (std::size_t i = 0; i < sa.size(); ++i) {
    CHECK(sa[i].n == sb[i].n);
    CHECK(std::abs(sa[i].amplitude - sb[i].amplitude) < 1e-12);
  }
  CHECK(std::abs(dark_state_superposition(a, 100, 0.37) - dark_state_superposition(b, 100, 0.74)) < 1e-12);
}

TEST_CASE("single-excitation propagator") {
  DarkStateParams p{10 * pi, pi, 0.5, 1.0};
  const auto setup = dark_state_setup(p, {100.0, 20.0});
  CHECK(setup.hermiticity_error() < 1e-12);
  const auto [lo, hi] = setup.spectral_bounds();
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(setup.dense(), Eigen::EigenvaluesOnly);
  CHECK(lo <= es.eigenvalues().minCoeff());
  CHECK(hi >= es.eigenvalues().maxCoeff());

  Eigen::VectorXcd psi0 = Eigen::VectorXcd::Zero(setup.dimension());
  psi0[0] = 1.0;
  const std::vector<double> times{0.0, 0.5, 1.0, 3.0};
  PropagationOptions dense, series;
  dense.keep_amplitudes = series.keep_amplitudes = true;
  series.dense_limit = 0;
  const auto a = single_excitation_evolve(setup, psi0, times, dense);
  const auto b = single_excitation_evolve(setup, psi0, times, series);
  for (std::size_t i = 0; i < times.size(); ++i) CHECK((a.amplitudes[i] - b.amplitudes[i]).norm() < 1e-9);
  for (double n : b.populations.column("norm")) CHECK(std::abs(n - 1.0) < 1e-12);
  const auto pe = a.populations.column("p_e_1"), ph = a.populations.column("photon");
  const auto pe2 = a.populations.column("p_e_2");
  for (std::size_t i = 0; i < times.size(); ++i) CHECK(pe[i] + pe2[i] + ph[i] == doctest::Approx(1.0));

  // evolving with -H undoes the evolution
  SingleExcitationSetup neg = setup;
  neg.emitter_frequencies *= -1.0;
  neg.mode_frequencies *= -1.0;
  neg.couplings *= -1.0;
  const auto rev = single_excitation_evolve(neg, a.amplitudes.back(), std::vector<double>{3.0}, series);
  CHECK((rev.amplitudes[0] - psi0).norm() < 1e-10);
}

TEST_CASE("uncoupled emitter stays excited") {
  const auto basis = build_mode_basis(1.0, 10, Sector::Full);
  const std::vector<EmitterSpec> ems{EmitterSpec::equidistant(20.0, 0.0, 1, 0.1, CouplingProfile::delta())};
  const auto setup = rwa_single_excitation(basis, ems);
  Eigen::VectorXcd psi0 = Eigen::VectorXcd::Zero(setup.dimension());
  psi0[0] = 1.0;
  const std::vector<double> times{0.0, 1.0, 10.0};
  for (double p : single_excitation_evolve(setup, psi0, times).populations.column("p_e_1"))
    CHECK(p == doctest::Approx(1.0));
}

TEST_CASE("single-excitation propagator agrees with RWA exact diagonalization") {
  const auto sys = oracle_system(0.1);
  const std::vector<EmitterSpec> ems{sys.emitter};
  const auto setup = rwa_single_excitation(sys.basis, ems);
  Eigen::VectorXcd psi0 = Eigen::VectorXcd::Zero(setup.dimension());
  psi0[0] = 1.0;
  const EdOracle ed(EdModel::from_modes(sys.basis, sys.coupling, sys.emitter, Variant::Rwa, 2));
  std::vector<int> local(sys.basis.size() + 1, 0);
  local[0] = 1;
  const std::vector<double> times{0.0, 0.3, 0.9, 2.0};
  const auto a = single_excitation_evolve(setup, psi0, times).populations.column("p_e_1");
  const auto b = ed.evolve_observables(ed.basis_state(local), times).column("p_e");
  for (std::size_t i = 0; i < times.size(); ++i) CHECK(a[i] == doctest::Approx(b[i]).epsilon(1e-9));
}

TEST_CASE("exact diagonalization: Jaynes-Cummings and free spectra") {
  EdModel jc;
  jc.omega = 3.0;
  jc.hopping = Eigen::MatrixXcd::Constant(1, 1, 3.0);
  jc.couplings = Eigen::VectorXcd::Constant(1, 0.2);
  jc.variant = Variant::Rwa;
  jc.n_b = 4;
  const EdOracle ed(jc);
  CHECK(ed.dimension() == 8);
  const auto s = ed.lowest(3);
  CHECK(s.energies[0] == doctest::Approx(-1.5));
  CHECK(s.energies[1] == doctest::Approx(1.5 - 0.2));
  CHECK(s.energies[2] == doctest::Approx(1.5 + 0.2));

  // lambda = 0 in the chain picture: spectrum is -Omega/2 + sum of mode energies
  const auto sys = oracle_system(0.0);
  const EdOracle free(EdModel::from_chain(sys.chain, sys.emitter, Variant::Full, 3));
  const auto f = free.lowest(2);
  CHECK(f.energies[0] == doctest::Approx(-pi));
  CHECK(f.energies[1] == doctest::Approx(pi));

  EdModel big = jc;
  big.hopping = Eigen::MatrixXcd::Identity(30, 30);
  big.couplings = Eigen::VectorXcd::Zero(30);
  try {
    EdOracle too_big(big, 1000);
    FAIL("expected DimensionCapExceeded");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::DimensionCapExceeded);
  }
}
