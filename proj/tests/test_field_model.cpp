#include <cmath>
#include <numbers>

#include "doctest.h"
#include "giantatom/error.hpp"
#include "giantatom/field_model.hpp"

using namespace giantatom;

namespace {

constexpr double pi = std::numbers::pi;

// Composite Simpson of e^{ikx} rho(x) over [a, b].
cplx simpson_fourier(const CouplingProfile& p, double k, double a, double b, int intervals) {
  const double h = (b - a) / intervals;
  cplx sum = 0.0;
  for (int i = 0; i <= intervals; ++i) {
    const double x = a + i * h;
    const double w = (i == 0 || i == intervals) ? 1.0 : (i % 2 ? 4.0 : 2.0);
    sum += w * std::polar(p.density(x), k * x);
  }
  return sum * h / 3.0;
}

EmitterSpec table_one_emitter(double L = 1.0) {
  return EmitterSpec::equidistant(160 * pi / L, 0.4, 3, L / 20, CouplingProfile::gaussian(L / 500));
}

}  // namespace

TEST_CASE("mode basis layout") {
  auto full = build_mode_basis(1.0, 3, Sector::Full);
  REQUIRE(full.size() == 6);
  CHECK(full.wavenumbers[0] == doctest::Approx(-6 * pi));
  CHECK(full.wavenumbers[5] == doctest::Approx(6 * pi));
  for (int j : full.indices) CHECK(j != 0);
  for (int j = -3; j <= 3; ++j) {
    if (j == 0) continue;
    CHECK(full.indices[full.position_of(j)] == j);
  }
  auto unit = build_mode_basis(2 * pi, 1, Sector::Full);
  CHECK(unit.wavenumbers[0] == doctest::Approx(-1.0));
  CHECK(unit.wavenumbers[1] == doctest::Approx(1.0));

  auto even = build_mode_basis(1.0, 3, Sector::Even);
  REQUIRE(even.size() == 3);
  CHECK(even.fold_multiplicity() == 2);
  CHECK(even.frequencies[2] == doctest::Approx(6 * pi));
  CHECK(even.position_of(-1) == -1);

  CHECK_THROWS_AS(build_mode_basis(0.0, 3, Sector::Full), Error);
  CHECK_THROWS_AS(build_mode_basis(1.0, 0, Sector::Full), Error);
}

TEST_CASE("profile transforms match quadrature") {
  CHECK(std::abs(profile_fourier(CouplingProfile::gaussian(0.3), 0.0) - 1.0) < 1e-15);
  CHECK(std::abs(profile_fourier(CouplingProfile::lorentzian(1.0), 1.0) - std::exp(-1.0)) < 1e-15);
  CHECK(std::abs(profile_fourier(CouplingProfile::rectangle(1.0), pi)) < 1e-15);
  CHECK(profile_fourier(CouplingProfile::delta(), 1e6) == cplx(1.0));

  const double d = 1.0 / 500;
  for (double k : {0.0, 2 * pi * 80, 2 * pi * 300}) {
    auto g = CouplingProfile::gaussian(d);
    CHECK(std::abs(simpson_fourier(g, k, -12 * d, 12 * d, 4000) - profile_fourier(g, k)) < 1e-10);
    auto r = CouplingProfile::rectangle(d);
    CHECK(std::abs(simpson_fourier(r, k, -d, d, 4000) - profile_fourier(r, k)) < 1e-10);
  }
  // Lorentzian: heavy tails, so compare at moderate k with a wide window.
  auto lz = CouplingProfile::lorentzian(0.1);
  const cplx q = simpson_fourier(lz, 3.0, -2000.0, 2000.0, 4000000);
  CHECK(std::abs(q - profile_fourier(lz, 3.0)) < 1e-4);

  for (double k = -500; k <= 500; k += 7.3)
    for (auto p : {CouplingProfile::gaussian(0.01), CouplingProfile::lorentzian(0.01),
                   CouplingProfile::rectangle(0.01)})
      CHECK(std::abs(profile_fourier(p, k)) <= 1.0 + 1e-15);
}

TEST_CASE("single-point coefficient against direct quadrature") {
  const double L = 1.0, d = 1.0 / 500;
  auto basis = build_mode_basis(L, 100, Sector::Full);
  auto emitter = EmitterSpec::equidistant(1.0, 1.0, 1, 0.0, CouplingProfile::gaussian(d));
  auto f = coupling_vector(basis, emitter);
  const double k = 2 * pi * 80 / L;
  const cplx quad = cplx(0, -1) * std::sqrt(k / (2 * L)) *
                    simpson_fourier(CouplingProfile::gaussian(d), k, -12 * d, 12 * d, 4000);
  const cplx fj = f.coefficients[basis.position_of(80)];
  CHECK(std::abs(fj - quad) < 1e-9);
  CHECK(std::abs(fj) == doctest::Approx(12.3137).epsilon(1e-4));
  CHECK(std::abs(fj.real()) < 1e-12);  // -i phase retained
}

TEST_CASE("three-point geometric factor") {
  auto basis = build_mode_basis(1.0, 20, Sector::Full);
  auto single = coupling_vector(
      basis, EmitterSpec::equidistant(1.0, 1.0, 1, 0.0, CouplingProfile::gaussian(1.0 / 500)));
  auto triple = coupling_vector(basis, table_one_emitter());
  for (int j = 1; j <= 20; ++j) {
    const int p = basis.position_of(j);
    const double geometric = 1 + 2 * std::cos(2 * pi * j / 20.0);
    CHECK(std::abs(triple.coefficients[p] - geometric * single.coefficients[p]) < 1e-10);
  }
  CHECK(std::abs(triple.coefficients[basis.position_of(10)] + single.coefficients[basis.position_of(10)]) <
        1e-10);
  CHECK(triple.mu0 == doctest::Approx(triple.coefficients.squaredNorm()).epsilon(1e-15));
}

TEST_CASE("interaction scale and cutoff adequacy") {
  auto mu0_at = [](int N) {
    return coupling_vector(build_mode_basis(1.0, N, Sector::Full), table_one_emitter()).mu0;
  };
  const double mu600 = mu0_at(600);
  const double sqrt_mu0 = std::sqrt(mu600);
  CHECK(sqrt_mu0 >= 343.4);
  CHECK(sqrt_mu0 <= 346.8);
  CHECK(std::abs(mu0_at(1200) - mu600) / mu600 < 1e-6);
  // Tail bound |f_j| <= sqrt(pi |j|)/L |F(k_j)| M.
  auto basis = build_mode_basis(1.0, 600, Sector::Full);
  auto f = coupling_vector(basis, table_one_emitter());
  for (std::size_t i = 0; i < basis.size(); ++i) {
    const double bound = std::sqrt(pi * std::abs(basis.indices[i])) *
                         std::abs(profile_fourier(CouplingProfile::gaussian(1.0 / 500), basis.wavenumbers[i])) * 3;
    CHECK(std::abs(f.coefficients[i]) <= bound * (1 + 1e-12));
  }
}

TEST_CASE("even-sector fold") {
  auto full = build_mode_basis(1.0, 200, Sector::Full);
  auto f = coupling_vector(full, table_one_emitter());
  auto odd = odd_sector_coupling(f, full);
  CHECK(odd.cwiseAbs().maxCoeff() < 1e-12 * f.coefficients.cwiseAbs().maxCoeff());
  auto red = even_sector_reduce(f, full);
  CHECK(red.coupling.mu0 == f.mu0);
  CHECK(red.basis.size() == 200);
  CHECK(std::abs(red.coupling.coefficients.squaredNorm() - f.mu0) < 1e-10 * f.mu0);
  CHECK(std::abs(red.coupling.coefficients[79]) == doctest::Approx(std::sqrt(2.0) * 3 * 12.3137).epsilon(1e-4));
  CHECK(std::abs(red.coupling.coefficients[79]) == doctest::Approx(52.24).epsilon(1e-3));

  // Direct construction on an Even basis folds internally.
  auto direct = coupling_vector(build_mode_basis(1.0, 200, Sector::Even), table_one_emitter());
  CHECK((direct.coefficients - red.coupling.coefficients).cwiseAbs().maxCoeff() < 1e-12);

  // An off-centre emitter is not even.
  auto shifted = EmitterSpec::equidistant(1.0, 1.0, 3, 0.05, CouplingProfile::gaussian(0.002), 0.01);
  auto fs = coupling_vector(full, shifted);
  CHECK_THROWS_AS(even_sector_reduce(fs, full), Error);
  try {
    even_sector_reduce(fs, full);
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::NotEvenProfile);
  }
}

TEST_CASE("resonant mode ratio") {
  auto basis = build_mode_basis(1.0, 600, Sector::Full);
  auto e = table_one_emitter();
  auto f = coupling_vector(basis, e);
  const double ratio = std::abs(f.coefficients[basis.position_of(80)]) / e.frequency;
  CHECK(ratio == doctest::Approx(0.0735).epsilon(0.005));
}

TEST_CASE("validation and delta cap") {
  auto basis = build_mode_basis(1.0, 2000, Sector::Full);
  auto delta = EmitterSpec::equidistant(1.0, 1.0, 1, 0.0, CouplingProfile::delta());
  try {
    coupling_vector(basis, delta);
    FAIL("expected uv-divergence");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::UvDivergence);
  }
  CouplingOptions opts;
  opts.delta_cutoff_cap = 5000;
  auto f = coupling_vector(basis, delta, opts);
  CHECK(std::abs(f.coefficients[basis.position_of(2000)]) ==
        doctest::Approx(std::sqrt(2 * pi * 2000 / 2.0)));

  auto wide = EmitterSpec::equidistant(1.0, 1.0, 1, 0.0, CouplingProfile::gaussian(0.05));
  auto fw = coupling_vector(build_mode_basis(1.0, 10, Sector::Full), wide);
  CHECK(fw.warnings.size() == 1);

  CHECK_THROWS_AS(CouplingProfile::gaussian(0.0).validate(), Error);
  CHECK_NOTHROW(CouplingProfile::delta().validate());
  EmitterSpec empty;
  empty.frequency = 1.0;
  CHECK_THROWS_AS(coupling_vector(basis, empty), Error);
}
