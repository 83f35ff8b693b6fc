#include <doctest.h>

#include <cmath>

#include "qpj/dual.hpp"
#include "qpj/error.hpp"
#include "qpj/jensen.hpp"
#include "test_util.hpp"

using namespace qpj;

namespace {

// real potential of degree d with random coefficients, |V_d| >= 0.2
TrigPotential random_real(testing::Gen& g, int d) {
  std::map<int, cplx> m;
  m[0] = g.uniform(-1, 1);
  for (int k = 1; k <= d; ++k) {
    cplx c = g.complex(0.8);
    if (k == d) c += cplx(0.5, 0.0);
    m[k] = c;
    m[-k] = std::conj(c);
  }
  return TrigPotential::from_map(m);
}

LeParams quick_le() {
  LeParams p;
  p.phase_count = 8;
  p.n = 20000;
  return p;
}

}  // namespace

TEST_CASE("build_dual: amo is the d=1 transfer matrix") {
  const double lambda = 1.7;
  const cplx e(0.3, 0.2);
  const auto dc = build_dual(amo(lambda), e);
  CHECK(dc.d == 1);
  CHECK(std::abs(dc.c(0, 0) - lambda) < 1e-15);
  for (double th : {0.0, 0.31, 0.77}) {
    CMatrix expect(2, 2);
    expect << (e - 2.0 * std::cos(kTwoPi * th)) / lambda, -1.0, 1.0, 0.0;
    CHECK((dc.strip(th) - expect).norm() < 1e-14);
    CHECK((dc.step(th) - expect).norm() < 1e-14);
  }
}

TEST_CASE("build_dual: sem leading block") {
  const auto dc = build_dual(sem(0.6, 0.3), cplx(2, 1));
  CMatrix expect(2, 2);
  expect << 0.3, 0.6, 0.0, 0.3;
  CHECK((dc.c - expect).norm() < 1e-15);
  CHECK((dc.lower - expect.adjoint()).norm() < 1e-15);
  CHECK((dc.omega.adjoint() + dc.omega).norm() == 0.0);
  // B at eps = 0 is Hermitian with 2cos on the diagonal
  const CMatrix b = dc.b(0.41);
  CHECK((b - b.adjoint()).norm() < 1e-15);
  CHECK(std::abs(b(1, 1) - 2.0 * std::cos(kTwoPi * 0.41)) < 1e-15);
}

TEST_CASE("strip matrix is the d-fold product of single steps") {
  testing::Gen g(11);
  for (int d = 1; d <= 3; ++d) {
    const auto dc = build_dual(random_real(g, d), g.complex(2.0));
    for (int t = 0; t < 10; ++t) {
      const double th = g.uniform();
      CMatrix prod = CMatrix::Identity(2 * d, 2 * d);
      for (int j = 0; j < d; ++j) prod = dc.step(th + j * dc.alpha) * prod;
      CHECK((prod - dc.strip(th)).norm() / prod.norm() < 1e-12);
    }
  }
}

TEST_CASE("symplectic at real energy, d = 1, 2, 3") {
  testing::Gen g(12);
  for (int d = 1; d <= 3; ++d) {
    const auto v = random_real(g, d);
    std::vector<double> th(100);
    for (auto& t : th) t = g.uniform();
    const auto dc = build_dual(v, g.uniform(-3, 3));
    CHECK(symplectic_residual(dc, th) < 1e-12);
    // and visibly not at complex energy
    CHECK(symplectic_residual(build_dual(v, cplx(0.0, 1.0)), th) > 1e-3);
  }
}

TEST_CASE("build_dual rejects a vanishing leading coefficient") {
  CHECK_THROWS_AS(build_dual(TrigPotential{}, 1.0), Error);
  try {
    build_dual(TrigPotential::from_map({{0, 1.0}}), 1.0);
    FAIL("expected ZeroLeadingCoefficient");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::ZeroLeadingCoefficient);
  }
  // one-sided potential: V_{-d} = 0
  try {
    build_dual(TrigPotential::from_map({{1, 1.0}}), 1.0);
    FAIL("expected ZeroLeadingCoefficient");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::ZeroLeadingCoefficient);
  }
}

TEST_CASE("rescaling identity") {
  const std::vector<double> th = phase_grid(50, 3);
  CHECK(rescaling_residual(amo(2.0), 1.0, 0.0, th) == 0.0);
  CHECK(rescaling_residual(amo(2.0), 1.0, 0.1, th) < 1e-12);
  CHECK(rescaling_residual(sem(0.6, 0.3), cplx(2, 1), -0.2, th) < 1e-12);

  testing::Gen g(13);
  for (int t = 0; t < 20; ++t) {
    const auto v = random_real(g, g.integer(1, 3));
    CHECK(rescaling_residual(v, g.complex(3.0), g.uniform(-0.3, 0.3), th) < 1e-12);
  }
}

TEST_CASE("dual spectrum: amo(1/2) on the spectrum") {
  const auto v = amo(0.5);
  const double e = auto_energy(v);
  DualParams p;
  p.le = quick_le();
  const auto s = dual_spectrum(v, e, p);
  REQUIRE(s.gamma.size() == 1);
  CHECK(std::abs(s.gamma[0] - std::log(2.0) / kTwoPi) < 5e-3);
  CHECK(s.real_energy);
  CHECK(s.pairing_defect < 5e-3 * kTwoPi);
}

TEST_CASE("dual spectrum: sem at complex energy") {
  DualParams p;
  p.le = quick_le();
  const auto s = dual_spectrum(sem(0.6, 0.3), cplx(2, 1), p);
  REQUIRE(s.gamma.size() == 2);
  CHECK(s.gamma[0] > 0.05);
  CHECK(s.gamma[1] > s.gamma[0]);
  CHECK_FALSE(s.real_energy);
  CHECK(s.groups.size() == 2);
}

TEST_CASE("dual spectrum: pairing at real energies (property)") {
  testing::Gen g(14);
  DualParams p;
  p.le = quick_le();
  for (int t = 0; t < 3; ++t) {
    const auto v = random_real(g, 2);
    const auto s = dual_spectrum(v, g.uniform(-2, 2), p);
    for (int i = 0; i < 2; ++i) {
      const double lim = std::max(5e-3 * kTwoPi, 3.0 * std::max(s.raw_err[i], s.raw_err[3 - i]));
      CHECK(std::abs(s.raw[i] + s.raw[3 - i]) < lim);
    }
  }
}

TEST_CASE("dual spectrum: decoupled second harmonic gives one double group") {
  // only V_{+-2}: even and odd sites decouple into identical copies
  const auto v = TrigPotential::from_map({{2, 0.7}, {-2, 0.7}});
  DualParams p;
  p.le = quick_le();
  const auto s = dual_spectrum(v, cplx(0.5, 1.0), p);
  REQUIRE(s.groups.size() == 1);
  CHECK(s.groups[0].multiplicity == 2);
  CHECK(s.groups[0].k == 2);
}

TEST_CASE("group_exponents") {
  const auto gs = group_exponents({0.1, 0.1005, 0.5, 0.9, 0.9001, 0.9002}, 1e-3);
  REQUIRE(gs.size() == 3);
  CHECK(gs[0].multiplicity == 2);
  CHECK(gs[0].k == 2);
  CHECK(gs[1].multiplicity == 1);
  CHECK(gs[1].k == 3);
  CHECK(gs[2].multiplicity == 3);
  CHECK(gs[2].k == 6);
  CHECK(gs[2].value == doctest::Approx(0.9001));
  CHECK(group_exponents({}, 1e-3).empty());
}

TEST_CASE("shifted spectrum: every exponent moves by eps") {
  DualParams p;
  p.le = quick_le();
  CHECK(shifted_spectrum_check(amo(2.0), 0.5, 0.0, p).max_deviation < 1e-12);
  CHECK(shifted_spectrum_check(amo(2.0), 0.5, 0.05, p).max_deviation < 5e-3);
  CHECK(shifted_spectrum_check(sem(0.6, 0.3), cplx(2, 1), 0.1, p).max_deviation < 5e-3);
}

TEST_CASE("dual limit table") {
  DualParams p;
  p.le = quick_le();
  const cplx e(0.5, 0.8);

  SUBCASE("trig polynomial padded with negligible terms") {
    const auto seq = AnalyticPotential::from_coefficients(
        [](int k) -> cplx {
          if (std::abs(k) == 1) return 0.6;
          if (std::abs(k) == 2) return 0.3;
          return std::abs(k) <= 2 ? 0.0 : 1e-18;
        },
        4, 1.0);
    const auto rows = dual_limit_table(seq, e, {2, 3, 4}, p);
    REQUIRE(rows.size() == 3);
    for (const auto& r : rows) CHECK(r.lhat.size() == 2);
    for (std::size_t i = 1; i < rows.size(); ++i) {
      for (double c : rows[i].cauchy) CHECK(c == 0.0);
    }
  }

  SUBCASE("geometric coefficients converge") {
    const auto seq = AnalyticPotential::from_coefficients(
        [](int k) -> cplx { return std::pow(0.3, std::abs(k)); }, 5, std::log(1 / 0.3) / kTwoPi);
    const auto rows = dual_limit_table(seq, e, {1, 2, 3, 4, 5}, p);
    REQUIRE(rows.size() == 5);
    // smallest exponent is shared by every row; its Cauchy differences shrink
    CHECK(rows[3].cauchy[0] < rows[2].cauchy[0]);
    CHECK(rows[4].cauchy[0] < rows[3].cauchy[0]);
  }

  SUBCASE("single row") {
    const auto rows = dual_limit_table(
        AnalyticPotential::from_coefficients([](int k) -> cplx { return k == 0 ? 0.0 : 1.0; }, 1, 1.0), e,
        {1}, p);
    CHECK(rows.size() == 1);
    CHECK(rows[0].cauchy.empty());
  }

  CHECK_THROWS_AS(dual_limit_table(AnalyticPotential::from_coefficients([](int) -> cplx { return 1.0; }, 2, 1.0),
                                   e, {2, 1}, p),
                  Error);
}

TEST_CASE("dual cocycle off the real axis is dominated at k = d") {
  const auto dc = build_dual(sem(0.6, 0.3), cplx(0.3, 0.5));
  const auto r = domination_check(dc.cocycle(), 2, 2000, phase_grid(8, 5));
  CHECK(r.dominated);
}
