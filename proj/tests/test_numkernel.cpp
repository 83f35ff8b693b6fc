#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "qpj/error.hpp"
#include "qpj/numkernel.hpp"
#include "test_util.hpp"

using namespace qpj;
using qpj::testing::Gen;

TEST_CASE("qr_positive: identity and diagonal inputs") {
  const auto id = num::qr_positive(CMatrix::Identity(3, 3));
  CHECK((id.q - CMatrix::Identity(3, 3)).norm() < 1e-15);
  CHECK((id.r - CMatrix::Identity(3, 3)).norm() < 1e-15);

  CMatrix d = CMatrix::Zero(2, 2);
  d(0, 0) = 2;
  d(1, 1) = 1;
  const auto qr = num::qr_positive(d);
  CHECK((qr.q - CMatrix::Identity(2, 2)).norm() < 1e-15);
  CHECK((qr.r - d).norm() < 1e-15);
}

TEST_CASE("qr_positive: reconstruction, unitarity, positive diagonal") {
  Gen g(0x5EED);
  for (int trial = 0; trial < 20; ++trial) {
    const CMatrix w = g.matrix(4);
    const auto qr = num::qr_positive(w);
    CHECK((w - qr.q * qr.r).norm() < 1e-12);
    CHECK((qr.q.adjoint() * qr.q - CMatrix::Identity(4, 4)).norm() < 1e-12);
    for (int i = 0; i < 4; ++i) {
      CHECK(qr.r(i, i).imag() == 0.0);
      CHECK(qr.r(i, i).real() > 0.0);
      for (int j = 0; j < i; ++j) CHECK(qr.r(i, j) == cplx{});
    }
    // factoring Q*R again reproduces the same factors
    const auto again = num::qr_positive(qr.q * qr.r);
    CHECK((again.q - qr.q).norm() < 1e-12);
    CHECK((again.r - qr.r).norm() < 1e-12);
  }
}

TEST_CASE("qr_positive: rank deficiency") {
  CMatrix w = CMatrix::Ones(3, 3);
  try {
    num::qr_positive(w);
    FAIL("expected DegenerateFrame");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::DegenerateFrame);
  }
}

TEST_CASE("eig_small: fixed examples") {
  CMatrix d = CMatrix::Zero(3, 3);
  d(0, 0) = 2;
  d(1, 1) = -1;
  d(2, 2) = 5;
  const auto ev = num::eig_small(d);
  REQUIRE(ev.size() == 3);
  CHECK(std::abs(ev[0] - cplx(5)) < 1e-14);
  CHECK(std::abs(ev[1] - cplx(2)) < 1e-14);
  CHECK(std::abs(ev[2] - cplx(-1)) < 1e-14);

  // z^2 - 3z + 2
  CMatrix comp(2, 2);
  comp << 3, -2, 1, 0;
  const auto roots = num::eig_small(comp);
  CHECK(std::abs(roots[0] - cplx(2)) < 1e-12);
  CHECK(std::abs(roots[1] - cplx(1)) < 1e-12);
}

TEST_CASE("eig_small: Hermitian input has real spectrum summing to the trace") {
  Gen g(0x5EED + 1);
  const CMatrix h = g.hermitian(8);
  const auto ev = num::eig_small(h);
  cplx sum{};
  for (auto v : ev) {
    CHECK(std::abs(v.imag()) < 1e-10);
    sum += v;
  }
  CHECK(std::abs(sum - h.trace()) < 1e-10);
}

TEST_CASE("eig_small: similarity invariance") {
  Gen g(0x5EED + 2);
  for (int trial = 0; trial < 10; ++trial) {
    const CMatrix m = g.matrix(6);
    const CMatrix p = g.well_conditioned(6);
    const CMatrix sim = num::solve_dense(p, m * p);
    auto a = num::eig_small(m), b = num::eig_small(sim);
    // match as multisets: greedy nearest pairing
    for (auto v : a) {
      auto it = std::min_element(b.begin(), b.end(),
                                 [v](cplx x, cplx y) { return std::abs(x - v) < std::abs(y - v); });
      CHECK(std::abs(*it - v) < 1e-8);
      b.erase(it);
    }
  }
}

TEST_CASE("solve_dense: examples and residual") {
  CMatrix rhs(2, 1);
  rhs << 2, 4;
  CMatrix d = CMatrix::Zero(2, 2);
  d(0, 0) = 2;
  d(1, 1) = 4;
  const CMatrix x = num::solve_dense(d, rhs);
  CHECK(std::abs(x(0, 0) - 1.0) < 1e-15);
  CHECK(std::abs(x(1, 0) - 1.0) < 1e-15);
  CHECK((num::solve_dense(CMatrix::Identity(2, 2), rhs) - rhs).norm() == 0.0);

  Gen g(0x5EED + 3);
  const CMatrix m = g.well_conditioned(50);
  const CMatrix b = g.matrix(50).leftCols(3);
  const CMatrix sol = num::solve_dense(m, b);
  CHECK((m * sol - b).norm() < 1e-10 * b.norm());
}

TEST_CASE("solve_dense: singular input") {
  CMatrix s = CMatrix::Ones(3, 3);
  CHECK_THROWS_AS(num::solve_dense(s, CMatrix::Identity(3, 3)), Error);
}

TEST_CASE("logdet_arg_path: windings") {
  const int K = 64;
  std::vector<CMatrix> constant(10, CMatrix::Identity(2, 2) * 3.0);
  CHECK(num::logdet_arg_path(constant).winding == doctest::Approx(0.0));

  std::vector<CMatrix> circle, diag;
  for (int k = 0; k <= K; ++k) {
    const cplx z = std::polar(1.0, kTwoPi * k / K);
    circle.push_back(CMatrix::Constant(1, 1, z));
    CMatrix d = CMatrix::Zero(2, 2);
    d(0, 0) = z;
    d(1, 1) = 2;
    diag.push_back(d);
  }
  CHECK(num::logdet_arg_path(circle).winding == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(num::logdet_arg_path(diag).winding == doctest::Approx(1.0).epsilon(1e-12));

  // three samples around the circle cannot be resolved
  std::vector<CMatrix> coarse;
  for (int k = 0; k <= 3; ++k) coarse.push_back(CMatrix::Constant(1, 1, std::polar(1.0, kTwoPi * k / 3)));
  try {
    num::logdet_arg_path(coarse);
    FAIL("expected GridTooCoarse");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::GridTooCoarse);
  }
}

TEST_CASE("BandLU agrees with the dense solver") {
  Gen g(0x5EED + 4);
  for (int kl : {1, 2, 3}) {
    const int n = 40, ku = kl;
    num::BandMatrix b(n, kl, ku);
    for (int i = 0; i < n; ++i)
      for (int j = std::max(0, i - kl); j <= std::min(n - 1, i + ku); ++j) b.at(i, j) = g.complex();
    const CMatrix dense = b.to_dense();
    CVector rhs = CVector::Zero(n);
    for (int i = 0; i < n; ++i) rhs[i] = g.complex();
    num::BandLU lu(b);
    const CVector x = lu.solve(rhs);
    CHECK((dense * x - rhs).norm() < 1e-10 * rhs.norm());

    const auto ld = lu.log_det();
    const auto ref = num::log_det(dense);
    CHECK(ld.log_abs == doctest::Approx(ref.log_abs).epsilon(1e-10));
    CHECK(std::abs(std::remainder(ld.arg - ref.arg, kTwoPi)) < 1e-9);
  }
}
