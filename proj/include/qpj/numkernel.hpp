#pragma once

// Dense and banded complex linear algebra used throughout the toolkit.
// Dense factorizations are backed by Eigen; every function here is a pure
// function of its arguments.

#include <complex>
#include <cstdint>
#include <numbers>
#include <span>
#include <vector>

#include <Eigen/Dense>

namespace qpj {

using cplx = std::complex<double>;
using CMatrix = Eigen::MatrixXcd;
using CVector = Eigen::VectorXcd;

inline constexpr double kTwoPi = 2.0 * std::numbers::pi;
inline constexpr std::uint64_t kDefaultSeed = 0x5EED;

namespace num {

/// Throws DegenerateFrame/InvalidArgument unless every entry is finite.
void require_finite(const CMatrix& m, const char* what);

struct QR {
  CMatrix q;
  CMatrix r;
};

/// Householder QR normalised so that diag(R) is real and strictly positive.
/// Throws DegenerateFrame when some |R_jj| < 1e-14 * ||W||.
QR qr_positive(const CMatrix& w);

/// Eigenvalues with multiplicity, sorted by descending modulus and then by
/// ascending argument. Hessenberg reduction plus shifted QR, capped at
/// 100*n sweeps (EigFailure beyond that).
std::vector<cplx> eig_small(const CMatrix& m);

/// Solves M X = rhs by partially pivoted LU; SingularSystem when M is singular
/// to working precision.
CMatrix solve_dense(const CMatrix& m, const CMatrix& rhs);

/// log|det M| and arg(det M) from an LU factorisation.
struct LogDet {
  double log_abs = 0.0;
  double arg = 0.0;
};
LogDet log_det(const CMatrix& m);

struct ArgPath {
  std::vector<double> args;  // unwrapped, continuous
  double winding = 0.0;      // (last - first) / 2pi
};

/// Default admissible argument step between neighbours. A principal-value
/// difference can never exceed pi, so coarse grids are detected by a
/// conservative threshold below it.
inline constexpr double kMaxArgStep = std::numbers::pi / 2;

/// Unwraps a sequence of principal arguments. GridTooCoarse when some
/// neighbouring step exceeds max_step.
ArgPath unwrap_args(std::span<const double> principal, double max_step = kMaxArgStep);

/// Continuous argument of det along an ordered list of invertible matrices.
ArgPath logdet_arg_path(std::span<const CMatrix> ms, double max_step = kMaxArgStep);

/// Square complex band matrix with kl sub- and ku super-diagonals.
class BandMatrix {
 public:
  BandMatrix(int n, int kl, int ku);

  int size() const { return n_; }
  int lower() const { return kl_; }
  int upper() const { return ku_; }

  /// Entry (i, j); requires -kl <= j - i <= ku.
  cplx& at(int i, int j);
  cplx at(int i, int j) const;

  CMatrix to_dense() const;

 private:
  friend struct BandLU;
  int n_, kl_, ku_, width_;
  std::vector<cplx> data_;  // row-major, width 2*kl+ku+1, offset j - i + kl
};

/// LU with partial pivoting in band storage (fill-in grows the upper band to
/// kl+ku). SingularSystem on an exactly or numerically zero pivot.
struct BandLU {
  explicit BandLU(BandMatrix a);

  CVector solve(const CVector& rhs) const;
  LogDet log_det() const;

 private:
  BandMatrix lu_;
  std::vector<int> pivots_;
  int swaps_ = 0;
};

}  // namespace num
}  // namespace qpj
