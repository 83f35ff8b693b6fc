#include "qpj/numkernel.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "qpj/error.hpp"

namespace qpj::num {

void require_finite(const CMatrix& m, const char* what) {
  for (Eigen::Index i = 0; i < m.size(); ++i) {
    const cplx v = m.data()[i];
    if (!std::isfinite(v.real()) || !std::isfinite(v.imag())) {
      fail(ErrorKind::InvalidArgument, std::string(what) + ": non-finite matrix entry");
    }
  }
}

QR qr_positive(const CMatrix& w) {
  require(w.rows() == w.cols() && w.rows() > 0, ErrorKind::InvalidArgument,
          "qr_positive: matrix must be square and non-empty");
  const Eigen::Index n = w.rows();
  Eigen::HouseholderQR<CMatrix> hqr(w);
  QR out;
  out.q = hqr.householderQ() * CMatrix::Identity(n, n);
  out.r = hqr.matrixQR().triangularView<Eigen::Upper>();

  const double scale = w.norm();
  for (Eigen::Index j = 0; j < n; ++j) {
    const cplx d = out.r(j, j);
    const double mag = std::abs(d);
    if (!(mag >= 1e-14 * scale) || mag == 0.0) {
      fail(ErrorKind::DegenerateFrame, "qr_positive: rank-deficient frame at column " +
                                           std::to_string(j));
    }
    const cplx phase = d / mag;
    out.q.col(j) *= phase;
    out.r.row(j) *= std::conj(phase);
    out.r(j, j) = mag;
  }
  return out;
}

std::vector<cplx> eig_small(const CMatrix& m) {
  require(m.rows() == m.cols(), ErrorKind::InvalidArgument, "eig_small: matrix must be square");
  require(m.rows() <= 4096, ErrorKind::InvalidArgument, "eig_small: dimension above 4096");
  const Eigen::Index n = m.rows();
  if (n == 0) return {};
  Eigen::ComplexEigenSolver<CMatrix> solver;
  solver.setMaxIterations(static_cast<Eigen::Index>(100) * n);
  solver.compute(m, /*computeEigenvectors=*/false);
  if (solver.info() != Eigen::Success) {
    fail(ErrorKind::EigFailure, "eig_small: shifted QR did not converge");
  }
  std::vector<cplx> vals(solver.eigenvalues().data(), solver.eigenvalues().data() + n);
  const double scale = std::max(1.0, m.cwiseAbs().maxCoeff());
  std::sort(vals.begin(), vals.end(), [scale](cplx a, cplx b) {
    const double da = std::abs(a), db = std::abs(b);
    if (std::abs(da - db) > 1e-12 * scale) return da > db;
    return std::arg(a) < std::arg(b);
  });
  return vals;
}

CMatrix solve_dense(const CMatrix& m, const CMatrix& rhs) {
  require(m.rows() == m.cols(), ErrorKind::InvalidArgument, "solve_dense: matrix must be square");
  require(rhs.rows() == m.rows(), ErrorKind::InvalidArgument, "solve_dense: shape mismatch");
  Eigen::PartialPivLU<CMatrix> lu(m);
  const double rc = lu.rcond();
  if (!(rc > 1e-15)) {
    fail(ErrorKind::SingularSystem, "solve_dense: matrix singular to working precision");
  }
  return lu.solve(rhs);
}

LogDet log_det(const CMatrix& m) {
  require(m.rows() == m.cols(), ErrorKind::InvalidArgument, "log_det: matrix must be square");
  Eigen::PartialPivLU<CMatrix> lu(m);
  LogDet out;
  const CMatrix& f = lu.matrixLU();
  for (Eigen::Index i = 0; i < f.rows(); ++i) {
    const double mag = std::abs(f(i, i));
    if (mag == 0.0) fail(ErrorKind::SingularSystem, "log_det: singular matrix");
    out.log_abs += std::log(mag);
    out.arg += std::arg(f(i, i));
  }
  if (lu.permutationP().determinant() < 0) out.arg += std::numbers::pi;
  out.arg = std::remainder(out.arg, kTwoPi);
  return out;
}

ArgPath unwrap_args(std::span<const double> principal, double max_step) {
  ArgPath path;
  path.args.reserve(principal.size());
  for (std::size_t i = 0; i < principal.size(); ++i) {
    if (i == 0) {
      path.args.push_back(principal[0]);
      continue;
    }
    const double step = std::remainder(principal[i] - principal[i - 1], kTwoPi);
    if (std::abs(step) > max_step) {
      fail(ErrorKind::GridTooCoarse,
           "argument jump " + std::to_string(step) + " at sample " + std::to_string(i));
    }
    path.args.push_back(path.args.back() + step);
  }
  if (!path.args.empty()) path.winding = (path.args.back() - path.args.front()) / kTwoPi;
  return path;
}

ArgPath logdet_arg_path(std::span<const CMatrix> ms, double max_step) {
  std::vector<double> principal;
  principal.reserve(ms.size());
  for (const auto& m : ms) principal.push_back(log_det(m).arg);
  return unwrap_args(principal, max_step);
}

// ---------------------------------------------------------------------------

BandMatrix::BandMatrix(int n, int kl, int ku)
    : n_(n), kl_(kl), ku_(ku), width_(2 * kl + ku + 1),
      data_(static_cast<std::size_t>(n) * (2 * kl + ku + 1)) {
  require(n > 0 && kl >= 0 && ku >= 0, ErrorKind::InvalidArgument, "BandMatrix: bad shape");
}

cplx& BandMatrix::at(int i, int j) {
  return data_[static_cast<std::size_t>(i) * width_ + (j - i + kl_)];
}

cplx BandMatrix::at(int i, int j) const {
  const int off = j - i + kl_;
  if (off < 0 || off >= width_) return {};
  return data_[static_cast<std::size_t>(i) * width_ + off];
}

CMatrix BandMatrix::to_dense() const {
  CMatrix d = CMatrix::Zero(n_, n_);
  for (int i = 0; i < n_; ++i) {
    for (int j = std::max(0, i - kl_); j <= std::min(n_ - 1, i + ku_); ++j) d(i, j) = at(i, j);
  }
  return d;
}

BandLU::BandLU(BandMatrix a) : lu_(std::move(a)), pivots_(lu_.n_) {
  const int n = lu_.n_, kl = lu_.kl_, ku_fill = lu_.kl_ + lu_.ku_;
  double scale = 0.0;
  for (const auto& v : lu_.data_) scale = std::max(scale, std::abs(v));
  if (scale == 0.0) fail(ErrorKind::SingularSystem, "BandLU: zero matrix");

  for (int k = 0; k < n; ++k) {
    const int last_row = std::min(n - 1, k + kl);
    int p = k;
    double best = std::abs(lu_.at(k, k));
    for (int i = k + 1; i <= last_row; ++i) {
      const double v = std::abs(lu_.at(i, k));
      if (v > best) {
        best = v;
        p = i;
      }
    }
    if (!(best > 1e-18 * scale)) {
      fail(ErrorKind::SingularSystem, "BandLU: zero pivot at row " + std::to_string(k));
    }
    pivots_[k] = p;
    const int last_col = std::min(n - 1, k + ku_fill);
    if (p != k) {
      ++swaps_;
      for (int j = k; j <= last_col; ++j) std::swap(lu_.at(k, j), lu_.at(p, j));
    }
    const cplx pivot = lu_.at(k, k);
    for (int i = k + 1; i <= last_row; ++i) {
      const cplx factor = lu_.at(i, k) / pivot;
      lu_.at(i, k) = factor;
      if (factor == cplx{}) continue;
      for (int j = k + 1; j <= last_col; ++j) lu_.at(i, j) -= factor * lu_.at(k, j);
    }
  }
}

CVector BandLU::solve(const CVector& rhs) const {
  const int n = lu_.n_, kl = lu_.kl_, ku_fill = lu_.kl_ + lu_.ku_;
  require(rhs.size() == n, ErrorKind::InvalidArgument, "BandLU::solve: size mismatch");
  CVector x = rhs;
  for (int k = 0; k < n; ++k) {
    if (pivots_[k] != k) std::swap(x[k], x[pivots_[k]]);
    const int last_row = std::min(n - 1, k + kl);
    for (int i = k + 1; i <= last_row; ++i) x[i] -= lu_.at(i, k) * x[k];
  }
  for (int k = n - 1; k >= 0; --k) {
    const int last_col = std::min(n - 1, k + ku_fill);
    cplx s = x[k];
    for (int j = k + 1; j <= last_col; ++j) s -= lu_.at(k, j) * x[j];
    x[k] = s / lu_.at(k, k);
  }
  return x;
}

LogDet BandLU::log_det() const {
  LogDet out;
  for (int k = 0; k < lu_.n_; ++k) {
    const cplx d = lu_.at(k, k);
    out.log_abs += std::log(std::abs(d));
    out.arg += std::arg(d);
  }
  if (swaps_ % 2 == 1) out.arg += std::numbers::pi;
  out.arg = std::remainder(out.arg, kTwoPi);
  return out;
}

}  // namespace qpj::num
