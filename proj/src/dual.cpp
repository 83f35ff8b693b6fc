#include "qpj/dual.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "qpj/error.hpp"

namespace qpj {

cplx DualCocycle::weighted(int k) const { return v.coeff(k) * std::exp(-kTwoPi * k * eps); }

CMatrix DualCocycle::b(double theta) const {
  CMatrix m(d, d);
  for (int i = 0; i < d; ++i) {
    for (int j = 0; j < d; ++j) m(i, j) = weighted(i - j);
    // row i is the equation at site d-1-i
    m(i, i) += 2.0 * std::cos(kTwoPi * (theta + (d - 1 - i) * alpha));
  }
  return m;
}

CMatrix DualCocycle::strip(double theta) const {
  const CMatrix e_minus_b = energy * CMatrix::Identity(d, d) - b(theta);
  CMatrix a = CMatrix::Zero(2 * d, 2 * d);
  // C is upper triangular with a nonzero diagonal
  const auto tri = c.triangularView<Eigen::Upper>();
  a.topLeftCorner(d, d) = tri.solve(e_minus_b);
  a.topRightCorner(d, d) = -tri.solve(lower);
  a.bottomLeftCorner(d, d).setIdentity();
  return a;
}

CocycleSpec DualCocycle::cocycle() const {
  CocycleSpec s;
  s.alpha = alpha;
  s.dim = 2 * d;
  s.name = "dual";
  s.companion = form;
  s.generator = [f = form](double theta) { return f.at(theta); };
  return s;
}

DualCocycle build_dual(const TrigPotential& v, cplx energy, double eps, Frequency alpha) {
  const int d = v.degree();
  require(d >= 1, ErrorKind::ZeroLeadingCoefficient, "dual operator needs a potential of degree >= 1");
  const double scale = v.max_abs();
  require(std::abs(v.coeff(d)) > kTrimThreshold * scale, ErrorKind::ZeroLeadingCoefficient,
          "leading coefficient V_d vanishes");
  require(std::abs(v.coeff(-d)) > kTrimThreshold * scale, ErrorKind::ZeroLeadingCoefficient,
          "coefficient V_{-d} vanishes; the dual cocycle would be singular");

  DualCocycle dc;
  dc.v = v;
  dc.energy = energy;
  dc.eps = eps;
  dc.alpha = alpha.value();
  dc.d = d;

  dc.c = CMatrix::Zero(d, d);
  dc.lower = CMatrix::Zero(d, d);
  for (int i = 0; i < d; ++i) {
    for (int j = 0; j < d; ++j) {
      dc.c(i, j) = dc.weighted(d + i - j);
      dc.lower(i, j) = dc.weighted(i - j - d);
    }
  }
  dc.omega = CMatrix::Zero(2 * d, 2 * d);
  dc.omega.topRightCorner(d, d) = -dc.c.adjoint();
  dc.omega.bottomLeftCorner(d, d) = dc.c;

  // first row of the single step: u_{n+d} from the equation at site n
  const cplx vd = dc.weighted(d);
  kern::CompanionForm& f = dc.form;
  f.dim = 2 * d;
  f.pivot = d - 1;
  f.row.assign(2 * d, cplx{});
  for (int j = 0; j < 2 * d; ++j) {
    const int k = d - 1 - j;
    f.row[j] = (k == 0) ? (energy - dc.weighted(0)) / vd : -dc.weighted(k) / vd;
  }
  f.kmin = -1;
  f.fourier = {-1.0 / vd, cplx{}, -1.0 / vd};
  return dc;
}

double symplectic_residual(const DualCocycle& dc, const std::vector<double>& thetas) {
  double worst = 0.0;
  const double on = dc.omega.norm();
  for (double th : thetas) {
    const CMatrix a = dc.strip(th);
    const CMatrix r = a.adjoint() * dc.omega * a - dc.omega;
    worst = std::max(worst, r.norm() / (a.squaredNorm() * on));
  }
  return worst;
}

std::vector<ExponentGroup> group_exponents(const std::vector<double>& asc, double tol) {
  std::vector<ExponentGroup> out;
  std::size_t i = 0;
  while (i < asc.size()) {
    std::size_t j = i + 1;
    while (j < asc.size() && asc[j] - asc[j - 1] < tol) ++j;
    ExponentGroup g;
    g.multiplicity = static_cast<int>(j - i);
    g.value = std::accumulate(asc.begin() + i, asc.begin() + j, 0.0) / g.multiplicity;
    g.k = static_cast<int>(j);
    out.push_back(g);
    i = j;
  }
  return out;
}

DualSpectrum dual_spectrum(const TrigPotential& v, cplx energy, const DualParams& p) {
  const auto dc = build_dual(v, energy, 0.0, p.alpha);
  const int d = dc.d;
  const auto le = lyapunov_spectrum(dc.cocycle(), p.le);

  DualSpectrum out;
  out.raw = le.exponents;
  out.raw_err = le.std_err;
  out.real_energy = energy.imag() == 0.0 && v.is_real();

  std::vector<std::pair<double, double>> vals;  // (lhat, stderr)
  if (out.real_energy) {
    for (int i = 0; i < d; ++i) {
      const int j = 2 * d - 1 - i;
      const double defect = std::abs(le.exponents[i] + le.exponents[j]);
      const double err = std::max(le.std_err[i], le.std_err[j]);
      out.pairing_defect = std::max(out.pairing_defect, defect);
      if (defect > std::max(5e-3 * kTwoPi, 3.0 * err)) {
        fail(ErrorKind::PairingViolation,
             "dual exponents " + std::to_string(le.exponents[i]) + " and " +
                 std::to_string(le.exponents[j]) + " do not pair");
      }
      vals.emplace_back(0.5 * (std::abs(le.exponents[i]) + std::abs(le.exponents[j])), err);
    }
  } else {
    for (int i = 0; i < d; ++i) vals.emplace_back(le.exponents[i], le.std_err[i]);
  }
  std::sort(vals.begin(), vals.end());

  double max_err = 0.0;
  for (const auto& [l, e] : vals) {
    out.lhat.push_back(l);
    out.gamma.push_back(l / kTwoPi);
    out.std_err.push_back(e);
    max_err = std::max(max_err, e);
  }
  out.group_tol = p.group_tol.value_or(std::max(1e-3, 3.0 * max_err));
  out.groups = group_exponents(out.lhat, out.group_tol);
  return out;
}

double rescaling_residual(const TrigPotential& v, cplx energy, double eps,
                          const std::vector<double>& thetas, Frequency alpha) {
  const auto plain = build_dual(v, energy, 0.0, alpha);
  const auto weighted = build_dual(v, energy, eps, alpha);
  const int d = plain.d;
  Eigen::VectorXd dg(2 * d), dinv(2 * d);
  for (int j = 0; j < 2 * d; ++j) {
    dg[j] = std::exp(kTwoPi * (j - d) * eps);
    dinv[j] = 1.0 / dg[j];
  }
  const double pre = std::exp(kTwoPi * eps);
  double worst = 0.0;
  for (double th : thetas) {
    const CMatrix aw = weighted.step(th);
    const CMatrix conj = pre * (dinv.asDiagonal() * plain.step(th) * dg.asDiagonal());
    worst = std::max(worst, (aw - conj).norm() / aw.norm());
  }
  return worst;
}

ShiftReport shifted_spectrum_check(const TrigPotential& v, cplx energy, double eps,
                                   const DualParams& p) {
  const auto plain = lyapunov_spectrum(build_dual(v, energy, 0.0, p.alpha).cocycle(), p.le);
  const auto shifted = lyapunov_spectrum(build_dual(v, energy, eps, p.alpha).cocycle(), p.le);
  ShiftReport r;
  for (std::size_t i = 0; i < plain.exponents.size(); ++i) {
    r.shifted.push_back(shifted.exponents[i] / kTwoPi);
    r.expected.push_back(plain.exponents[i] / kTwoPi + eps);
    r.max_deviation = std::max(r.max_deviation, std::abs(r.shifted.back() - r.expected.back()));
  }
  return r;
}

std::vector<DualLimitRow> dual_limit_table(const AnalyticPotential& vseq, cplx energy,
                                           const std::vector<int>& d_list, const DualParams& p) {
  require(!d_list.empty(), ErrorKind::InvalidArgument, "dual_limit_table: empty degree list");
  for (std::size_t i = 1; i < d_list.size(); ++i) {
    require(d_list[i] > d_list[i - 1], ErrorKind::InvalidArgument,
            "dual_limit_table: degrees must increase");
  }
  std::vector<DualLimitRow> rows;
  for (int d : d_list) {
    const auto spec = dual_spectrum(vseq.at_degree(d), energy, p);
    DualLimitRow row;
    row.d = d;
    row.lhat = spec.lhat;
    row.group_count = static_cast<int>(spec.groups.size());
    if (!rows.empty()) {
      const auto& prev = rows.back().lhat;
      for (std::size_t i = 0; i < std::min(prev.size(), row.lhat.size()); ++i) {
        row.cauchy.push_back(std::abs(row.lhat[i] - prev[i]));
      }
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

}  // namespace qpj
