#include "qpj/greens.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "qpj/error.hpp"
#include "qpj/jensen.hpp"
#include "qpj/parallel.hpp"

namespace qpj {

namespace {

double wrap(double a) { return std::remainder(a, kTwoPi); }

double frac_part(double x) { return x - std::floor(x); }

// Thin QR of a tall matrix with a positive real diagonal in R.
num::QR thin_qr(const CMatrix& w) {
  Eigen::HouseholderQR<CMatrix> h(w);
  const auto k = w.cols();
  num::QR f;
  f.q = h.householderQ() * CMatrix::Identity(w.rows(), k);
  f.r = h.matrixQR().topRows(k).triangularView<Eigen::Upper>();
  for (Eigen::Index j = 0; j < k; ++j) {
    const cplx rjj = f.r(j, j);
    const double a = std::abs(rjj);
    if (!(a > 1e-14 * w.norm())) fail(ErrorKind::DegenerateFrame, "frame lost rank");
    const cplx ph = rjj / a;
    f.r.row(j) *= std::conj(ph);
    f.q.col(j) *= ph;
  }
  return f;
}

}  // namespace

BandedOperator schrodinger_operator(const TrigPotential& v, double x, double eps, Frequency alpha) {
  BandedOperator op;
  op.a = {cplx{1.0}, cplx{}, cplx{1.0}};
  const double a = alpha.value();
  op.diagonal = [v, x, eps, a](long n) {
    return v.evaluate(x + static_cast<double>(n) * a, eps);
  };
  return op;
}

BandedOperator dual_operator(const TrigPotential& v, double theta, double eps, Frequency alpha) {
  const int d = v.degree();
  require(d >= 1, ErrorKind::ZeroLeadingCoefficient, "dual operator needs a potential of degree >= 1");
  BandedOperator op;
  for (int k = -d; k <= d; ++k) op.a.push_back(v.coeff(k) * std::exp(-kTwoPi * k * eps));
  const double a = alpha.value();
  op.diagonal = [theta, a](long n) {
    return cplx{2.0 * std::cos(kTwoPi * frac_part(theta + static_cast<double>(n) * a))};
  };
  return op;
}

num::BandLU truncated_resolvent(const BandedOperator& op, cplx energy, long lo, long hi) {
  require(hi >= lo, ErrorKind::InvalidArgument, "empty truncation window");
  const int d = op.order();
  const int size = static_cast<int>(hi - lo + 1);
  num::BandMatrix m(size, d, d);
  for (int i = 0; i < size; ++i) {
    for (int k = -d; k <= d; ++k) {
      const int j = i + k;
      if (j < 0 || j >= size) continue;
      m.at(i, j) = op.coeff(k);
    }
    m.at(i, i) += op.diagonal(lo + i) - energy;
  }
  return num::BandLU(std::move(m));
}

CVector truncated_green_column(const BandedOperator& op, cplx energy, long lo, long hi, long q) {
  require(q >= lo && q <= hi, ErrorKind::InvalidArgument, "column outside the truncation window");
  const auto lu = truncated_resolvent(op, energy, lo, hi);
  CVector rhs = CVector::Zero(hi - lo + 1);
  rhs(q - lo) = 1.0;
  return lu.solve(rhs);
}

// ---------------------------------------------------------------------------
// cofactor kernel

CMatrix GreensKernel::phi_matrix(long q) const {
  const int d = op.order();
  require(q - d + 1 >= first && q + d <= last(), ErrorKind::InvalidArgument,
          "Phi(q) needs the sites q-d+1 .. q+d inside the window");
  CMatrix phi(2 * d, 2 * d);
  for (int r = 0; r < 2 * d; ++r) {
    const long site = q + d - r;
    for (int i = 0; i < 2 * d; ++i) phi(r, i) = solutions[i].values[site - first];
  }
  return phi;
}

namespace {

// Column 0 of Phi(q)^{-1}, i.e. the first-row cofactors over det Phi(q).
CVector cofactor_weights(const GreensKernel& k, long q) {
  const CMatrix phi = k.phi_matrix(q);
  double log_cols = 0.0;
  for (int i = 0; i < phi.cols(); ++i) log_cols += std::log(phi.col(i).norm());
  num::LogDet ld{-std::numeric_limits<double>::infinity(), 0.0};
  try {
    ld = num::log_det(phi);
  } catch (const Error& e) {
    if (e.kind() != ErrorKind::SingularSystem) throw;
  }
  if (!std::isfinite(ld.log_abs) || ld.log_abs - log_cols < std::log(kWronskianTol)) {
    fail(ErrorKind::SingularWronskian,
         "det Phi(" + std::to_string(q) + ") is negligible against its column norms");
  }
  CVector e0 = CVector::Zero(phi.rows());
  e0(0) = 1.0;
  return num::solve_dense(phi, e0);
}

cplx kernel_entry(const GreensKernel& k, const CVector& w, long p, long q) {
  const int d = k.op.order();
  cplx s{};
  if (p >= q + 1) {
    for (int i = 0; i < k.plus_count; ++i) s += k.solutions[i].values[p - k.first] * w(i);
    return s / k.op.coeff(d);
  }
  for (int i = k.plus_count; i < 2 * d; ++i) s += k.solutions[i].values[p - k.first] * w(i);
  return -s / k.op.coeff(d);
}

}  // namespace

cplx GreensKernel::value(long p, long q) const {
  require(p >= first && p <= last(), ErrorKind::InvalidArgument, "p outside the window");
  return kernel_entry(*this, cofactor_weights(*this, q), p, q);
}

double GreensKernel::defining_residual(long q) const {
  const int d = op.order();
  const CVector w = cofactor_weights(*this, q);
  std::vector<cplx> col(static_cast<std::size_t>(length));
  double gmax = 0.0;
  for (long n = first; n <= last(); ++n) {
    col[n - first] = kernel_entry(*this, w, n, q);
    gmax = std::max(gmax, std::abs(col[n - first]));
  }
  double worst = 0.0;
  for (long n = first + d; n <= last() - d; ++n) {
    cplx s = (op.diagonal(n) - energy) * col[n - first];
    for (int k = -d; k <= d; ++k) s += op.coeff(k) * col[n + k - first];
    if (n == q) s -= 1.0;
    worst = std::max(worst, std::abs(s));
  }
  return worst / std::max(gmax, std::numeric_limits<double>::min());
}

GreensKernel greens_kernel(const BandedOperator& op, cplx energy, long first,
                           std::vector<TaggedSolution> solutions) {
  const int d = op.order();
  require(d >= 1 && op.a.size() == static_cast<std::size_t>(2 * d + 1), ErrorKind::InvalidArgument,
          "operator needs coefficients a_{-d..d}");
  require(op.coeff(d) != cplx{}, ErrorKind::ZeroLeadingCoefficient, "a_d vanishes");
  require(solutions.size() == static_cast<std::size_t>(2 * d), ErrorKind::WrongDecayCount,
          "need exactly 2d solutions, got " + std::to_string(solutions.size()));
  const long length = static_cast<long>(solutions.front().values.size());
  require(length >= 4 * d + 8, ErrorKind::InvalidArgument, "window too short");
  for (const auto& s : solutions) {
    require(static_cast<long>(s.values.size()) == length, ErrorKind::InvalidArgument,
            "solutions must share one window");
    require(s.tag == 1 || s.tag == -1, ErrorKind::InvalidArgument, "decay tag must be +1 or -1");
  }
  std::stable_partition(solutions.begin(), solutions.end(),
                        [](const TaggedSolution& s) { return s.tag > 0; });

  GreensKernel k;
  k.op = op;
  k.energy = energy;
  k.first = first;
  k.length = length;
  k.plus_count = static_cast<int>(
      std::count_if(solutions.begin(), solutions.end(), [](const auto& s) { return s.tag > 0; }));
  k.solutions = std::move(solutions);

  for (const auto& s : k.solutions) {
    for (long n = first + d; n <= k.last() - d; ++n) {
      cplx r = (op.diagonal(n) - energy) * s.values[n - first];
      double scale = std::abs(op.diagonal(n) - energy) * std::abs(s.values[n - first]);
      for (int j = -d; j <= d; ++j) {
        r += op.coeff(j) * s.values[n + j - first];
        scale += std::abs(op.coeff(j)) * std::abs(s.values[n + j - first]);
      }
      if (scale > 0.0) k.equation_residual = std::max(k.equation_residual, std::abs(r) / scale);
    }
  }
  require(k.equation_residual < kEquationTol, ErrorKind::InvalidArgument,
          "a solution misses the eigenequation by " + std::to_string(k.equation_residual));

  const long b = std::min<long>(20, length / 4);
  auto block = [&](const TaggedSolution& s, long from) {
    double acc = 0.0;
    for (long i = from; i < from + b; ++i) acc += std::norm(s.values[i]);
    return acc;
  };
  for (std::size_t i = 0; i < k.solutions.size(); ++i) {
    const auto& s = k.solutions[i];
    const bool ok = s.tag > 0 ? block(s, length - b) < block(s, length - 2 * b)
                              : block(s, 0) < block(s, b);
    if (!ok) {
      fail(ErrorKind::WrongDecayCount, "solution " + std::to_string(i) + " tagged " +
                                           (s.tag > 0 ? "+" : "-") + " does not decay");
    }
  }
  return k;
}

std::vector<TaggedSolution> cocycle_solutions(const CocycleSpec& c, int d, double theta, long lo,
                                              long hi) {
  require(c.dim == 2 * d, ErrorKind::InvalidArgument, "cocycle dimension must be 2d");
  require(hi > lo, ErrorKind::InvalidArgument, "empty solution window");
  const long first = lo - d;
  const long length = hi - lo + 2 * d;
  const long mid = lo + (hi - lo) / 2;
  const double a = c.alpha;
  auto phase = [&](long n) { return frac_part(theta + static_cast<double>(n) * a); };
  const auto span = static_cast<std::size_t>(hi - lo + 1);

  // Orthonormal frames Q_n of the invariant subspace at every site, chained by
  // triangular factors. The solutions are X_n = Q_n T_n with T_mid = I, so
  // columns never collapse onto the dominant direction.
  std::vector<CMatrix> q(span), r(span);
  auto at = [&](long n) -> std::size_t { return static_cast<std::size_t>(n - lo); };

  std::vector<TaggedSolution> out(2 * d);
  for (auto& s : out) s.values.assign(static_cast<std::size_t>(length), cplx{});
  auto store = [&](long n, const CMatrix& x, int offset) {
    for (int i = 0; i < d; ++i) {
      for (int j = 0; j < 2 * d; ++j) out[offset + i].values[n + d - 1 - j - first] = x(j, i);
    }
  };

  // plus-tagged: the contracting subspace, built backwards from site hi;
  // A_n^{-1} Q_{n+1} = Q_n R_n
  q[at(hi)] = thin_qr(invariant_frames(c, d, phase(hi), 64, 1e-12).slow).q;
  for (long n = hi - 1; n >= lo; --n) {
    const auto f = thin_qr(num::solve_dense(c.at(phase(n)), q[at(n + 1)]));
    q[at(n)] = f.q;
    r[at(n)] = f.r;
  }
  {
    CMatrix t = CMatrix::Identity(d, d);
    store(mid, q[at(mid)], 0);
    for (long n = mid - 1; n >= lo; --n) {
      t = r[at(n)] * t;
      store(n, q[at(n)] * t, 0);
    }
    t.setIdentity();
    for (long n = mid; n < hi; ++n) {
      t = r[at(n)].triangularView<Eigen::Upper>().solve(t);
      store(n + 1, q[at(n + 1)] * t, 0);
    }
  }

  // minus-tagged: the expanding subspace, built forwards from site lo;
  // A_n Q_n = Q_{n+1} R_n
  q[at(lo)] = thin_qr(invariant_frames(c, d, phase(lo), 64, 1e-12).fast).q;
  for (long n = lo; n < hi; ++n) {
    const auto f = thin_qr(c.at(phase(n)) * q[at(n)]);
    q[at(n + 1)] = f.q;
    r[at(n)] = f.r;
  }
  {
    CMatrix t = CMatrix::Identity(d, d);
    store(mid, q[at(mid)], d);
    for (long n = mid; n < hi; ++n) {
      t = r[at(n)] * t;
      store(n + 1, q[at(n + 1)] * t, d);
    }
    t.setIdentity();
    for (long n = mid - 1; n >= lo; --n) {
      t = r[at(n)].triangularView<Eigen::Upper>().solve(t);
      store(n, q[at(n)] * t, d);
    }
  }
  for (int i = 0; i < 2 * d; ++i) out[i].tag = i < d ? +1 : -1;
  for (auto& s : out) {
    for (const auto& z : s.values) {
      require(std::isfinite(z.real()) && std::isfinite(z.imag()), ErrorKind::DegenerateFrame,
              "solution overflowed; shrink the window");
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// scalar m-functions

void require_hyperbolic(const CocycleSpec& c, int k, const GreensParams& p) {
  const auto thetas = phase_grid(p.domination_samples, p.seed);
  try {
    const auto split = domination_check(c, k, p.domination_n, thetas);
    if (split.dominated) return;
    fail(ErrorKind::NotUniformlyHyperbolic,
         c.name + ": no dominated splitting at k=" + std::to_string(k) +
             " (gap " + std::to_string(split.gap_estimate) + ")");
  } catch (const Error& e) {
    if (e.kind() != ErrorKind::InconclusiveDomination) throw;
    fail(ErrorKind::NotUniformlyHyperbolic, std::string(c.name) + ": " + e.what());
  }
}

namespace {

struct MPair {
  cplx m_plus, m_minus, u_plus_1, u_minus_m1;
};

MPair scalar_m(const CocycleSpec& c, const TrigPotential& v, double x, double eps, cplx energy,
               const GreensParams& p) {
  const auto f = invariant_frames(c, 1, frac_part(x), p.frame_n, p.frame_tol);
  const cplx s_top = f.slow(0, 0), s_bot = f.slow(1, 0);
  const cplx e_top = f.fast(0, 0), e_bot = f.fast(1, 0);
  if (std::abs(s_top) < 1e-14 * f.slow.norm() || std::abs(e_top) < 1e-14 * f.fast.norm()) {
    fail(ErrorKind::BlockNotInvertible, "invariant direction with vanishing u(0)");
  }
  MPair m;
  m.u_plus_1 = (energy - v.evaluate(x, eps)) - s_bot / s_top;
  m.u_minus_m1 = e_bot / e_top;
  m.m_plus = -m.u_plus_1;
  m.m_minus = -m.u_minus_m1;
  return m;
}

}  // namespace

ScalarGreens scalar_greens(const TrigPotential& v, double x, double eps, cplx energy,
                           const GreensParams& p) {
  const auto c = schrodinger_cocycle(v, energy, eps, p.alpha);
  if (p.check_hyperbolicity) require_hyperbolic(c, 1, p);
  const auto m = scalar_m(c, v, x, eps, energy, p);

  ScalarGreens out;
  out.x = x;
  out.eps = eps;
  out.energy = energy;
  out.u_plus_1 = m.u_plus_1;
  out.u_minus_m1 = m.u_minus_m1;
  out.m_plus = m.m_plus;
  out.m_minus = m.m_minus;
  const cplx ev = energy - v.evaluate(x, eps);
  out.g = -1.0 / (m.m_plus + m.m_minus + ev);
  out.ricatti_residual = std::numeric_limits<double>::quiet_NaN();
  if (p.ricatti) {
    const double a = p.alpha.value();
    const auto prev = scalar_m(c, v, x - a, eps, energy, p);
    const auto next = scalar_m(c, v, x + a, eps, energy, p);
    // m_+(x) + 1/m_+(x - alpha) + E - V(x) = 0, m_-(x) + 1/m_-(x + alpha) + E - V(x) = 0
    auto rel = [&](cplx m0, cplx m1) {
      return std::abs(m0 + 1.0 / m1 + ev) / (std::abs(m0) + std::abs(1.0 / m1) + std::abs(ev));
    };
    out.ricatti_residual = std::max(rel(m.m_plus, prev.m_plus), rel(m.m_minus, next.m_minus));
  }
  return out;
}

cplx averaged_scalar_green(const TrigPotential& v, double eps, cplx energy, int phase_count,
                           const GreensParams& p) {
  require(phase_count >= 1, ErrorKind::InvalidArgument, "phase_count must be positive");
  const auto c = schrodinger_cocycle(v, energy, eps, p.alpha);
  if (p.check_hyperbolicity) require_hyperbolic(c, 1, p);
  GreensParams q = p;
  q.check_hyperbolicity = false;
  q.ricatti = false;
  const auto xs = phase_grid(phase_count, p.seed);
  std::vector<cplx> g(xs.size());
  parallel_for(xs.size(), [&](std::size_t i) {
    const auto m = scalar_m(c, v, xs[i], eps, energy, q);
    g[i] = -1.0 / (m.m_plus + m.m_minus + energy - v.evaluate(xs[i], eps));
  });
  cplx sum{};
  for (const auto& z : g) sum += z;
  return sum / static_cast<double>(g.size());
}

// ---------------------------------------------------------------------------
// strip M-matrices

double StripGreens::max_residual() const {
  return std::max({rce, rce2, green_matrix, green_alternate, g3});
}

namespace {

CMatrix inverse_or_block_error(const CMatrix& m, const char* what) {
  try {
    return num::solve_dense(m, CMatrix::Identity(m.rows(), m.cols()));
  } catch (const Error& e) {
    if (e.kind() != ErrorKind::SingularSystem) throw;
    fail(ErrorKind::BlockNotInvertible, std::string(what) + " is singular");
  }
}

struct StripFrames {
  CMatrix m_plus, m_minus;
  long n = 0;
};

StripFrames strip_frames(const DualCocycle& dc, const CocycleSpec& s, double theta,
                         const GreensParams& p) {
  const int d = dc.d;
  const auto f = invariant_frames(s, d, frac_part(theta), p.frame_n, p.frame_tol);
  StripFrames out;
  out.n = f.n_used;
  // contracting frame propagated once: (u_1; u_0) blocks, M_+ = -u_1 u_0^{-1}
  const CMatrix as = dc.strip(theta) * f.slow;
  out.m_plus = -as.topRows(d) * inverse_or_block_error(as.bottomRows(d), "stable frame block");
  // expanding frame at theta: (u_0; u_{-1}), M_- = -u_{-1} u_0^{-1}
  out.m_minus = -f.fast.bottomRows(d) * inverse_or_block_error(f.fast.topRows(d), "unstable frame block");
  return out;
}

}  // namespace

StripGreens strip_greens(const TrigPotential& v, cplx energy, double theta, const StripParams& p) {
  const auto dc = build_dual(v, energy, 0.0, p.greens.alpha);
  const int d = dc.d;
  CocycleSpec s;
  s.alpha = frac_part(d * dc.alpha);
  s.dim = 2 * d;
  s.name = "dual strip";
  s.generator = [dc](double th) { return dc.strip(th); };
  if (energy.imag() <= 0.0) require_hyperbolic(s, d, p.greens);

  const double t = s.alpha;
  const auto prev = strip_frames(dc, s, theta - t, p.greens);
  const auto here = strip_frames(dc, s, theta, p.greens);
  const auto next = strip_frames(dc, s, theta + t, p.greens);

  const CMatrix id = CMatrix::Identity(d, d);
  const CMatrix& c = dc.c;
  const CMatrix& lower = dc.lower;
  auto green = [&](const StripFrames& f, double th) {
    return inverse_or_block_error(-c * f.m_plus - lower * f.m_minus + dc.b(th) - energy * id,
                                  "Green's matrix denominator");
  };

  StripGreens out;
  out.theta = theta;
  out.energy = energy;
  out.m_plus = here.m_plus;
  out.m_minus = here.m_minus;
  out.m_plus_prev = prev.m_plus;
  out.m_minus_next = next.m_minus;
  out.g = green(here, theta);
  out.g_next = green(next, theta + t);
  out.frame_n = std::max({prev.n, here.n, next.n});

  const CMatrix e_minus_b = energy * id - dc.b(theta);
  const CMatrix mp_prev_inv = inverse_or_block_error(prev.m_plus, "M_+(T^-1 theta)");
  const CMatrix mm_next_inv = inverse_or_block_error(next.m_minus, "M_-(T theta)");
  {
    const CMatrix t1 = c * here.m_plus, t2 = lower * mp_prev_inv;
    out.rce = (t1 + t2 + e_minus_b).norm() / (t1.norm() + t2.norm() + e_minus_b.norm());
  }
  {
    const CMatrix t1 = lower * here.m_minus, t2 = c * mm_next_inv;
    out.rce2 = (t1 + t2 + e_minus_b).norm() / (t1.norm() + t2.norm() + e_minus_b.norm());
  }
  {
    const CMatrix g1 = inverse_or_block_error(-c * here.m_plus + c * mm_next_inv, "one-sided form");
    const CMatrix mp_inv = inverse_or_block_error(here.m_plus, "M_+(theta)");
    const CMatrix g2 = inverse_or_block_error(lower * mp_inv - lower * next.m_minus, "one-sided form");
    out.green_alternate = std::max((g1 - out.g).norm() / out.g.norm(),
                                   (g2 - out.g_next).norm() / out.g_next.norm());
  }
  {
    const CMatrix lhs = out.g * c * mm_next_inv;
    const CMatrix rhs = next.m_minus * out.g_next * lower + id;
    out.g3 = (lhs - rhs).norm() / (lhs.norm() + 1.0);
  }

  // block 0 holds the sites d-1, ..., 0
  const long w = p.dense_half_width;
  const auto op = dual_operator(v, theta, 0.0, p.greens.alpha);
  const auto lu = truncated_resolvent(op, energy, -w, w);
  out.g_dense = CMatrix(d, d);
  for (int col = 0; col < d; ++col) {
    CVector rhs = CVector::Zero(2 * w + 1);
    rhs(d - 1 - col + w) = 1.0;
    const CVector x = lu.solve(rhs);
    for (int row = 0; row < d; ++row) out.g_dense(row, col) = x(d - 1 - row + w);
  }
  out.green_matrix = (out.g - out.g_dense).norm() / out.g_dense.norm();
  return out;
}

StripTrace strip_trace_average(const TrigPotential& v, cplx energy, int phase_count,
                               const StripParams& p) {
  require(phase_count >= 1, ErrorKind::InvalidArgument, "phase_count must be positive");
  const auto thetas = phase_grid(phase_count, p.greens.seed);
  std::vector<cplx> dyn(thetas.size()), dense(thetas.size());
  parallel_for(thetas.size(), [&](std::size_t i) {
    const auto sg = strip_greens(v, energy, thetas[i], p);
    dyn[i] = sg.g.trace();
    dense[i] = sg.g_dense.trace();
  });
  StripTrace out;
  for (std::size_t i = 0; i < thetas.size(); ++i) {
    out.dynamical += dyn[i];
    out.dense += dense[i];
  }
  out.dynamical /= static_cast<double>(thetas.size());
  out.dense /= static_cast<double>(thetas.size());
  out.difference = std::abs(out.dynamical - out.dense);
  return out;
}

// ---------------------------------------------------------------------------
// duality of averaged Green's functions

namespace {

cplx averaged_center(const std::function<BandedOperator(double)>& make, cplx energy, long n,
                     const std::vector<double>& phases) {
  std::vector<cplx> vals(phases.size());
  parallel_for(phases.size(), [&](std::size_t i) {
    vals[i] = truncated_green_column(make(phases[i]), energy, -n, n, 0)(n);
  });
  cplx sum{};
  for (const auto& z : vals) sum += z;
  return sum / static_cast<double>(vals.size());
}

}  // namespace

DualityReport duality_residual(const TrigPotential& v, cplx energy, double eps, long n,
                               int phase_count, Frequency alpha) {
  require(n >= 1 && phase_count >= 1, ErrorKind::InvalidArgument, "need N >= 1 and phase_count >= 1");
  require(v.degree() >= 1, ErrorKind::ZeroLeadingCoefficient,
          "the dual of a constant potential is undefined");
  build_dual(v, energy, eps, alpha);  // validates V_{+-d}

  const auto phases = phase_grid(phase_count, kDefaultSeed);
  auto schr = [&](double x) { return schrodinger_operator(v, x, eps, alpha); };
  auto dual = [&](double th) { return dual_operator(v, th, eps, alpha); };

  DualityReport r;
  r.n = n;
  r.lhs = averaged_center(schr, energy, n, phases);
  r.rhs = averaged_center(dual, energy, n, phases);
  r.lhs_doubled = averaged_center(schr, energy, 2 * n, phases);
  r.rhs_doubled = averaged_center(dual, energy, 2 * n, phases);
  r.difference = std::abs(r.lhs - r.rhs);
  r.difference_doubled = std::abs(r.lhs_doubled - r.rhs_doubled);

  const double allowed = std::max(10.0 * r.difference, kTruncationFloor);
  const double moved = std::max(std::abs(r.lhs_doubled - r.lhs), std::abs(r.rhs_doubled - r.rhs));
  if (moved > allowed) {
    fail(ErrorKind::TruncationUnstable,
         "doubling N moved an averaged Green's value by " + std::to_string(moved));
  }
  return r;
}

// ---------------------------------------------------------------------------
// Johnson-Moser

JohnsonMoser johnson_moser_residual(const TrigPotential& v, cplx energy, double eps,
                                    const JohnsonMoserParams& p) {
  require(p.delta > 0.0, ErrorKind::InvalidArgument, "delta must be positive");
  const cplx up = energy + cplx{0.0, p.delta}, down = energy - cplx{0.0, p.delta};
  if (p.greens.check_hyperbolicity) {
    require_hyperbolic(schrodinger_cocycle(v, up, eps, p.greens.alpha), 1, p.greens);
    require_hyperbolic(schrodinger_cocycle(v, down, eps, p.greens.alpha), 1, p.greens);
  }
  JensenParams jp;
  jp.le = p.le;
  jp.dual.alpha = p.greens.alpha;
  const double l_up = complexified_exponent(v, up, eps, jp).value;
  const double l_down = complexified_exponent(v, down, eps, jp).value;

  JohnsonMoser out;
  out.derivative = (l_up - l_down) / (2.0 * p.delta);
  out.green_term = averaged_scalar_green(v, eps, energy, p.phase_count, p.greens).imag();
  out.residual = std::abs(out.derivative - out.green_term);
  return out;
}

// ---------------------------------------------------------------------------
// winding

num::LogDet dirichlet_determinant(const TrigPotential& v, cplx energy, double theta, double eps,
                                  long n, Frequency alpha) {
  require(n >= 1, ErrorKind::InvalidArgument, "box size must be positive");
  const double a = alpha.value();
  num::LogDet out;
  cplx r{};
  for (long k = 1; k <= n; ++k) {
    const cplx diag = v.evaluate(theta + static_cast<double>(k) * a, eps) - energy;
    r = (k == 1) ? diag : diag - 1.0 / r;
    if (r == cplx{} || !std::isfinite(std::abs(r))) {
      fail(ErrorKind::SingularSystem, "E_B is an eigenvalue of the truncated operator");
    }
    out.log_abs += std::log(std::abs(r));
    out.arg = wrap(out.arg + std::arg(r));
  }
  return out;
}

WindingResult winding_number(const TrigPotential& v, cplx base_energy, double eps, long n,
                             const WindingParams& p) {
  require(n >= 1, ErrorKind::InvalidArgument, "box size must be positive");
  const int d = std::max(1, v.degree());
  const long steps = p.theta_steps > 0 ? p.theta_steps : std::max<long>(512, 16L * d * n);
  require(steps >= 512, ErrorKind::GridTooCoarse, "winding needs at least 512 theta steps");

  WindingResult out;
  out.base_energy = base_energy;
  out.eps = eps;
  out.eps_used = eps + kWindingOffset;
  out.n = n;

  auto arg_at = [&](double th) {
    return dirichlet_determinant(v, base_energy, th, out.eps_used, n, p.alpha).arg;
  };
  std::vector<double> coarse(static_cast<std::size_t>(steps + 1));
  parallel_for(coarse.size(), [&](std::size_t j) {
    coarse[j] = arg_at(static_cast<double>(j) / static_cast<double>(steps));
  });

  constexpr double kRefineStep = std::numbers::pi / 4;
  std::vector<double> args;
  args.reserve(coarse.size());
  // appends the interior refinement of (ta, tb] ending with arg b
  auto refine = [&](auto&& self, double ta, double a, double tb, double b, int depth) -> void {
    if (std::abs(wrap(b - a)) <= kRefineStep) {
      args.push_back(b);
      return;
    }
    if (depth >= p.max_refine) {
      fail(ErrorKind::GridTooCoarse, "argument of det keeps jumping near theta=" + std::to_string(ta));
    }
    const double tm = 0.5 * (ta + tb);
    const double m = arg_at(tm);
    self(self, ta, a, tm, m, depth + 1);
    self(self, tm, m, tb, b, depth + 1);
  };
  args.push_back(coarse[0]);
  for (long j = 0; j < steps; ++j) {
    refine(refine, static_cast<double>(j) / steps, coarse[j], static_cast<double>(j + 1) / steps,
           coarse[j + 1], 0);
  }
  const auto path = num::unwrap_args(args);
  out.samples = static_cast<long>(args.size());
  out.nu = path.winding / static_cast<double>(n);
  out.snapped = static_cast<int>(std::lround(out.nu));
  out.near_integer = std::abs(out.nu - out.snapped) < 0.1;
  out.slope_match = true;
  if (p.strict && !out.near_integer) {
    fail(ErrorKind::SnapFailure, "winding per site " + std::to_string(out.nu) + " is not near an integer");
  }

  if (p.cross_check) {
    JensenParams jp;
    jp.le = p.le;
    jp.dual.alpha = p.alpha;
    const double h = p.slope_step;
    const double up = complexified_exponent(v, base_energy, out.eps_used + h, jp).value;
    const double down = complexified_exponent(v, base_energy, out.eps_used - h, jp).value;
    out.slope_nu = -(up - down) / (2.0 * h) / kTwoPi;
    out.slope_match = std::abs(*out.slope_nu - out.snapped) <= 0.25;
    if (p.strict && !out.slope_match) {
      fail(ErrorKind::WindingSlopeMismatch,
           "winding " + std::to_string(out.snapped) + " but -slope/2pi = " + std::to_string(*out.slope_nu));
    }
  }
  return out;
}

}  // namespace qpj
