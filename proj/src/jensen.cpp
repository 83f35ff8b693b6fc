#include "qpj/jensen.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include <Eigen/Eigenvalues>

#include "qpj/error.hpp"

namespace qpj {

namespace {

bool is_real_energy(const TrigPotential& v, cplx e) { return e.imag() == 0.0 && v.is_real(); }

struct LineFit {
  double slope = 0.0, intercept = 0.0, residual = 0.0;
};

LineFit fit_line(const std::vector<double>& x, const std::vector<double>& y, int lo, int hi) {
  const int n = hi - lo + 1;
  double mx = 0, my = 0;
  for (int i = lo; i <= hi; ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= n;
  my /= n;
  double sxx = 0, sxy = 0;
  for (int i = lo; i <= hi; ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
  }
  LineFit f;
  f.slope = sxx > 0 ? sxy / sxx : 0.0;
  f.intercept = my - f.slope * mx;
  for (int i = lo; i <= hi; ++i) {
    f.residual = std::max(f.residual, std::abs(y[i] - (f.slope * x[i] + f.intercept)));
  }
  return f;
}

// intercept and residual for a fixed (snapped) slope
void refit_snapped(const std::vector<double>& x, const std::vector<double>& y, Segment& s) {
  const double k = kTwoPi * s.slope;
  double b = 0.0;
  for (int i = s.first; i <= s.last; ++i) b += y[i] - k * x[i];
  b /= (s.last - s.first + 1);
  s.intercept = b;
  s.residual = 0.0;
  for (int i = s.first; i <= s.last; ++i) s.residual = std::max(s.residual, std::abs(y[i] - (k * x[i] + b)));
  s.eps_lo = x[s.first];
  s.eps_hi = x[s.last];
}

double median(std::vector<double> v) {
  if (v.empty()) return 0.0;
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

}  // namespace

Measurement complexified_exponent(const TrigPotential& v, cplx energy, double eps,
                                  const JensenParams& p) {
  const auto s = lyapunov_spectrum(schrodinger_cocycle(v, energy, eps, p.dual.alpha), p.le);
  return {s.exponents[0], s.std_err[0]};
}

std::vector<double> linear_grid(double a, double b, int n) {
  require(n >= 1, ErrorKind::InvalidArgument, "grid needs at least one point");
  require(n >= 2 || a == b, ErrorKind::InvalidArgument, "a one-point grid needs a == b");
  std::vector<double> g(n);
  for (int i = 0; i < n; ++i) g[i] = (n == 1) ? a : a + (b - a) * i / (n - 1);
  if (n > 1) g.back() = b;
  return g;
}

double jensen_prediction(double l0, const std::vector<double>& lhat, double eps) {
  const double a = kTwoPi * std::abs(eps);
  double out = l0;
  for (double l : lhat) {
    if (l < a) out += a - l;
  }
  return out;
}

Segmentation segment_profile(const std::vector<double>& x, const std::vector<double>& y,
                             double fit_tol, bool even_at_zero) {
  const int n = static_cast<int>(x.size());
  require(n == static_cast<int>(y.size()) && n >= 2, ErrorKind::InvalidArgument,
          "segment_profile: need matching grids of at least two points");
  // greedy left-to-right affine pieces
  std::vector<Segment> raw;
  int i = 0;
  while (i < n) {
    int last = i;
    for (int j = i + 1; j < n; ++j) {
      if (fit_line(x, y, i, j).residual < fit_tol) last = j;
      else break;
    }
    Segment s;
    s.first = i;
    s.last = last;
    raw.push_back(s);
    i = last + 1;
  }

  // short pieces are transitions around a turning point
  std::vector<Segment> kept;
  for (auto s : raw) {
    if (s.last - s.first + 1 < 3) continue;
    const auto f = fit_line(x, y, s.first, s.last);
    s.raw_slope = f.slope / kTwoPi;
    s.slope = static_cast<int>(std::lround(s.raw_slope));
    if (std::abs(s.raw_slope - s.slope) > kSnapTol) {
      fail(ErrorKind::SnapFailure, "segment slope/2pi = " + std::to_string(s.raw_slope) +
                                       " on [" + std::to_string(x[s.first]) + ", " +
                                       std::to_string(x[s.last]) + "] is not near an integer");
    }
    refit_snapped(x, y, s);
    if (!kept.empty() && kept.back().slope == s.slope) {
      kept.back().last = s.last;
      kept.back().raw_slope = fit_line(x, y, kept.back().first, s.last).slope / kTwoPi;
      refit_snapped(x, y, kept.back());
    } else {
      kept.push_back(s);
    }
  }

  Segmentation out;
  out.segments = kept;
  if (even_at_zero && !kept.empty() && std::abs(x.front()) < 1e-12 && kept.front().slope > 0) {
    // an even profile sampled from 0 hides the kink at the origin
    out.turning_points.push_back({0.0, kept.front().slope});
  }
  for (std::size_t k = 1; k < kept.size(); ++k) {
    const auto& a = kept[k - 1];
    const auto& b = kept[k];
    const int inc = b.slope - a.slope;
    if (inc <= 0) {
      fail(ErrorKind::NonConvexProfile, "slope decreases from " + std::to_string(a.slope) + " to " +
                                            std::to_string(b.slope) + " near eps=" +
                                            std::to_string(b.eps_lo));
    }
    const double at = (b.intercept - a.intercept) / (kTwoPi * (a.slope - b.slope));
    out.turning_points.push_back({at, inc});
  }
  return out;
}

JensenProfile profile(const TrigPotential& v, cplx energy, const std::vector<double>& eps_grid,
                      const JensenParams& p) {
  require(eps_grid.size() >= 16, ErrorKind::InvalidArgument, "profile needs at least 16 grid points");
  require(std::is_sorted(eps_grid.begin(), eps_grid.end()) &&
              std::adjacent_find(eps_grid.begin(), eps_grid.end()) == eps_grid.end(),
          ErrorKind::InvalidArgument, "eps grid must be strictly increasing");

  JensenProfile pr;
  pr.energy = energy;
  pr.eps = eps_grid;
  const int n = static_cast<int>(eps_grid.size());
  pr.measured.resize(n);
  pr.std_err.resize(n);
  std::optional<double> l0;
  for (int i = 0; i < n; ++i) {
    const auto m = complexified_exponent(v, energy, eps_grid[i], p);
    pr.measured[i] = m.value;
    pr.std_err[i] = m.std_err;
    if (eps_grid[i] == 0.0) l0 = m.value;
  }
  pr.l0 = l0 ? *l0 : complexified_exponent(v, energy, 0.0, p).value;

  // convexity against the chord through the neighbours
  for (int i = 1; i + 1 < n; ++i) {
    const double w = (eps_grid[i + 1] - eps_grid[i]) / (eps_grid[i + 1] - eps_grid[i - 1]);
    const double chord = w * pr.measured[i - 1] + (1 - w) * pr.measured[i + 1];
    const double tol = 3.0 * std::max({pr.std_err[i - 1], pr.std_err[i], pr.std_err[i + 1]}) + 1e-9;
    if (pr.measured[i] > chord + tol) {
      fail(ErrorKind::NonConvexProfile, "profile rises above its chord at eps=" +
                                            std::to_string(eps_grid[i]));
    }
  }

  pr.fit_tol = p.fit_tol.value_or(std::max(3.0 * median(pr.std_err), kFitTolFloor));
  const bool real = is_real_energy(v, energy);
  const auto seg = segment_profile(eps_grid, pr.measured, pr.fit_tol, real);
  pr.segments = seg.segments;
  pr.turning_points = seg.turning_points;

  pr.dual = dual_spectrum(v, energy, p.dual);
  pr.predicted.resize(n);
  for (int i = 0; i < n; ++i) {
    if (real || eps_grid[i] <= 0.0) {
      pr.predicted[i] = jensen_prediction(pr.l0, pr.dual.lhat, eps_grid[i]);
      pr.sup_deviation = std::max(pr.sup_deviation, std::abs(*pr.predicted[i] - pr.measured[i]));
    }
  }

  // turning points implied by the dual exponent groups
  const double lo = eps_grid.front(), hi = eps_grid.back();
  const bool starts_at_zero = std::abs(lo) < 1e-12;
  for (const auto& g : pr.dual.groups) {
    const double at = g.value < p.tau_l ? 0.0 : g.value / kTwoPi;
    if (at == 0.0) {
      if (lo <= 0.0 && hi >= 0.0) {
        pr.predicted_turning_points.push_back({0.0, (real && !starts_at_zero) ? 2 * g.multiplicity : g.multiplicity});
      }
      continue;
    }
    if (real && at >= lo && at <= hi) pr.predicted_turning_points.push_back({at, g.multiplicity});
    if (-at >= lo && -at <= hi) pr.predicted_turning_points.push_back({-at, g.multiplicity});
  }
  std::sort(pr.predicted_turning_points.begin(), pr.predicted_turning_points.end(),
            [](const TurningPoint& a, const TurningPoint& b) { return a.eps < b.eps; });

  if (pr.predicted_turning_points.size() == pr.turning_points.size()) {
    pr.increments_match = true;
    for (std::size_t k = 0; k < pr.turning_points.size(); ++k) {
      pr.turning_point_error = std::max(
          pr.turning_point_error, std::abs(pr.turning_points[k].eps - pr.predicted_turning_points[k].eps));
      pr.increments_match = pr.increments_match &&
                            pr.turning_points[k].increment == pr.predicted_turning_points[k].increment;
    }
  } else {
    pr.turning_point_error = std::numeric_limits<double>::infinity();
  }
  return pr;
}

namespace {

Acceleration acceleration_with(const TrigPotential& v, cplx energy, const JensenParams& p,
                               const DualSpectrum& dual) {
  const double h = p.accel_delta;
  const double l1 = complexified_exponent(v, energy, h, p).value;
  const double l3 = complexified_exponent(v, energy, 3 * h, p).value;
  // least-squares slope through (h, 2h, 3h) only involves the end points
  Acceleration a;
  a.raw = (l3 - l1) / (2 * h) / kTwoPi;
  a.omega = static_cast<int>(std::lround(a.raw));
  if (std::abs(a.raw - a.omega) > kSnapTol) {
    fail(ErrorKind::SnapFailure, "acceleration " + std::to_string(a.raw) + " is not near an integer");
  }
  a.dual_zero_count = static_cast<int>(
      std::count_if(dual.lhat.begin(), dual.lhat.end(), [&](double l) { return l < p.tau_l; }));
  if (a.dual_zero_count != a.omega) {
    fail(ErrorKind::AccelerationMismatch,
         "slope gives acceleration " + std::to_string(a.omega) + " but " +
             std::to_string(a.dual_zero_count) + " dual exponents vanish");
  }
  return a;
}

}  // namespace

Acceleration acceleration(const TrigPotential& v, cplx energy, const JensenParams& p) {
  return acceleration_with(v, energy, p, dual_spectrum(v, energy, p.dual));
}

std::string to_string(Regime r) {
  switch (r) {
    case Regime::OutsideSpectrum: return "OutsideSpectrum";
    case Regime::Supercritical: return "Supercritical";
    case Regime::Critical: return "Critical";
    case Regime::Subcritical: return "Subcritical";
  }
  return "?";
}

Classification classify(const TrigPotential& v, cplx energy, const JensenParams& p) {
  Classification c;
  c.energy = energy;
  c.l0 = complexified_exponent(v, energy, 0.0, p).value;
  const auto dual = dual_spectrum(v, energy, p.dual);
  c.lhat1 = dual.lhat.front();
  const double t = p.tau_l;
  auto borderline = [t](double x) { return std::abs(x) >= t / 2 && std::abs(x) <= 2 * t; };
  if (borderline(c.l0) || borderline(c.lhat1)) {
    fail(ErrorKind::BorderlineEnergy, "L0=" + std::to_string(c.l0) + ", Lhat1=" +
                                          std::to_string(c.lhat1) + " within the borderline band");
  }
  const bool lpos = c.l0 > t, dpos = c.lhat1 > t;
  c.regime = lpos ? (dpos ? Regime::OutsideSpectrum : Regime::Supercritical)
                  : (dpos ? Regime::Subcritical : Regime::Critical);
  c.uniform = dpos;
  if (c.regime == Regime::Subcritical) c.h = c.lhat1 / kTwoPi;
  c.omega = acceleration_with(v, energy, p, dual).omega;
  return c;
}

double haro_puig_residual(const TrigPotential& v, cplx energy, const JensenParams& p) {
  const double l = complexified_exponent(v, energy, 0.0, p).value;
  const auto dual = dual_spectrum(v, energy, p.dual);
  const double sum = std::accumulate(dual.lhat.begin(), dual.lhat.end(), 0.0);
  return std::abs(l - sum - std::log(std::abs(v.coeff(v.degree()))));
}

ScalarJensen scalar_jensen(const TrigPotential& v, cplx energy, double eps) {
  const int d = v.degree();
  require(d >= 1, ErrorKind::InvalidArgument, "scalar_jensen needs a potential of degree >= 1");
  ScalarJensen sj;
  // w^d (E - V), w = e^{2 pi i (x + i eps)}: coefficient of w^{k+d} is -V_k, plus E at w^d
  sj.coeffs.assign(2 * d + 1, cplx{});
  for (int k = -d; k <= d; ++k) sj.coeffs[k + d] = -v.coeff(k);
  sj.coeffs[d] += energy;
  const cplx lead = sj.coeffs[2 * d];

  CMatrix comp = CMatrix::Zero(2 * d, 2 * d);
  for (int j = 0; j < 2 * d; ++j) comp(0, j) = -sj.coeffs[2 * d - 1 - j] / lead;
  for (int i = 1; i < 2 * d; ++i) comp(i, i - 1) = 1.0;
  sj.roots = num::eig_small(comp);

  const double r = std::exp(-kTwoPi * eps);
  double scale = 0.0;
  for (auto c : sj.coeffs) scale += std::abs(c);
  sj.closed_form = std::log(std::abs(lead)) + kTwoPi * d * eps;
  for (auto z : sj.roots) {
    sj.closed_form += std::log(std::max(r, std::abs(z)));
    if (std::abs(std::abs(z) - r) < 1e-6 * std::max(1.0, r)) sj.root_near_circle = true;
    cplx val{}, pw = 1.0;
    for (auto c : sj.coeffs) {
      val += c * pw;
      pw *= z;
    }
    const double zs = std::pow(std::max(1.0, std::abs(z)), 2 * d);
    sj.max_root_residual = std::max(sj.max_root_residual, std::abs(val) / (scale * zs));
  }

  // periodic trapezoid rule, doubled until two levels agree
  auto trap = [&](int nodes) {
    double s = 0.0;
    for (int i = 0; i < nodes; ++i) s += std::log(std::abs(energy - v.evaluate(double(i) / nodes, eps)));
    return s / nodes;
  };
  int nodes = 4096;
  double prev = trap(nodes);
  for (; nodes < (1 << 20); nodes *= 2) {
    const double next = trap(2 * nodes);
    const bool done = std::abs(next - prev) < 1e-12;
    prev = next;
    if (done) {
      nodes *= 2;
      break;
    }
  }
  sj.nodes = nodes;
  sj.quadrature = prev;
  sj.difference = std::abs(sj.quadrature - sj.closed_form);
  return sj;
}

std::vector<double> truncation_eigenvalues(const TrigPotential& v, const SpectrumParams& p) {
  require(v.is_real(), ErrorKind::InvalidArgument, "approximate_spectrum needs a real potential");
  require(p.size >= 2 && p.phases >= 1, ErrorKind::InvalidArgument, "bad truncation parameters");
  const auto thetas = phase_grid(p.phases, p.seed);
  std::vector<double> all;
  all.reserve(static_cast<std::size_t>(p.size) * p.phases);
  for (double th : thetas) {
    Eigen::VectorXd diag(p.size), sub = Eigen::VectorXd::Ones(p.size - 1);
    for (int n = 0; n < p.size; ++n) diag[n] = v.evaluate(th + n * p.alpha.value()).real();
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es;
    es.computeFromTridiagonal(diag, sub, Eigen::EigenvaluesOnly);
    if (es.info() != Eigen::Success) fail(ErrorKind::EigFailure, "tridiagonal eigensolver failed");
    for (int i = 0; i < p.size; ++i) all.push_back(es.eigenvalues()[i]);
  }
  std::sort(all.begin(), all.end());
  return all;
}

std::vector<Interval> approximate_spectrum(const TrigPotential& v, const SpectrumParams& p) {
  const auto ev = truncation_eigenvalues(v, p);
  std::vector<Interval> out;
  for (double e : ev) {
    if (!out.empty() && e - out.back().hi < p.merge_tol) {
      out.back().hi = e;
    } else {
      out.push_back({e, e});
    }
  }
  return out;
}

double auto_energy(const TrigPotential& v, const SpectrumParams& p) {
  const auto ev = truncation_eigenvalues(v, p);
  const auto iv = approximate_spectrum(v, p);
  const auto best = std::max_element(iv.begin(), iv.end(), [](const Interval& a, const Interval& b) {
    return a.length() < b.length();
  });
  const double mid = 0.5 * (best->lo + best->hi);
  return *std::min_element(ev.begin(), ev.end(),
                           [mid](double a, double b) { return std::abs(a - mid) < std::abs(b - mid); });
}

}  // namespace qpj
