#include "qpj/cocycle.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <numeric>
#include <random>
#include <string>

#include "qpj/error.hpp"
#include "qpj/parallel.hpp"

namespace qpj {

namespace {

double frac(double x) { return x - std::floor(x); }

// ln R_jj sums along one orbit for cocycles without companion shape.
void generic_orbit(const CocycleSpec& c, double theta0, long warmup, long n, int stride,
                   double* full, double* half, long* half_steps) {
  const int m = c.dim;
  CMatrix q = CMatrix::Identity(m, m);
  std::vector<double> acc(m, 0.0);
  bool have_half = false;
  const long total = warmup + n;
  for (long t = 0; t < total; ++t) {
    q = c.at(frac(theta0 + static_cast<double>(t) * c.alpha)) * q;
    const long done = t + 1;
    if (done % stride != 0 && done != total && done != warmup) continue;
    auto qr = num::qr_positive(q);
    q = std::move(qr.q);
    if (done <= warmup) continue;
    for (int j = 0; j < m; ++j) acc[j] += std::log(qr.r(j, j).real());
    if (!have_half && 2 * (done - warmup) >= n) {
      std::copy(acc.begin(), acc.end(), half);
      *half_steps = done - warmup;
      have_half = true;
    }
  }
  std::copy(acc.begin(), acc.end(), full);
}

kern::OrbitSums orbit_sums(const CocycleSpec& c, const std::vector<double>& thetas, long warmup,
                           long n, int stride, std::optional<kern::Isa> isa) {
  const int m = c.dim;
  if (c.companion) {
    const kern::Isa use = isa.value_or(kern::detect_isa());
    // blocks of 4 phases keep the SIMD lanes full and the split thread-independent
    constexpr std::size_t kBlock = 4;
    const std::size_t blocks = (thetas.size() + kBlock - 1) / kBlock;
    kern::OrbitSums out;
    out.full.assign(thetas.size() * m, 0.0);
    out.half.assign(thetas.size() * m, 0.0);
    out.steps = n;
    std::vector<long> halves(blocks, 0);
    parallel_for(blocks, [&](std::size_t b) {
      const std::size_t lo = b * kBlock, hi = std::min(thetas.size(), lo + kBlock);
      auto part = kern::run_orbits(*c.companion, c.alpha,
                                   std::span<const double>(thetas.data() + lo, hi - lo), n, stride, use,
                                   warmup);
      std::copy(part.full.begin(), part.full.end(), out.full.begin() + lo * m);
      std::copy(part.half.begin(), part.half.end(), out.half.begin() + lo * m);
      halves[b] = part.half_steps;
    });
    out.half_steps = blocks ? halves[0] : 0;
    return out;
  }
  require(static_cast<bool>(c.generator), ErrorKind::InvalidArgument, "cocycle has no generator");
  kern::OrbitSums out;
  out.full.assign(thetas.size() * m, 0.0);
  out.half.assign(thetas.size() * m, 0.0);
  out.steps = n;
  std::vector<long> halves(thetas.size(), 0);
  parallel_for(thetas.size(), [&](std::size_t i) {
    generic_orbit(c, thetas[i], warmup, n, stride, out.full.data() + i * m, out.half.data() + i * m, &halves[i]);
  });
  out.half_steps = halves.empty() ? 0 : halves[0];
  return out;
}

}  // namespace

CMatrix CocycleSpec::at(double theta) const {
  CMatrix a = companion ? companion->at(theta) : generator(theta);
  require(a.rows() == dim && a.cols() == dim, ErrorKind::InvalidArgument,
          "cocycle generator returned a matrix of the wrong size");
  num::require_finite(a, "cocycle generator");
  return a;
}

CocycleSpec schrodinger_cocycle(const TrigPotential& v, cplx energy, double eps, Frequency alpha) {
  kern::CompanionForm form;
  form.dim = 2;
  form.pivot = 0;
  form.row = {energy, -1.0};
  const int d = v.degree();
  form.kmin = -d;
  for (int k = -d; k <= d; ++k) form.fourier.push_back(-v.coeff(k) * std::exp(-kTwoPi * k * eps));

  CocycleSpec c;
  c.alpha = alpha.value();
  c.dim = 2;
  c.name = "schrodinger";
  c.companion = form;
  c.generator = [form](double theta) { return form.at(theta); };
  return c;
}

CocycleSpec constant_cocycle(const CMatrix& a, Frequency alpha) {
  require(a.rows() == a.cols() && a.rows() > 0, ErrorKind::InvalidArgument,
          "constant cocycle needs a square matrix");
  CocycleSpec c;
  c.alpha = alpha.value();
  c.dim = static_cast<int>(a.rows());
  c.name = "constant";
  c.generator = [a](double) { return a; };
  return c;
}

ScaledMatrix iterate(const CocycleSpec& c, double theta0, long n) {
  require(n >= 0, ErrorKind::InvalidArgument, "iterate: negative n");
  ScaledMatrix out{CMatrix::Identity(c.dim, c.dim), 0.0};
  for (long t = 0; t < n; ++t) {
    out.m = c.at(frac(theta0 + static_cast<double>(t) * c.alpha)) * out.m;
    const double norm = out.m.cwiseAbs().maxCoeff();
    if (norm > 1e280) {
      out.m *= 1.0 / norm;
      out.log_scale += std::log(norm);
    }
  }
  return out;
}

std::uint64_t default_seed() {
  if (const char* env = std::getenv("QPJ_SEED"); env && *env) {
    char* end = nullptr;
    const unsigned long long v = std::strtoull(env, &end, 0);
    if (end && *end == '\0') return v;
    fail(ErrorKind::InvalidArgument, std::string("QPJ_SEED is not an integer: ") + env);
  }
  return kDefaultSeed;
}

std::vector<double> phase_grid(int count, std::uint64_t seed) {
  require(count >= 1, ErrorKind::InvalidArgument, "phase_count must be at least 1");
  std::mt19937_64 rng(seed);
  const double u = static_cast<double>(rng() >> 11) * 0x1.0p-53;
  std::vector<double> th(count);
  for (int j = 0; j < count; ++j) th[j] = (j + u) / count;
  return th;
}

LyapunovSpectrum lyapunov_spectrum(const CocycleSpec& c, const LeParams& p) {
  const long n = p.orbit_length(c.dim);
  require(n >= 1000, ErrorKind::InvalidArgument, "orbit length must be at least 1000");
  require(p.qr_stride >= 1, ErrorKind::InvalidArgument, "qr_stride must be positive");
  const int m = c.dim;
  const auto thetas = phase_grid(p.phase_count, p.seed);
  const auto sums = orbit_sums(c, thetas, p.burn_in(m), n, p.qr_stride, p.isa);

  LyapunovSpectrum out;
  out.orbit_length = n;
  out.phase_count = p.phase_count;
  out.samples.assign(p.phase_count, std::vector<double>(m));
  std::vector<std::vector<double>> half(p.phase_count, std::vector<double>(m));
  for (int i = 0; i < p.phase_count; ++i) {
    for (int j = 0; j < m; ++j) {
      out.samples[i][j] = sums.full[i * m + j] / static_cast<double>(n);
      half[i][j] = sums.half[i * m + j] / static_cast<double>(sums.half_steps);
    }
    std::sort(out.samples[i].begin(), out.samples[i].end(), std::greater<>());
    std::sort(half[i].begin(), half[i].end(), std::greater<>());
  }

  out.exponents.assign(m, 0.0);
  out.std_err.assign(m, 0.0);
  const double P = p.phase_count;
  for (int j = 0; j < m; ++j) {
    double mean = 0.0, mean_half = 0.0;
    for (int i = 0; i < p.phase_count; ++i) {
      mean += out.samples[i][j];
      mean_half += half[i][j];
    }
    mean /= P;
    mean_half /= P;
    double var = 0.0;
    for (int i = 0; i < p.phase_count; ++i) var += (out.samples[i][j] - mean) * (out.samples[i][j] - mean);
    const double se2 = p.phase_count > 1 ? var / (P - 1.0) / P : 0.0;
    const double drift = mean - mean_half;
    out.exponents[j] = mean;
    out.std_err[j] = std::sqrt(se2 + drift * drift);
  }

  if (c.companion) {
    out.log_det_rate = c.companion->log_abs_det();
  } else {
    double acc = 0.0;
    for (double th : thetas) {
      for (long t = 0; t < std::min<long>(n, 4096); ++t) {
        acc += num::log_det(c.at(frac(th + static_cast<double>(t) * c.alpha))).log_abs;
      }
    }
    out.log_det_rate = acc / (P * static_cast<double>(std::min<long>(n, 4096)));
  }
  return out;
}

SplittingResult domination_check(const CocycleSpec& c, int k, long n,
                                 const std::vector<double>& theta_samples, double gap_tol) {
  require(k >= 1 && k < c.dim, ErrorKind::InvalidArgument, "domination_check: need 1 <= k < dim");
  require(n >= 1 && !theta_samples.empty(), ErrorKind::InvalidArgument,
          "domination_check: need n >= 1 and at least one phase");
  const int m = c.dim;
  auto min_gap = [&](long len) {
    const auto sums = orbit_sums(c, theta_samples, 0, len, 1, std::nullopt);
    double g = INFINITY;
    std::vector<double> s(m);
    for (std::size_t i = 0; i < theta_samples.size(); ++i) {
      std::copy(sums.full.begin() + i * m, sums.full.begin() + (i + 1) * m, s.begin());
      std::sort(s.begin(), s.end(), std::greater<>());
      g = std::min(g, (s[k - 1] - s[k]) / static_cast<double>(len));
    }
    return g;
  };
  SplittingResult r;
  r.k = k;
  r.gap_estimate = min_gap(n);
  r.gap_estimate_doubled = min_gap(2 * n);
  const bool at_n = r.gap_estimate > gap_tol;
  const bool at_2n = r.gap_estimate_doubled > gap_tol;
  if (at_n != at_2n) {
    fail(ErrorKind::InconclusiveDomination,
         "gap estimate crosses the tolerance between n=" + std::to_string(n) + " and 2n");
  }
  if (at_n) {
    const double rel = std::abs(r.gap_estimate_doubled - r.gap_estimate) / r.gap_estimate;
    if (rel > 0.2) {
      fail(ErrorKind::InconclusiveDomination,
           "gap estimate moves by " + std::to_string(rel * 100) + "% when n doubles");
    }
  }
  r.dominated = at_n;
  return r;
}

namespace {

// Leading `cols` columns after QR-propagating an orthonormal frame through
// `steps` matrices produced by `next(t)`.
// Fixed generic starting frame; the identity can sit exactly on an invariant
// subspace (diagonal cocycles) and never leave it.
CMatrix generic_frame(int m) {
  std::mt19937_64 rng(kDefaultSeed);
  CMatrix w(m, m);
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < m; ++j) {
      const double re = static_cast<double>(rng() >> 11) * 0x1.0p-53 - 0.5;
      const double im = static_cast<double>(rng() >> 11) * 0x1.0p-53 - 0.5;
      w(i, j) = cplx(re, im);
    }
  return num::qr_positive(w).q;
}

template <class Next>
CMatrix propagate_frame(int m, int cols, long steps, Next next) {
  CMatrix q = generic_frame(m);
  for (long t = 0; t < steps; ++t) q = num::qr_positive(next(t) * q).q;
  return q.leftCols(cols);
}

double projector_distance(const CMatrix& a, const CMatrix& b) {
  return (a * a.adjoint() - b * b.adjoint()).norm();
}

}  // namespace

InvariantFrames invariant_frames(const CocycleSpec& c, int k, double theta, long n, double tol,
                                 long n_max) {
  require(k >= 1 && k < c.dim, ErrorKind::InvalidArgument, "invariant_frames: need 1 <= k < dim");
  require(n >= 1, ErrorKind::InvalidArgument, "invariant_frames: n must be positive");
  const int m = c.dim;
  auto fast_at = [&](long len) {
    const double start = theta - static_cast<double>(len) * c.alpha;
    return propagate_frame(m, k, len, [&](long t) {
      return c.at(frac(start + static_cast<double>(t) * c.alpha));
    });
  };
  auto slow_at = [&](long len) {
    // inverse cocycle from theta + len*alpha back to theta
    return propagate_frame(m, m - k, len, [&](long t) {
      const double x = theta + static_cast<double>(len - 1 - t) * c.alpha;
      return num::solve_dense(c.at(frac(x)), CMatrix::Identity(m, m));
    });
  };

  CMatrix fast = fast_at(n), slow = slow_at(n);
  for (long len = n; len <= n_max; len *= 2) {
    CMatrix fast2 = fast_at(2 * len), slow2 = slow_at(2 * len);
    const double df = projector_distance(fast, fast2), ds = projector_distance(slow, slow2);
    fast = std::move(fast2);
    slow = std::move(slow2);
    if (df < tol && ds < tol) return {fast, slow, 2 * len};
  }
  fail(ErrorKind::FrameNotConverged,
       "invariant frames did not settle to " + std::to_string(tol) + " by n=" + std::to_string(n_max));
}

}  // namespace qpj
