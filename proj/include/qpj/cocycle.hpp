#pragma once

#include <algorithm>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "qpj/kernels.hpp"
#include "qpj/model.hpp"
#include "qpj/numkernel.hpp"

namespace qpj {

/// A one-frequency cocycle (x, v) -> (x + alpha, A(x) v).
struct CocycleSpec {
  double alpha = Frequency::kGolden;
  int dim = 2;
  std::function<CMatrix(double)> generator;
  std::string name;
  /// Set when A has companion shape; enables the batched kernels.
  std::optional<kern::CompanionForm> companion;

  CMatrix at(double theta) const;
};

/// theta -> [[E - V(theta + i eps), -1], [1, 0]].
CocycleSpec schrodinger_cocycle(const TrigPotential& v, cplx energy, double eps,
                                Frequency alpha = {});
CocycleSpec constant_cocycle(const CMatrix& a, Frequency alpha = {});

/// value = m * exp(log_scale); m has unit max-norm once rescaling kicked in.
struct ScaledMatrix {
  CMatrix m;
  double log_scale = 0.0;
  CMatrix value() const { return m * std::exp(log_scale); }
};

/// A(theta + (n-1) alpha) ... A(theta). Rescales whenever the running
/// product's norm exceeds 1e280.
ScaledMatrix iterate(const CocycleSpec& c, double theta0, long n);

/// Seed from QPJ_SEED when set (decimal or 0x-hex), otherwise 0x5EED.
std::uint64_t default_seed();

/// theta_j = j/count + offset, offset drawn from the seed in [0, 1/count).
std::vector<double> phase_grid(int count, std::uint64_t seed);

struct LeParams {
  int phase_count = 32;
  long n = 0;  // 0 selects 1e5 for 2x2 cocycles, 2e4 otherwise
  int qr_stride = 1;
  long warmup = -1;  // burn-in steps before accumulation; -1 selects min(n/10, 5000)
  std::uint64_t seed = kDefaultSeed;
  std::optional<kern::Isa> isa;  // unset: runtime detection

  long orbit_length(int dim) const { return n > 0 ? n : (dim == 2 ? 100000 : 20000); }
  long burn_in(int dim) const { return warmup >= 0 ? warmup : std::min(orbit_length(dim) / 10, 5000L); }
};

/// Natural-log exponents per step.
struct LyapunovSpectrum {
  std::vector<double> exponents;             // descending
  std::vector<double> std_err;               // across-phase error combined with drift
  std::vector<std::vector<double>> samples;  // samples[phase][j]
  long orbit_length = 0;
  int phase_count = 0;
  double log_det_rate = 0.0;  // phase average of (1/n) ln|det A_n|
};

LyapunovSpectrum lyapunov_spectrum(const CocycleSpec& c, const LeParams& p);

inline constexpr double kGapTol = 1e-2;

struct SplittingResult {
  int k = 1;
  double gap_estimate = 0.0;  // min over samples of (1/n) ln(sigma_k / sigma_{k+1})
  double gap_estimate_doubled = 0.0;
  bool dominated = false;
};

/// Singular-value gap test at index k (1-based) on the given phases, at n and
/// 2n. InconclusiveDomination when the two lengths disagree.
SplittingResult domination_check(const CocycleSpec& c, int k, long n,
                                 const std::vector<double>& theta_samples,
                                 double gap_tol = kGapTol);

struct InvariantFrames {
  CMatrix fast;  // m x k, spans the expanding subspace at theta
  CMatrix slow;  // m x (m-k), spans the contracting subspace at theta
  long n_used = 0;
};

/// Fast frame by forward accumulation from theta - n alpha, slow frame by the
/// inverse cocycle from theta + n alpha. n doubles until the projectors move
/// less than tol (FrameNotConverged past n_max).
InvariantFrames invariant_frames(const CocycleSpec& c, int k, double theta, long n,
                                 double tol = 1e-8, long n_max = 1L << 16);

}  // namespace qpj
