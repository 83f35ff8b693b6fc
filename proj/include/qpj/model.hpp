#pragma once

#include <complex>
#include <filesystem>
#include <map>
#include <numbers>
#include <string>
#include <vector>

#include "qpj/numkernel.hpp"

namespace qpj {

/// Relative threshold below which a Fourier coefficient is treated as zero.
inline constexpr double kTrimThreshold = 1e-14;

/// V(x) = sum_{k=-d}^{d} V_k e^{2 pi i k x}. The zero potential has degree 0.
class TrigPotential {
 public:
  TrigPotential() : coeffs_{cplx{}} {}

  /// Builds from sparse coefficients. Coefficients below kTrimThreshold
  /// relative to the largest one are dropped; `trimmed` reports whether
  /// that changed anything.
  static TrigPotential from_map(const std::map<int, cplx>& coeffs, bool* trimmed = nullptr);

  int degree() const { return static_cast<int>(coeffs_.size() / 2); }
  cplx coeff(int k) const;
  double max_abs() const;

  /// V_{-k} == conj(V_k), so V is real on the real line.
  bool is_real(double tol = 1e-13) const;

  /// Sum_k V_k e^{2 pi i k (x + i eps)}.
  cplx evaluate(double x, double eps = 0.0) const;
  cplx evaluate(cplx z) const { return evaluate(z.real(), z.imag()); }

  /// V with every coefficient scaled by e^{-2 pi k eps}; evaluate(x, eps) of
  /// the original equals evaluate(x) of the result.
  TrigPotential shifted(double eps) const;

  /// Coefficients of degree <= d only (no re-trimming of the result).
  TrigPotential truncated(int d) const;

  std::map<int, cplx> to_map() const;

  bool operator==(const TrigPotential&) const = default;

 private:
  std::vector<cplx> coeffs_;  // V_{-d..d}
};

/// Almost Mathieu: V = 2 lambda cos 2 pi x.
TrigPotential amo(double lambda);
/// Two-harmonic potential 2 l1 cos 2 pi x + 2 l2 cos 4 pi x.
TrigPotential sem(double lambda1, double lambda2);

/// Explicit truncation sequence of an analytic potential.
struct AnalyticPotential {
  std::vector<TrigPotential> truncations;  // increasing degree
  double h = 0.0;                           // strip half-width of analyticity

  /// V_k = coeff(k) for |k| <= d_max, truncations at every degree 1..d_max.
  template <class F>
  static AnalyticPotential from_coefficients(F coeff, int d_max, double h) {
    std::map<int, cplx> full;
    for (int k = -d_max; k <= d_max; ++k) full[k] = coeff(k);
    AnalyticPotential out;
    out.h = h;
    for (int d = 1; d <= d_max; ++d) {
      std::map<int, cplx> part;
      for (int k = -d; k <= d; ++k) part[k] = full[k];
      out.truncations.push_back(TrigPotential::from_map(part));
    }
    return out;
  }

  /// The truncation requested at degree d; trimming may have lowered its
  /// actual degree.
  const TrigPotential& at_degree(int d) const;
};

class Frequency {
 public:
  static constexpr double kGolden = (2.23606797749978969641 - 1.0) / 2.0;

  Frequency() : alpha_(kGolden) {}
  /// Rejects alpha outside (0,1) or within 1e-9 of p/q, q <= 50.
  explicit Frequency(double alpha);

  double value() const { return alpha_; }

 private:
  double alpha_;
};

struct LoadResult {
  TrigPotential potential;
  std::vector<std::string> warnings;
};

/// Text format: one `k re im` per line, `#` comments, blank lines ignored.
LoadResult load_potential(const std::filesystem::path& path);
LoadResult parse_potential(const std::string& text);
void save_potential(const TrigPotential& v, const std::filesystem::path& path);

}  // namespace qpj
