#pragma once

#include <optional>
#include <string>
#include <vector>

#include "qpj/cocycle.hpp"
#include "qpj/dual.hpp"
#include "qpj/model.hpp"

namespace qpj {

/// Threshold for "zero exponent" decisions, natural log per step.
inline constexpr double kTauL = 1e-3;

struct JensenParams {
  LeParams le;                       // Schrodinger side
  DualParams dual;                   // dual side
  double tau_l = kTauL;
  std::optional<double> fit_tol;     // default max(3 * median stderr, kFitTolFloor)
  double accel_delta = 2e-3;
};

inline constexpr double kFitTolFloor = 2e-4;
inline constexpr double kSnapTol = 0.15;

struct Measurement {
  double value = 0.0;
  double std_err = 0.0;
};

/// Top exponent of the Schrodinger cocycle at phase x + i eps.
Measurement complexified_exponent(const TrigPotential& v, cplx energy, double eps,
                                  const JensenParams& p);

/// Inclusive grid of n points from a to b.
std::vector<double> linear_grid(double a, double b, int n);

struct Segment {
  double eps_lo = 0.0, eps_hi = 0.0;
  int first = 0, last = 0;  // grid indices
  int slope = 0;            // slope / 2pi after snapping
  double raw_slope = 0.0;   // least-squares slope before snapping, per 2pi
  double intercept = 0.0;   // after snapping
  double residual = 0.0;    // max |L - (2pi s eps + b)| on the segment
};

struct TurningPoint {
  double eps = 0.0;
  int increment = 0;
};

struct JensenProfile {
  cplx energy;
  std::vector<double> eps;
  std::vector<double> measured;
  std::vector<double> std_err;
  std::vector<std::optional<double>> predicted;
  std::vector<Segment> segments;
  std::vector<TurningPoint> turning_points;
  std::vector<TurningPoint> predicted_turning_points;
  DualSpectrum dual;
  double l0 = 0.0;
  double fit_tol = 0.0;
  double sup_deviation = 0.0;
  double turning_point_error = 0.0;  // max distance between matched turning points
  bool increments_match = false;     // measured increments equal dual multiplicities
};

/// Samples L_eps on the grid, segments it into snapped affine pieces and
/// compares with the dual-exponent prediction.
JensenProfile profile(const TrigPotential& v, cplx energy, const std::vector<double>& eps_grid,
                      const JensenParams& p = {});

/// Piecewise-affine analysis of an already sampled profile (exposed for tests).
struct Segmentation {
  std::vector<Segment> segments;
  std::vector<TurningPoint> turning_points;
};
Segmentation segment_profile(const std::vector<double>& eps, const std::vector<double>& values,
                             double fit_tol, bool even_at_zero);

/// L_0 - sum_{Lhat_i < 2pi|eps|} Lhat_i + 2pi #{...} |eps|.
double jensen_prediction(double l0, const std::vector<double>& lhat, double eps);

struct Acceleration {
  int omega = 0;
  double raw = 0.0;       // slope / 2pi before snapping
  int dual_zero_count = 0;
};

Acceleration acceleration(const TrigPotential& v, cplx energy, const JensenParams& p = {});

enum class Regime { OutsideSpectrum, Supercritical, Critical, Subcritical };
std::string to_string(Regime r);

struct Classification {
  cplx energy;
  double l0 = 0.0;
  double lhat1 = 0.0;
  Regime regime = Regime::OutsideSpectrum;
  int omega = 0;
  std::optional<double> h;
  bool uniform = false;
};

/// BorderlineEnergy when |L0| or |Lhat_1| falls in [tau/2, 2 tau].
Classification classify(const TrigPotential& v, cplx energy, const JensenParams& p = {});

double haro_puig_residual(const TrigPotential& v, cplx energy, const JensenParams& p = {});

struct ScalarJensen {
  std::vector<cplx> coeffs;  // polynomial in w, ascending powers, degree 2d
  std::vector<cplx> roots;
  double quadrature = 0.0;
  double closed_form = 0.0;
  double difference = 0.0;
  double max_root_residual = 0.0;  // relative to the coefficient scale
  int nodes = 0;
  bool root_near_circle = false;
};

/// integral_0^1 ln|E - V(x + i eps)| dx two ways.
ScalarJensen scalar_jensen(const TrigPotential& v, cplx energy, double eps);

struct Interval {
  double lo = 0.0, hi = 0.0;
  double length() const { return hi - lo; }
};

struct SpectrumParams {
  int size = 1000;
  int phases = 8;
  double merge_tol = 0.02;
  std::uint64_t seed = kDefaultSeed;
  Frequency alpha{};
};

/// Outer approximation of the spectrum of the Schrodinger operator from
/// Dirichlet truncations over several phases.
std::vector<Interval> approximate_spectrum(const TrigPotential& v, const SpectrumParams& p = {});
/// All truncation eigenvalues behind approximate_spectrum, sorted.
std::vector<double> truncation_eigenvalues(const TrigPotential& v, const SpectrumParams& p = {});

/// Midpoint of the largest interval, moved to the closest truncation eigenvalue.
double auto_energy(const TrigPotential& v, const SpectrumParams& p = {});

}  // namespace qpj
