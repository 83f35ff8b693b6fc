#pragma once

#include <functional>
#include <optional>
#include <vector>

#include "qpj/cocycle.hpp"
#include "qpj/dual.hpp"
#include "qpj/model.hpp"
#include "qpj/numkernel.hpp"

namespace qpj {

/// (L u)(n) = sum_{k=-d}^{d} a_k u(n+k) + V(n) u(n).
struct BandedOperator {
  std::vector<cplx> a;  // a_{-d..d}, index k + d
  std::function<cplx(long)> diagonal;

  int order() const { return static_cast<int>(a.size() / 2); }
  cplx coeff(int k) const { return a[static_cast<std::size_t>(k + order())]; }
};

/// H u(n) = u(n+1) + u(n-1) + V(x + n alpha + i eps) u(n).
BandedOperator schrodinger_operator(const TrigPotential& v, double x, double eps,
                                    Frequency alpha = {});
/// sum_k V^eps_k u(n+k) + 2 cos 2pi(theta + n alpha) u(n).
BandedOperator dual_operator(const TrigPotential& v, double theta, double eps,
                             Frequency alpha = {});

/// Dirichlet truncation of L - E to the sites [lo, hi].
num::BandLU truncated_resolvent(const BandedOperator& op, cplx energy, long lo, long hi);

/// Column q of (L_[lo,hi] - E)^{-1}; entry n - lo belongs to site n.
CVector truncated_green_column(const BandedOperator& op, cplx energy, long lo, long hi, long q);

struct TaggedSolution {
  std::vector<cplx> values;  // values[n - first]
  int tag = +1;              // +1: l2 at +infinity, -1: l2 at -infinity
};

struct GreensKernel {
  BandedOperator op;
  cplx energy;
  long first = 0;  // site of values[0]
  long length = 0;
  std::vector<TaggedSolution> solutions;  // plus-tagged first
  int plus_count = 0;
  double equation_residual = 0.0;  // max relative residual of L phi = E phi

  long last() const { return first + length - 1; }
  /// Phi(q): row r holds the solution values at site q + d - r.
  CMatrix phi_matrix(long q) const;
  /// Cofactor formula; SingularWronskian when det Phi(q) is negligible
  /// against the product of its column norms.
  cplx value(long p, long q) const;
  /// max_n |((L - E) G(., q))(n) - delta_{nq}| / max_n |G(n, q)| over the
  /// interior of the window.
  double defining_residual(long q) const;
};

inline constexpr double kEquationTol = 1e-10;
inline constexpr double kWronskianTol = 1e-12;

/// Checks every solution against the eigenequation and its decay tag.
/// WrongDecayCount when a tag is contradicted or the count is not 2d.
GreensKernel greens_kernel(const BandedOperator& op, cplx energy, long first,
                           std::vector<TaggedSolution> solutions);

/// 2d solutions of the operator generated by a companion cocycle with pivot
/// d-1 (state (u_{n+d-1}, ..., u_{n-d}), phase theta + n alpha at site n),
/// over the sites [lo - d, hi + d - 1]. Plus-tagged solutions start from the
/// contracting frame at site hi and run backwards; minus-tagged ones from the
/// expanding frame at site lo forwards, so both are computed in their growing
/// direction.
std::vector<TaggedSolution> cocycle_solutions(const CocycleSpec& c, int d, double theta,
                                              long lo, long hi);

struct ScalarGreens {
  double x = 0.0, eps = 0.0;
  cplx energy;
  cplx u_plus_1;    // u_+(1) with u_+(0) = 1
  cplx u_minus_m1;  // u_-(-1) with u_-(0) = 1
  cplx m_plus, m_minus;
  cplx g;
  double ricatti_residual = 0.0;  // NaN when not evaluated
};

struct GreensParams {
  Frequency alpha{};
  long frame_n = 64;      // starting length for invariant_frames
  double frame_tol = 1e-12;
  bool check_hyperbolicity = true;
  bool ricatti = true;
  long domination_n = 1000;
  int domination_samples = 8;
  std::uint64_t seed = kDefaultSeed;
};

/// Scalar Green's function g(x + i eps, E) = -1 / (m_+ + m_- + E - V(x + i eps)).
/// NotUniformlyHyperbolic unless domination at k = 1 is certified.
ScalarGreens scalar_greens(const TrigPotential& v, double x, double eps, cplx energy,
                           const GreensParams& p = {});

/// Mean of g(x + i eps, E) over phase_count equidistributed x.
cplx averaged_scalar_green(const TrigPotential& v, double eps, cplx energy, int phase_count,
                           const GreensParams& p = {});

/// Throws NotUniformlyHyperbolic unless the cocycle has a dominated splitting
/// at index k on the sampled phases.
void require_hyperbolic(const CocycleSpec& c, int k, const GreensParams& p);

struct StripGreens {
  double theta = 0.0;
  cplx energy;
  CMatrix m_plus, m_minus, g;      // at theta
  CMatrix m_plus_prev;             // M_+(T^{-1} theta)
  CMatrix m_minus_next, g_next;    // at T theta
  CMatrix g_dense;                 // truncation oracle at theta
  double rce = 0.0;                // C M_+(th) + D M_+^{-1}(T^{-1} th) + E - B(th)
  double rce2 = 0.0;               // D M_-(th) + C M_-^{-1}(T th) + E - B(th)
  double green_matrix = 0.0;       // G(theta) against the truncation oracle
  double green_alternate = 0.0;    // the two one-sided forms of G(theta), G(T theta)
  double g3 = 0.0;                 // G(th) C M_-^{-1}(T th) - M_-(T th) G(T th) D - I
  long frame_n = 0;

  double max_residual() const;
};

struct StripParams {
  GreensParams greens{};
  long dense_half_width = 400;
};

/// M-matrices and Green's matrix of the dual strip operator at theta,
/// T theta = theta + d alpha. The lower off-diagonal block D stands in for C*.
/// BlockNotInvertible when a frame cannot be normalised.
StripGreens strip_greens(const TrigPotential& v, cplx energy, double theta,
                         const StripParams& p = {});

struct StripTrace {
  cplx dynamical;  // mean of tr G(theta)
  cplx dense;      // mean over theta of sum_{s<d} <delta_s, (H^ - E)^{-1} delta_s>
  double difference = 0.0;
};

StripTrace strip_trace_average(const TrigPotential& v, cplx energy, int phase_count,
                               const StripParams& p = {});

struct DualityReport {
  cplx lhs, rhs;                  // Schrodinger side, dual side at N
  cplx lhs_doubled, rhs_doubled;  // same at 2N
  double difference = 0.0;
  double difference_doubled = 0.0;
  long n = 0;
};

/// Truncation floor below which the N-doubling test treats movements as
/// roundoff.
inline constexpr double kTruncationFloor = 1e-10;

/// Phase-averaged <delta_0, (H - E)^{-1} delta_0> for the operator at x + i eps
/// and for its dual with weights e^{-2 pi k eps}, both on [-N, N].
/// TruncationUnstable when doubling N moves either side by more than
/// max(10 * difference, floor).
DualityReport duality_residual(const TrigPotential& v, cplx energy, double eps, long n,
                               int phase_count, Frequency alpha = {});

struct JohnsonMoser {
  double derivative = 0.0;  // central difference of L_eps in Im E
  double green_term = 0.0;  // Im of the phase-averaged g
  double residual = 0.0;
};

struct JohnsonMoserParams {
  double delta = 1e-3;
  int phase_count = 64;
  LeParams le{};
  GreensParams greens{};
};

/// Compares d L_eps / d Im E with Im <g>; the sign follows from
/// L = ln|r_+| for the free operator, where d/d Im E ln|r_+| = Im g.
JohnsonMoser johnson_moser_residual(const TrigPotential& v, cplx energy, double eps,
                                    const JohnsonMoserParams& p = {});

struct WindingResult {
  cplx base_energy;
  double eps = 0.0;           // as requested
  double eps_used = 0.0;      // eps + kWindingOffset
  long n = 0;
  double nu = 0.0;            // winding / N
  int snapped = 0;
  long samples = 0;           // theta points after refinement
  std::optional<double> slope_nu;  // -(d L / d eps) / 2pi when cross-checked
  bool near_integer = false;       // |nu - snapped| < 0.1
  bool slope_match = false;        // |slope_nu - snapped| <= 0.25 (true when not checked)
};

inline constexpr double kWindingOffset = 1e-4;

struct WindingParams {
  Frequency alpha{};
  long theta_steps = 0;  // 0 selects max(512, 16 d N)
  int max_refine = 30;
  bool cross_check = true;
  double slope_step = 2e-3;
  LeParams le{};
  bool strict = true;  // false: report near_integer / slope_match instead of throwing
};

/// Winding per site of theta -> det(H_N(theta, eps) - E_B) on the Dirichlet
/// box [1, N]. SnapFailure when nu is not within 0.1 of an integer,
/// WindingSlopeMismatch when the profile slope disagrees.
WindingResult winding_number(const TrigPotential& v, cplx base_energy, double eps, long n,
                             const WindingParams& p = {});

/// det(H_N(theta) - E) via the continuant; returns log|det| and arg det.
num::LogDet dirichlet_determinant(const TrigPotential& v, cplx energy, double theta, double eps,
                                  long n, Frequency alpha = {});

}  // namespace qpj
