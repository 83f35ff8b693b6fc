#pragma once

#include <optional>
#include <vector>

#include "qpj/cocycle.hpp"
#include "qpj/model.hpp"

namespace qpj {

/// Cocycles of the finite-range dual equation
///   sum_k V^eps_k u_{n+k} + 2 cos 2pi(theta + n alpha) u_n = E u_n,
/// with V^eps_k = e^{-2 pi k eps} V_k.
///
/// step(theta): single-step companion matrix on X_n = (u_{n+d-1}, ..., u_{n-d}),
///   rotation alpha. Exponents are computed from this one.
/// strip(theta): the d-step block matrix [[C^-1 (E - B), -C^-1 D], [I, 0]] on
///   (u_{d-1..0}; u_{-1..-d}), rotation d*alpha. strip(theta) equals
///   step(theta + (d-1) alpha) ... step(theta).
struct DualCocycle {
  TrigPotential v;
  cplx energy;
  double eps = 0.0;
  double alpha = Frequency::kGolden;
  int d = 1;

  CMatrix c;      // C_ij = V_{d+i-j}, upper triangular
  CMatrix lower;  // D_ij = V_{i-j-d}; equals C* for real V at eps = 0
  CMatrix omega;  // [[0, -C*], [C, 0]]
  kern::CompanionForm form;

  cplx weighted(int k) const;  // V^eps_k
  CMatrix b(double theta) const;
  CMatrix step(double theta) const { return form.at(theta); }
  CMatrix strip(double theta) const;
  CocycleSpec cocycle() const;
};

/// ZeroLeadingCoefficient when |V_d| or |V_{-d}| is at the trim threshold.
DualCocycle build_dual(const TrigPotential& v, cplx energy, double eps = 0.0, Frequency alpha = {});

/// max over theta of ||A* Omega A - Omega|| / (||A||^2 ||Omega||), strip matrix.
double symplectic_residual(const DualCocycle& dc, const std::vector<double>& thetas);

struct ExponentGroup {
  double value = 0.0;  // mean L-hat of the group (natural log per step)
  int multiplicity = 0;
  int k = 0;  // cumulative index k_i
};

/// Dual exponents. L-hat_i is the natural-log single-step exponent and
/// gamma_i = L-hat_i / 2pi; both are listed ascending.
struct DualSpectrum {
  std::vector<double> lhat;
  std::vector<double> gamma;
  std::vector<double> std_err;  // natural-log units, per lhat entry
  std::vector<double> raw;      // all 2d exponents, descending
  std::vector<double> raw_err;
  std::vector<ExponentGroup> groups;
  double group_tol = 0.0;
  double pairing_defect = 0.0;  // max |lambda_i + lambda_{2d+1-i}|; real E only
  bool real_energy = true;
};

struct DualParams {
  LeParams le;
  std::optional<double> group_tol;  // default max(1e-3, 3 max stderr)
  Frequency alpha{};
};

/// At real E the 2d exponents are folded by the symplectic pairing
/// (PairingViolation when a pair does not cancel); at complex E the top d
/// exponents are reported.
DualSpectrum dual_spectrum(const TrigPotential& v, cplx energy, const DualParams& p = {});

std::vector<ExponentGroup> group_exponents(const std::vector<double>& ascending, double tol);

/// max_theta ||A^eps(theta) - e^{2 pi eps} D^-1 A(theta) D|| / ||A^eps(theta)||
/// with D = diag(e^{2 pi (j - d) eps}), j = 0..2d-1.
double rescaling_residual(const TrigPotential& v, cplx energy, double eps,
                          const std::vector<double>& thetas, Frequency alpha = {});

struct ShiftReport {
  std::vector<double> shifted;   // gamma of the eps-weighted cocycle, all 2d, descending
  std::vector<double> expected;  // gamma + eps
  double max_deviation = 0.0;
};

ShiftReport shifted_spectrum_check(const TrigPotential& v, cplx energy, double eps,
                                   const DualParams& p = {});

struct DualLimitRow {
  int d = 0;
  std::vector<double> lhat;
  std::vector<double> cauchy;  // |lhat_i^d - lhat_i^{d-1}| for shared indices
  int group_count = 0;
};

std::vector<DualLimitRow> dual_limit_table(const AnalyticPotential& vseq, cplx energy,
                                           const std::vector<int>& d_list, const DualParams& p = {});

}  // namespace qpj
