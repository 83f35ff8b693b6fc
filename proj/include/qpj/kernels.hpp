#pragma once

// Batched orbit propagation for companion-form cocycles. Both the Schrodinger
// transfer matrix and the single-step dual cocycle have the shape
//
//   A(theta) = [ row + e_pivot * f(theta) ]      f(theta) = sum_k c_k z^k,
//              [ I_{m-1}             0   ]      z = exp(2 pi i theta),
//
// so one QR-propagation kernel serves both. A scalar reference and an AVX2
// variant (4 phases per register) are selected at runtime.

#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

#include "qpj/numkernel.hpp"

namespace qpj::kern {

struct CompanionForm {
  int dim = 2;
  int pivot = 0;
  std::vector<cplx> row;      // constant part of the first row, length dim
  int kmin = 0;               // Fourier support of f
  std::vector<cplx> fourier;  // c_{kmin}, ..., c_{kmin + size - 1}

  int kmax() const { return kmin + static_cast<int>(fourier.size()) - 1; }
  cplx f(double theta) const;
  CMatrix at(double theta) const;
  /// |det A| does not depend on theta for this shape.
  double log_abs_det() const;
};

enum class Isa { Scalar, Avx2 };

/// AVX2 when the CPU has it, unless QPJ_ISA=scalar is set.
Isa detect_isa();
std::string_view isa_name(Isa isa);
bool isa_available(Isa isa);

/// Per-phase sums of ln R_jj over the orbit, phase-major (phase * dim + j).
/// `half` holds the same sums at the first refactorisation at or after n/2
/// steps, taken after `half_steps` steps.
struct OrbitSums {
  std::vector<double> full;
  std::vector<double> half;
  long steps = 0;
  long half_steps = 0;
};

/// Propagates the identity frame along theta0 + t*alpha for warmup + n
/// steps, re-orthonormalising every `stride` steps (and after the last step).
/// Growth during the first `warmup` steps is discarded.
OrbitSums run_orbits(const CompanionForm& form, double alpha, std::span<const double> theta0,
                     long n, int stride, Isa isa, long warmup = 0);

namespace detail {
void run_scalar(const CompanionForm& form, double alpha, const double* theta0, int count, long warmup,
                long n, int stride, double* full, double* half, long* half_steps);
void run_avx2(const CompanionForm& form, double alpha, const double* theta0, int count, long warmup,
                long n, int stride, double* full, double* half, long* half_steps);
}  // namespace detail

}  // namespace qpj::kern
