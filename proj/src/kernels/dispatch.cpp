#include <cmath>
#include <cstdlib>
#include <string>

#include "qpj/error.hpp"
#include "qpj/kernels.hpp"

namespace qpj::kern {

cplx CompanionForm::f(double theta) const {
  cplx s{};
  for (int k = kmin; k <= kmax(); ++k) {
    const double ang = kTwoPi * std::remainder(k * (theta - std::floor(theta)), 1.0);
    s += fourier[k - kmin] * cplx(std::cos(ang), std::sin(ang));
  }
  return s;
}

CMatrix CompanionForm::at(double theta) const {
  CMatrix a = CMatrix::Zero(dim, dim);
  for (int j = 0; j < dim; ++j) a(0, j) = row[j];
  a(0, pivot) += f(theta);
  for (int i = 1; i < dim; ++i) a(i, i - 1) = 1.0;
  return a;
}

double CompanionForm::log_abs_det() const {
  // expanding along the last column: det = (-1)^{dim+1} * a_{0,dim-1}
  cplx last = row[dim - 1];
  if (pivot == dim - 1) last += f(0.0);
  return std::log(std::abs(last));
}

bool isa_available(Isa isa) {
  if (isa == Isa::Scalar) return true;
#if defined(QPJ_HAVE_AVX2)
  return __builtin_cpu_supports("avx2");
#else
  return false;
#endif
}

Isa detect_isa() {
  if (const char* env = std::getenv("QPJ_ISA"); env && std::string(env) == "scalar") {
    return Isa::Scalar;
  }
  return isa_available(Isa::Avx2) ? Isa::Avx2 : Isa::Scalar;
}

std::string_view isa_name(Isa isa) { return isa == Isa::Avx2 ? "avx2" : "scalar"; }

OrbitSums run_orbits(const CompanionForm& form, double alpha, std::span<const double> theta0,
                     long n, int stride, Isa isa, long warmup) {
  require(form.dim >= 1 && static_cast<int>(form.row.size()) == form.dim, ErrorKind::InvalidArgument,
          "companion form: row length differs from dim");
  require(form.pivot >= 0 && form.pivot < form.dim, ErrorKind::InvalidArgument,
          "companion form: pivot out of range");
  require(!form.fourier.empty(), ErrorKind::InvalidArgument, "companion form: empty Fourier part");
  require(n >= 1 && stride >= 1 && warmup >= 0, ErrorKind::InvalidArgument, "orbit length and stride must be positive");
  require(isa_available(isa), ErrorKind::InvalidArgument, "requested ISA not supported by this CPU");

  OrbitSums out;
  const int count = static_cast<int>(theta0.size());
  out.full.assign(static_cast<std::size_t>(count) * form.dim, 0.0);
  out.half.assign(out.full.size(), 0.0);
  out.steps = n;
  if (count == 0) return out;
#if defined(QPJ_HAVE_AVX2)
  if (isa == Isa::Avx2) {
    detail::run_avx2(form, alpha, theta0.data(), count, warmup, n, stride, out.full.data(), out.half.data(),
                     &out.half_steps);
    return out;
  }
#endif
  {
    detail::run_scalar(form, alpha, theta0.data(), count, warmup, n, stride, out.full.data(),
                       out.half.data(), &out.half_steps);
  }
  return out;
}

}  // namespace qpj::kern
