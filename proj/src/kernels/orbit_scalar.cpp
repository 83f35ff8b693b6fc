#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <vector>

#include "qpj/error.hpp"
#include "qpj/kernels.hpp"

namespace qpj::kern {
namespace scalar_impl {

struct Lane {
  static constexpr int width = 1;
  double v;

  static Lane broadcast(double x) { return {x}; }
  static Lane load(const double* p) { return {*p}; }
  static void store(double* p, Lane a) { *p = a.v; }
  static Lane sqrt(Lane a) { return {std::sqrt(a.v)}; }

  // x = mant * 2^expo, mant in [1, 2), for positive normal x
  static void split(Lane x, Lane& mant, Lane& expo) {
    const auto bits = std::bit_cast<std::uint64_t>(x.v);
    const std::uint64_t eb = bits >> 52;
    mant.v = std::bit_cast<double>((bits & 0x000FFFFFFFFFFFFFull) | 0x3FF0000000000000ull);
    const double ed = std::bit_cast<double>(eb | 0x4330000000000000ull) - 4503599627370496.0;
    expo.v = ed - 1023.0;
  }

  friend Lane operator+(Lane a, Lane b) { return {a.v + b.v}; }
  friend Lane operator-(Lane a, Lane b) { return {a.v - b.v}; }
  friend Lane operator*(Lane a, Lane b) { return {a.v * b.v}; }
  friend Lane operator/(Lane a, Lane b) { return {a.v / b.v}; }
};

#include "orbit_impl.inl"

}  // namespace scalar_impl

void detail::run_scalar(const CompanionForm& form, double alpha, const double* theta0, int count, long warmup,
                        long n, int stride, double* full, double* half, long* half_steps) {
  scalar_impl::run_all(form, alpha, theta0, count, warmup, n, stride, full, half, half_steps);
}

}  // namespace qpj::kern
