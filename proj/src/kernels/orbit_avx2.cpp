#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <vector>

#include <immintrin.h>

#include "qpj/error.hpp"
#include "qpj/kernels.hpp"

namespace qpj::kern {
namespace avx2_impl {

struct Lane {
  static constexpr int width = 4;
  __m256d v;

  static Lane broadcast(double x) { return {_mm256_set1_pd(x)}; }
  static Lane load(const double* p) { return {_mm256_loadu_pd(p)}; }
  static void store(double* p, Lane a) { _mm256_storeu_pd(p, a.v); }
  static Lane sqrt(Lane a) { return {_mm256_sqrt_pd(a.v)}; }

  // same bit manipulation as the scalar lane; int64 -> double via the 2^52 trick
  static void split(Lane x, Lane& mant, Lane& expo) {
    const __m256i bits = _mm256_castpd_si256(x.v);
    const __m256i eb = _mm256_srli_epi64(bits, 52);
    const __m256i frac = _mm256_and_si256(bits, _mm256_set1_epi64x(0x000FFFFFFFFFFFFFll));
    mant.v = _mm256_castsi256_pd(_mm256_or_si256(frac, _mm256_set1_epi64x(0x3FF0000000000000ll)));
    const __m256d ed =
        _mm256_sub_pd(_mm256_castsi256_pd(_mm256_or_si256(eb, _mm256_set1_epi64x(0x4330000000000000ll))),
                      _mm256_set1_pd(4503599627370496.0));
    expo.v = _mm256_sub_pd(ed, _mm256_set1_pd(1023.0));
  }

  friend Lane operator+(Lane a, Lane b) { return {_mm256_add_pd(a.v, b.v)}; }
  friend Lane operator-(Lane a, Lane b) { return {_mm256_sub_pd(a.v, b.v)}; }
  friend Lane operator*(Lane a, Lane b) { return {_mm256_mul_pd(a.v, b.v)}; }
  friend Lane operator/(Lane a, Lane b) { return {_mm256_div_pd(a.v, b.v)}; }
};

#include "orbit_impl.inl"

}  // namespace avx2_impl

void detail::run_avx2(const CompanionForm& form, double alpha, const double* theta0, int count, long warmup,
                        long n, int stride, double* full, double* half, long* half_steps) {
  avx2_impl::run_all(form, alpha, theta0, count, warmup, n, stride, full, half, half_steps);
}

}  // namespace qpj::kern
