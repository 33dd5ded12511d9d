// Built with -mavx2; only reached through dispatch after a CPUID check.
#include <immintrin.h>

#include <algorithm>
#include <cmath>

#include "sowban/simd/kernels.hpp"

namespace sowban::simd::avx2 {

namespace {

inline double hsum(__m256d v) {
  __m128d lo = _mm256_castpd256_pd128(v);
  __m128d hi = _mm256_extractf128_pd(v, 1);
  lo = _mm_add_pd(lo, hi);
  __m128d sh = _mm_unpackhi_pd(lo, lo);
  return _mm_cvtsd_f64(_mm_add_sd(lo, sh));
}

inline double hmax(__m256d v) {
  __m128d lo = _mm256_castpd256_pd128(v);
  __m128d hi = _mm256_extractf128_pd(v, 1);
  lo = _mm_max_pd(lo, hi);
  __m128d sh = _mm_unpackhi_pd(lo, lo);
  return _mm_cvtsd_f64(_mm_max_sd(lo, sh));
}

}  // namespace

double max_abs_deviation(std::span<const double> v, double center) {
  const __m256d sign_mask = _mm256_set1_pd(-0.0);
  const __m256d c = _mm256_set1_pd(center);
  __m256d acc = _mm256_setzero_pd();
  const double* p = v.data();
  const std::size_t n = v.size();
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    __m256d d = _mm256_sub_pd(_mm256_loadu_pd(p + i), c);
    acc = _mm256_max_pd(acc, _mm256_andnot_pd(sign_mask, d));
  }
  double m = hmax(acc);
  for (; i < n; ++i) m = std::max(m, std::fabs(p[i] - center));
  return m;
}

Moments moments(std::span<const double> v, double shift) {
  const __m256d s = _mm256_set1_pd(shift);
  __m256d acc = _mm256_setzero_pd();
  __m256d acc_sq = _mm256_setzero_pd();
  const double* p = v.data();
  const std::size_t n = v.size();
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    __m256d d = _mm256_sub_pd(_mm256_loadu_pd(p + i), s);
    acc = _mm256_add_pd(acc, d);
    acc_sq = _mm256_add_pd(acc_sq, _mm256_mul_pd(d, d));
  }
  Moments out;
  out.shift = shift;
  out.n = n;
  out.sum = hsum(acc);
  out.sum_sq = hsum(acc_sq);
  for (; i < n; ++i) {
    const double d = p[i] - shift;
    out.sum += d;
    out.sum_sq += d * d;
  }
  return out;
}

double sum(std::span<const double> v) {
  __m256d acc = _mm256_setzero_pd();
  const double* p = v.data();
  const std::size_t n = v.size();
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) acc = _mm256_add_pd(acc, _mm256_loadu_pd(p + i));
  double s = hsum(acc);
  for (; i < n; ++i) s += p[i];
  return s;
}

}  // namespace sowban::simd::avx2
