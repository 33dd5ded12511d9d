#if defined(__aarch64__) || defined(__ARM_NEON)
#include <arm_neon.h>

#include <algorithm>
#include <cmath>

#include "sowban/simd/kernels.hpp"

namespace sowban::simd::neon {

double max_abs_deviation(std::span<const double> v, double center) {
  const float64x2_t c = vdupq_n_f64(center);
  float64x2_t acc = vdupq_n_f64(0.0);
  const double* p = v.data();
  const std::size_t n = v.size();
  std::size_t i = 0;
  for (; i + 2 <= n; i += 2) {
    acc = vmaxq_f64(acc, vabsq_f64(vsubq_f64(vld1q_f64(p + i), c)));
  }
  double m = vmaxvq_f64(acc);
  for (; i < n; ++i) m = std::max(m, std::fabs(p[i] - center));
  return m;
}

Moments moments(std::span<const double> v, double shift) {
  const float64x2_t s = vdupq_n_f64(shift);
  float64x2_t acc = vdupq_n_f64(0.0);
  float64x2_t acc_sq = vdupq_n_f64(0.0);
  const double* p = v.data();
  const std::size_t n = v.size();
  std::size_t i = 0;
  for (; i + 2 <= n; i += 2) {
    float64x2_t d = vsubq_f64(vld1q_f64(p + i), s);
    acc = vaddq_f64(acc, d);
    acc_sq = vaddq_f64(acc_sq, vmulq_f64(d, d));
  }
  Moments out;
  out.shift = shift;
  out.n = n;
  out.sum = vaddvq_f64(acc);
  out.sum_sq = vaddvq_f64(acc_sq);
  for (; i < n; ++i) {
    const double d = p[i] - shift;
    out.sum += d;
    out.sum_sq += d * d;
  }
  return out;
}

double sum(std::span<const double> v) {
  float64x2_t acc = vdupq_n_f64(0.0);
  const double* p = v.data();
  const std::size_t n = v.size();
  std::size_t i = 0;
  for (; i + 2 <= n; i += 2) acc = vaddq_f64(acc, vld1q_f64(p + i));
  double s = vaddvq_f64(acc);
  for (; i < n; ++i) s += p[i];
  return s;
}

}  // namespace sowban::simd::neon
#endif
