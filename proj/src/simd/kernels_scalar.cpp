#include <algorithm>
#include <cmath>

#include "sowban/simd/kernels.hpp"

namespace sowban::simd::scalar {

double max_abs_deviation(std::span<const double> v, double center) {
  double m = 0.0;
  for (double x : v) m = std::max(m, std::fabs(x - center));
  return m;
}

Moments moments(std::span<const double> v, double shift) {
  Moments out;
  out.shift = shift;
  out.n = v.size();
  for (double x : v) {
    const double d = x - shift;
    out.sum += d;
    out.sum_sq += d * d;
  }
  return out;
}

double sum(std::span<const double> v) {
  double s = 0.0;
  for (double x : v) s += x;
  return s;
}

}  // namespace sowban::simd::scalar
