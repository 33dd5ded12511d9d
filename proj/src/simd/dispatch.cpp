#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <string>

#include "sowban/simd/kernels.hpp"

namespace sowban::simd {

namespace {

bool available(Isa isa) {
  switch (isa) {
    case Isa::Scalar:
      return true;
    case Isa::Avx2:
#if defined(__x86_64__) || defined(__i386__)
      return __builtin_cpu_supports("avx2");
#else
      return false;
#endif
    case Isa::Neon:
#if defined(__aarch64__) || defined(__ARM_NEON)
      return true;
#else
      return false;
#endif
  }
  return false;
}

Isa initial_isa() {
  if (const char* env = std::getenv("SOWBAN_SIMD")) {
    const std::string want(env);
    for (Isa isa : {Isa::Scalar, Isa::Avx2, Isa::Neon}) {
      if (want == isa_name(isa) && available(isa)) return isa;
    }
  }
  return detected_isa();
}

std::atomic<Isa>& current() {
  static std::atomic<Isa> isa{initial_isa()};
  return isa;
}

}  // namespace

std::string_view isa_name(Isa isa) {
  switch (isa) {
    case Isa::Scalar: return "scalar";
    case Isa::Avx2: return "avx2";
    case Isa::Neon: return "neon";
  }
  return "?";
}

Isa detected_isa() {
  if (available(Isa::Avx2)) return Isa::Avx2;
  if (available(Isa::Neon)) return Isa::Neon;
  return Isa::Scalar;
}

Isa active_isa() { return current().load(std::memory_order_relaxed); }

bool force_isa(Isa isa) {
  if (!available(isa)) return false;
  current().store(isa, std::memory_order_relaxed);
  return true;
}

double Moments::mean() const { return n == 0 ? 0.0 : shift + sum / static_cast<double>(n); }

double Moments::variance() const {
  if (n == 0) return 0.0;
  const double nn = static_cast<double>(n);
  const double m = sum / nn;
  return std::max(0.0, sum_sq / nn - m * m);
}

double Moments::stddev() const { return std::sqrt(variance()); }

#define SOWBAN_DISPATCH(fn, ...)                                  \
  switch (active_isa()) {                                         \
    case Isa::Avx2: SOWBAN_AVX2(return avx2::fn(__VA_ARGS__);)     \
    case Isa::Neon: SOWBAN_NEON(return neon::fn(__VA_ARGS__);)     \
    case Isa::Scalar: break;                                      \
  }                                                               \
  return scalar::fn(__VA_ARGS__)

#if defined(__x86_64__) || defined(__i386__)
#define SOWBAN_AVX2(x) x
#else
#define SOWBAN_AVX2(x) break;
#endif
#if defined(__aarch64__) || defined(__ARM_NEON)
#define SOWBAN_NEON(x) x
#else
#define SOWBAN_NEON(x) break;
#endif

double max_abs_deviation(std::span<const double> v, double center) {
  SOWBAN_DISPATCH(max_abs_deviation, v, center);
}

Moments moments(std::span<const double> v, double shift) {
  SOWBAN_DISPATCH(moments, v, shift);
}

double sum(std::span<const double> v) { SOWBAN_DISPATCH(sum, v); }

}  // namespace sowban::simd
