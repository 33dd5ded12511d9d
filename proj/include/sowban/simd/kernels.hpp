#pragma once

// Reduction kernels used by the node signal pipelines. Each kernel has a
// scalar reference in `scalar::` and vector variants selected at runtime.

#include <cstddef>
#include <span>
#include <string_view>

namespace sowban::simd {

enum class Isa { Scalar, Avx2, Neon };

std::string_view isa_name(Isa isa);

/// Best ISA supported by this CPU and build.
Isa detected_isa();

/// ISA used by the dispatching entry points. Defaults to detected_isa(),
/// or to SOWBAN_SIMD=scalar|avx2|neon when set and supported.
Isa active_isa();

/// Overrides dispatch (tests and benchmarking). Returns false and leaves the
/// current choice untouched when `isa` is not available.
bool force_isa(Isa isa);

/// Sums of (v - shift) and (v - shift)^2. Shifting by a representative
/// sample keeps the variance well conditioned.
struct Moments {
  double shift = 0.0;
  double sum = 0.0;
  double sum_sq = 0.0;
  std::size_t n = 0;

  double mean() const;
  double variance() const;  // population variance
  double stddev() const;
};

double max_abs_deviation(std::span<const double> v, double center);
Moments moments(std::span<const double> v, double shift);
double sum(std::span<const double> v);

namespace scalar {
double max_abs_deviation(std::span<const double> v, double center);
Moments moments(std::span<const double> v, double shift);
double sum(std::span<const double> v);
}  // namespace scalar

#if defined(__x86_64__) || defined(__i386__)
namespace avx2 {
double max_abs_deviation(std::span<const double> v, double center);
Moments moments(std::span<const double> v, double shift);
double sum(std::span<const double> v);
}  // namespace avx2
#endif

#if defined(__aarch64__) || defined(__ARM_NEON)
namespace neon {
double max_abs_deviation(std::span<const double> v, double center);
Moments moments(std::span<const double> v, double shift);
double sum(std::span<const double> v);
}  // namespace neon
#endif

}  // namespace sowban::simd
