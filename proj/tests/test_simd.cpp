#include <doctest.h>

#include <cmath>
#include <random>
#include <vector>

#include "sowban/simd/kernels.hpp"

using namespace sowban::simd;

namespace {

std::vector<double> random_vector(std::mt19937_64& rng, std::size_t n) {
  std::uniform_real_distribution<double> u(-5.0, 5.0);
  std::vector<double> v(n);
  for (auto& x : v) x = u(rng);
  return v;
}

void check_close(double a, double b) {
  CHECK(std::fabs(a - b) <= 1e-12 * std::max(1.0, std::fabs(b)));
}

template <class MaxFn, class MomFn, class SumFn>
void check_variant_matches_scalar(MaxFn vmax, MomFn vmom, SumFn vsum) {
  std::mt19937_64 rng(7);
  for (std::size_t n = 0; n < 70; ++n) {
    for (int rep = 0; rep < 5; ++rep) {
      const auto v = random_vector(rng, n);
      const double center = 0.3 * rep - 0.5;
      // max is order independent, so equality is exact
      CHECK(vmax(v, center) == scalar::max_abs_deviation(v, center));
      const Moments a = vmom(v, center);
      const Moments b = scalar::moments(v, center);
      CHECK(a.n == b.n);
      check_close(a.sum, b.sum);
      check_close(a.sum_sq, b.sum_sq);
      check_close(vsum(v), scalar::sum(v));
    }
  }
}

}  // namespace

TEST_CASE("scalar kernels against direct formulas") {
  const std::vector<double> v{1.0, -2.0, 0.5, 3.5};
  CHECK(scalar::max_abs_deviation(v, 1.0) == doctest::Approx(3.0));
  CHECK(scalar::sum(v) == doctest::Approx(3.0));
  const Moments m = scalar::moments(v, 0.0);
  CHECK(m.mean() == doctest::Approx(0.75));
  // population variance of {1,-2,0.5,3.5}
  CHECK(m.variance() == doctest::Approx((0.0625 + 7.5625 + 0.0625 + 7.5625) / 4.0));
  CHECK(scalar::max_abs_deviation({}, 3.0) == 0.0);
}

TEST_CASE("shifted moments do not depend on the shift") {
  std::mt19937_64 rng(3);
  auto v = random_vector(rng, 101);
  for (auto& x : v) x += 1000.0;
  const Moments a = moments(v, v.front());
  const Moments b = moments(v, 1000.0);
  CHECK(a.mean() == doctest::Approx(b.mean()).epsilon(1e-12));
  CHECK(a.variance() == doctest::Approx(b.variance()).epsilon(1e-9));
}

#if defined(__x86_64__) || defined(__i386__)
TEST_CASE("avx2 variants match the scalar reference") {
  if (!force_isa(Isa::Avx2)) {
    MESSAGE("AVX2 not available on this CPU; skipped");
    return;
  }
  check_variant_matches_scalar(avx2::max_abs_deviation, avx2::moments, avx2::sum);
  force_isa(detected_isa());
}
#endif

#if defined(__aarch64__) || defined(__ARM_NEON)
TEST_CASE("neon variants match the scalar reference") {
  check_variant_matches_scalar(neon::max_abs_deviation, neon::moments, neon::sum);
}
#endif

TEST_CASE("dispatch follows force_isa") {
  const Isa before = active_isa();
  REQUIRE(force_isa(Isa::Scalar));
  CHECK(active_isa() == Isa::Scalar);
  std::mt19937_64 rng(11);
  const auto v = random_vector(rng, 33);
  CHECK(max_abs_deviation(v, 0.1) == scalar::max_abs_deviation(v, 0.1));
  CHECK(sum(v) == scalar::sum(v));
  force_isa(before);
  CHECK(active_isa() == before);
  CHECK(force_isa(detected_isa()));
}
