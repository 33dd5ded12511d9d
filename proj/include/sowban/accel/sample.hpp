#pragma once

#include <array>

namespace sowban {

/// Accelerometer measurement range. Span and sensitivity are tied:
/// +-2g/256, +-4g/128, +-8g/64 LSB per g.
class RangeSetting {
 public:
  static constexpr RangeSetting g2() { return RangeSetting(2, 256); }
  static constexpr RangeSetting g4() { return RangeSetting(4, 128); }
  static constexpr RangeSetting g8() { return RangeSetting(8, 64); }

  constexpr int span_g() const { return span_; }
  constexpr int sensitivity() const { return sensitivity_; }
  constexpr int full_scale_counts() const { return span_ * sensitivity_; }

  constexpr bool operator==(const RangeSetting&) const = default;

 private:
  constexpr RangeSetting(int span, int sensitivity) : span_(span), sensitivity_(sensitivity) {}
  int span_;
  int sensitivity_;
};

enum class Axis { X = 0, Y = 1, Z = 2 };

struct AccelSample {
  double t = 0.0;  // seconds
  double x = 0.0;  // g
  double y = 0.0;
  double z = 0.0;
  std::array<RangeSetting, 3> range{RangeSetting::g8(), RangeSetting::g8(), RangeSetting::g8()};

  double axis(Axis a) const { return a == Axis::X ? x : (a == Axis::Y ? y : z); }
};

}  // namespace sowban
