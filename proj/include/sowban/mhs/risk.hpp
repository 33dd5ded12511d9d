#pragma once

#include <array>
#include <optional>
#include <string>
#include <vector>

#include "sowban/types.hpp"

namespace sowban::mhs {

inline constexpr std::size_t kRiskFeatures = 6;

/// Feature order: hr_deviation, spo2_deficit, activity, fall, spo2_drop, hr_delta.
std::array<std::string_view, kRiskFeatures> risk_feature_names();

struct RiskModel {
  std::array<double, kRiskFeatures> weights{0.08, 0.5, 0.3, 3.0, 0.3, 0.05};
  double bias = -2.0;
  double hr_low = 60.0;
  double hr_high = 100.0;
  double spo2_ref = 95.0;
  // hard rules
  double spo2_critical = 90.0;
  double hr_min = 40.0;
  double hr_max = 180.0;

  void validate() const;
};

nlohmann::ordered_json to_json(const RiskModel& m);
/// Missing keys keep their defaults. Throws Error{Schema}.
RiskModel risk_model_from_json(const nlohmann::json& j);

/// hr == 0 means no estimate: hr features are 0 and hr rules do not apply.
std::array<double, kRiskFeatures> risk_features(const VitalsPacket& p, const VitalsPacket* previous,
                                                const RiskModel& m);

enum class Severity { Warn, Critical };
std::string_view to_string(Severity s);

namespace rule {
inline constexpr unsigned kSpo2Low = 1u << 0;
inline constexpr unsigned kHrOutOfRange = 1u << 1;
inline constexpr unsigned kFall = 1u << 2;
}  // namespace rule

struct RiskResult {
  double p = 0.0;
  unsigned rules = 0;  // rule:: bits that fired
  bool alert = false;
  std::optional<Severity> severity;
  std::vector<std::string> causes;
};

/// p = sigmoid(w.x + b); alert iff p >= 0.5 or any hard rule fires.
/// Critical on a fall or spo2 below the critical level, warn otherwise.
RiskResult score_risk(const VitalsPacket& p, const VitalsPacket* previous, const RiskModel& m);

}  // namespace sowban::mhs
