#include "sowban/mhs/risk.hpp"

#include <cmath>

namespace sowban::mhs {

std::array<std::string_view, kRiskFeatures> risk_feature_names() {
  return {"hr_deviation", "spo2_deficit", "activity", "fall", "spo2_drop", "hr_delta"};
}

void RiskModel::validate() const {
  for (double w : weights) {
    if (!std::isfinite(w)) throw Error(ErrorKind::Schema, "risk weights must be finite");
  }
  if (!std::isfinite(bias)) throw Error(ErrorKind::Schema, "risk bias must be finite");
  if (!(hr_low < hr_high) || !(hr_min < hr_max)) throw Error(ErrorKind::Schema, "hr bands must be ordered");
}

nlohmann::ordered_json to_json(const RiskModel& m) {
  nlohmann::ordered_json j;
  const auto names = risk_feature_names();
  for (std::size_t i = 0; i < kRiskFeatures; ++i) j["weights"][std::string(names[i])] = m.weights[i];
  j["bias"] = m.bias;
  j["hr_low"] = m.hr_low;
  j["hr_high"] = m.hr_high;
  j["spo2_ref"] = m.spo2_ref;
  j["spo2_critical"] = m.spo2_critical;
  j["hr_min"] = m.hr_min;
  j["hr_max"] = m.hr_max;
  return j;
}

RiskModel risk_model_from_json(const nlohmann::json& j) {
  RiskModel m;
  if (!j.is_object()) throw Error(ErrorKind::Schema, "risk model must be an object");
  auto num = [&](const char* key, double& out) {
    if (!j.contains(key)) return;
    if (!j[key].is_number()) throw Error(ErrorKind::Schema, std::string("'") + key + "' must be a number");
    out = j[key].get<double>();
  };
  if (j.contains("weights")) {
    const auto& w = j["weights"];
    if (!w.is_object()) throw Error(ErrorKind::Schema, "'weights' must be an object");
    const auto names = risk_feature_names();
    for (const auto& [k, v] : w.items()) {
      std::size_t i = 0;
      while (i < kRiskFeatures && names[i] != k) ++i;
      if (i == kRiskFeatures) throw Error(ErrorKind::Schema, "unknown risk feature '" + k + "'");
      if (!v.is_number()) throw Error(ErrorKind::Schema, "weight '" + k + "' must be a number");
      m.weights[i] = v.get<double>();
    }
  }
  num("bias", m.bias);
  num("hr_low", m.hr_low);
  num("hr_high", m.hr_high);
  num("spo2_ref", m.spo2_ref);
  num("spo2_critical", m.spo2_critical);
  num("hr_min", m.hr_min);
  num("hr_max", m.hr_max);
  m.validate();
  return m;
}

std::array<double, kRiskFeatures> risk_features(const VitalsPacket& p, const VitalsPacket* previous,
                                                const RiskModel& m) {
  std::array<double, kRiskFeatures> x{};
  const bool hr_valid = p.hr > 0.0;
  if (hr_valid) x[0] = std::max(0.0, m.hr_low - p.hr) + std::max(0.0, p.hr - m.hr_high);
  x[1] = std::max(0.0, m.spo2_ref - p.spo2);
  x[2] = static_cast<double>(to_int(p.activity) - 1);
  x[3] = p.activity == StateId::Falling ? 1.0 : 0.0;
  if (previous) {
    x[4] = std::max(0.0, previous->spo2 - p.spo2);
    if (hr_valid && previous->hr > 0.0) x[5] = std::fabs(p.hr - previous->hr);
  }
  return x;
}

std::string_view to_string(Severity s) { return s == Severity::Warn ? "warn" : "critical"; }

RiskResult score_risk(const VitalsPacket& p, const VitalsPacket* previous, const RiskModel& m) {
  const auto x = risk_features(p, previous, m);
  double z = m.bias;
  for (std::size_t i = 0; i < kRiskFeatures; ++i) z += m.weights[i] * x[i];
  RiskResult r;
  r.p = 1.0 / (1.0 + std::exp(-z));

  if (p.spo2 < m.spo2_critical) {
    r.rules |= rule::kSpo2Low;
    r.causes.emplace_back("spo2_low");
  }
  if (p.hr > 0.0 && (p.hr < m.hr_min || p.hr > m.hr_max)) {
    r.rules |= rule::kHrOutOfRange;
    r.causes.emplace_back("hr_out_of_range");
  }
  if (p.activity == StateId::Falling) {
    r.rules |= rule::kFall;
    r.causes.emplace_back("fall");
  }
  if (r.p >= 0.5) r.causes.emplace_back("risk_score");

  r.alert = r.p >= 0.5 || r.rules != 0;
  if (r.alert) {
    r.severity = (r.rules & (rule::kFall | rule::kSpo2Low)) ? Severity::Critical : Severity::Warn;
  }
  return r;
}

}  // namespace sowban::mhs
