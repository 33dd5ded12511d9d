#include "sowban/relay/relay.hpp"

#include <cmath>

namespace sowban::relay {

DeltaConfig DeltaConfig::exact_mode() {
  DeltaConfig c;
  c.exact = true;
  c.whole_record = true;
  return c;
}

bool differs(const VitalsPacket& a, const VitalsPacket& b, const DeltaConfig& cfg) {
  if (a.activity != b.activity) return true;
  if (cfg.exact) {
    if (a.spo2 != b.spo2 || a.hr != b.hr || !(a.location == b.location)) return true;
  } else {
    if (std::fabs(a.spo2 - b.spo2) >= cfg.spo2_pts) return true;
    if (std::fabs(a.hr - b.hr) >= cfg.hr_bpm) return true;
    if (distance_m(a.location, b.location) >= cfg.location_m) return true;
  }
  return cfg.whole_record && a.flags != b.flags;
}

SendDecision should_send(const VitalsPacket& current, const DeltaState& state, const DeltaConfig& cfg) {
  SendDecision d{false, state};
  if (!state.bs_data2 || (cfg.fall_bypass && current.activity == StateId::Falling) ||
      differs(current, *state.bs_data2, cfg)) {
    d.send = true;
    d.state.bs_data2 = current;
  }
  return d;
}

Relay::Relay(std::string patient_id, DeltaConfig cfg, LocationSource location)
    : patient_id_(std::move(patient_id)), cfg_(cfg), location_(std::move(location)) {
  if (!location_) location_ = [](double) { return LatLon{}; };
}

void Relay::on_fragment(const fabric::Fragment& f) {
  if (f.patient_id != patient_id_) {
    ++stats_.foreign_fragments;
    return;
  }
  ++stats_.fragments;
  if (const auto* a = std::get_if<fabric::ActivityFragment>(&f.body)) {
    activity_ = a->state;
  } else {
    oxi_ = std::get<fabric::OxiFragment>(f.body);
  }
}

std::optional<VitalsPacket> Relay::epoch(double t) {
  ++stats_.epochs;
  if (!activity_ || !oxi_) {
    ++stats_.incomplete;
    return std::nullopt;
  }
  VitalsPacket p;
  p.patient_id = patient_id_;
  p.t = t;
  p.activity = *activity_;
  p.spo2 = oxi_->spo2;
  p.hr = oxi_->hr.value_or(0.0);
  p.flags = oxi_->flags;
  p.location = location_(t);
  last_ = p;

  SendDecision d = should_send(p, delta_, cfg_);
  delta_ = std::move(d.state);
  if (!d.send) {
    ++stats_.suppressed;
    return std::nullopt;
  }
  ++stats_.sent;
  return p;
}

}  // namespace sowban::relay
