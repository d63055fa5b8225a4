#include "txfreq/device_agent.hpp"

#include <algorithm>
#include <sstream>

#include "txfreq/admm.hpp"
#include "txfreq/errors.hpp"

namespace txfreq {

std::string_view phase_name(AgentPhase phase) {
  switch (phase) {
    case AgentPhase::init:
      return "INIT";
    case AgentPhase::negotiating:
      return "NEGOTIATING";
    case AgentPhase::transmitting:
      return "TRANSMITTING";
    case AgentPhase::stopped:
      return "STOPPED";
  }
  return "?";
}

DeviceAgent::DeviceAgent(DeviceSpec spec) : spec_(std::move(spec)) {
  if (spec_.id.empty()) throw RejectedInput("device id must not be empty");
  if (!(spec_.a > 0.0)) throw RejectedInput("device data size must be positive");
  if (!(spec_.gamma >= 0.0)) throw RejectedInput("device minimum rate must be non-negative");
  x_ = z_ = spec_.gamma;
}

protocol::WireMessage DeviceAgent::hello() const {
  return {spec_.id, 0, protocol::Hello{spec_.a, spec_.gamma}};
}

void DeviceAgent::on_join_ack(const protocol::WireMessage& ack) {
  const auto* body = std::get_if<protocol::JoinAck>(&ack.payload);
  if (body == nullptr) throw ContractViolation("on_join_ack expects a JOIN_ACK message");
  if (phase_ == AgentPhase::stopped) throw ContractViolation("stopped device cannot rejoin");
  if (!(body->rho > 0.0)) throw RejectedInput("rho must be positive");
  if (phase_ == AgentPhase::init) {
    x_ = z_ = spec_.gamma;
    u_ = 0.0;
  }
  rho_ = body->rho;
  round_ = ack.round;
  converged_rate_.reset();
  phase_ = AgentPhase::negotiating;
}

protocol::WireMessage DeviceAgent::negotiate_round(const protocol::WireMessage& z_broadcast) {
  if (phase_ != AgentPhase::negotiating)
    throw ContractViolation("negotiate_round requires phase NEGOTIATING, not " +
                            std::string(phase_name(phase_)));
  const auto* body = std::get_if<protocol::ZBroadcast>(&z_broadcast.payload);
  if (body == nullptr) throw ContractViolation("negotiate_round expects a Z_BROADCAST message");
  const auto it = body->z.find(spec_.id);
  if (it == body->z.end())
    throw protocol::ProtocolError("z", "broadcast does not include device " + spec_.id);

  z_ = it->second;
  u_ = dual_update(u_, x_, z_);
  x_ = local_x_update(spec_.utility, z_, u_, rho_);
  round_ = z_broadcast.round;
  return {spec_.id, round_, protocol::XReport{x_ + u_}};
}

void DeviceAgent::enter_transmitting(const protocol::WireMessage& converged, Micros now) {
  if (phase_ != AgentPhase::negotiating)
    throw ContractViolation("enter_transmitting requires phase NEGOTIATING");
  const auto* body = std::get_if<protocol::Converged>(&converged.payload);
  if (body == nullptr) throw ContractViolation("enter_transmitting expects a CONVERGED message");
  const auto it = body->z.find(spec_.id);
  if (it == body->z.end())
    throw protocol::ProtocolError("z", "convergence notice does not include device " + spec_.id);
  const double rate = it->second;
  if (rate < spec_.gamma - 1e-6 || !(rate > 0.0)) {
    std::ostringstream msg;
    msg << "agreed rate " << rate << " Hz is below the minimum " << spec_.gamma << " Hz";
    throw ContractViolation(msg.str());
  }

  z_ = rate;
  u_ = dual_update(u_, x_, z_);
  converged_rate_ = rate;
  agreed_rate_ = rate;
  phase_ = AgentPhase::transmitting;
  round_ = converged.round;
  const auto effective = scheduled_rate(now);
  if (last_free_)
    next_due_ = std::max(now, *last_free_ + period_for_rate(*effective));
  else
    next_due_ = now;
}

std::optional<double> DeviceAgent::scheduled_rate(Micros now) const {
  if (!agreed_rate_ || phase_ == AgentPhase::stopped) return std::nullopt;
  if (manipulation_ && now >= manipulation_->at) return manipulation_->rate;
  return agreed_rate_;
}

std::optional<protocol::WireMessage> DeviceAgent::transmit_tick(Micros now) {
  if (!next_due_ || now < *next_due_) return std::nullopt;
  if (phase_ != AgentPhase::transmitting && phase_ != AgentPhase::negotiating) return std::nullopt;
  const auto rate = scheduled_rate(now);
  if (!rate) return std::nullopt;
  protocol::WireMessage packet{spec_.id, round_, protocol::Data{next_seq_++, now.count(), spec_.a}};
  // Provisional; send_completed moves it once the transport releases us.
  last_free_ = now;
  next_due_ = now + period_for_rate(*rate);
  return packet;
}

void DeviceAgent::send_completed(Micros free_at) {
  if (!next_due_) return;
  last_free_ = free_at;
  next_due_ = free_at + period_for_rate(*scheduled_rate(free_at));
}

void DeviceAgent::apply_manipulation(double override_rate, Micros at) {
  if (phase_ != AgentPhase::transmitting)
    throw ContractViolation("apply_manipulation requires phase TRANSMITTING");
  if (!(override_rate > 0.0)) throw RejectedInput("override rate must be positive");
  manipulation_ = Manipulation{override_rate, at};
  // A future activation is picked up by send_completed when it falls due.
  if (last_free_ && next_due_ && at <= *next_due_)
    next_due_ = std::max(at, *last_free_ + period_for_rate(override_rate));
}

protocol::WireMessage DeviceAgent::leave() {
  phase_ = AgentPhase::stopped;
  next_due_.reset();
  converged_rate_.reset();
  return {spec_.id, round_, protocol::Leave{}};
}

}  // namespace txfreq
