#pragma once

#include <optional>
#include <string>

#include "txfreq/protocol.hpp"
#include "txfreq/time.hpp"
#include "txfreq/utility.hpp"

namespace txfreq {

struct DeviceSpec {
  std::string id;
  double a = 1.0;      // data size per write
  double gamma = 0.0;  // minimum rate, Hz
  UtilityFunction utility;
};

enum class AgentPhase { init, negotiating, transmitting, stopped };

std::string_view phase_name(AgentPhase phase);

/// Edge-device state machine. The utility function never leaves this object:
/// outbound messages only carry a_i, gamma_i, masked reports and data packets.
///
/// A device keeps streaming at its last agreed rate while a renegotiation is
/// in progress; only a CONVERGED message switches the send schedule.
class DeviceAgent {
 public:
  explicit DeviceAgent(DeviceSpec spec);

  const std::string& id() const { return spec_.id; }
  AgentPhase phase() const { return phase_; }

  protocol::WireMessage hello() const;

  /// JOIN_ACK starts (or restarts) negotiation. A fresh join resets x = z =
  /// gamma and u = 0; an existing member keeps its x and u as a warm start.
  void on_join_ack(const protocol::WireMessage& ack);

  /// u <- u + x - z_i, then x <- local_x_update(z_i, u); reports s = x + u.
  protocol::WireMessage negotiate_round(const protocol::WireMessage& z_broadcast);

  /// Arms the scheduler at the agreed rate z_i. Throws ContractViolation when
  /// z_i is below the device's minimum rate.
  void enter_transmitting(const protocol::WireMessage& converged, Micros now);

  /// DATA packet when the schedule is due at `now`, otherwise nothing.
  std::optional<protocol::WireMessage> transmit_tick(Micros now);

  /// The transport released the sender at `free_at`; the next send is due one
  /// period later, so transport latency stretches the effective period.
  void send_completed(Micros free_at);

  /// From `at` onward the scheduler uses `override_rate` instead of the agreed
  /// rate. Negotiation state is untouched.
  void apply_manipulation(double override_rate, Micros at);

  protocol::WireMessage leave();

  double x() const { return x_; }
  double u() const { return u_; }
  double z() const { return z_; }
  double rho() const { return rho_; }
  std::optional<double> converged_rate() const { return converged_rate_; }
  std::optional<double> scheduled_rate(Micros now) const;
  std::optional<Micros> next_send_due() const { return next_due_; }
  std::uint64_t packets_sent() const { return next_seq_; }

 private:
  struct Manipulation {
    double rate;
    Micros at;
  };

  DeviceSpec spec_;
  AgentPhase phase_ = AgentPhase::init;
  double x_ = 0.0;
  double u_ = 0.0;
  double z_ = 0.0;
  double rho_ = 1.0;
  std::int64_t round_ = 0;
  std::optional<double> converged_rate_;
  std::optional<double> agreed_rate_;  // survives renegotiation
  std::optional<Manipulation> manipulation_;
  std::optional<Micros> next_due_;
  std::optional<Micros> last_free_;
  std::uint64_t next_seq_ = 0;
};

}  // namespace txfreq
