#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "txfreq/cloud_sink.hpp"
#include "txfreq/constraints.hpp"
#include "txfreq/protocol.hpp"
#include "txfreq/rate_estimator.hpp"
#include "txfreq/time.hpp"

namespace txfreq {

struct GatewayConfig {
  double c = 10.0;
  double d = 15.0;
  double rho = 1.0;
  double tol = 1e-4;
  int max_rounds = 1000;
  std::size_t window = 300;
  std::size_t min_samples = 30;
  std::optional<double> delta;    // nullopt: auto_delta per device
  double latency_bound_s = 0.005;  // feeds auto_delta
  bool auto_remediate = false;
  Micros barrier_deadline{1'000'000};
  SinkQuota sink;
  std::optional<std::filesystem::path> sink_log;
};

struct Outbound {
  std::string to;
  protocol::WireMessage message;
};

struct GatewayEvent {
  Micros at{0};
  std::string kind;
  nlohmann::ordered_json detail;
};

struct TraceRow {
  std::int64_t round = 0;
  std::string device_id;
  double s = 0.0;
  double z = 0.0;
  std::optional<double> primal;
  std::optional<double> dual;
};

struct PacketRecord {
  Micros arrival{0};
  std::string device_id;
  std::uint64_t seq = 0;
  std::optional<double> estimated_rate;
  std::optional<double> reference_z;
};

struct ResourceUsage {
  double total_rate = 0.0;        // Hz
  double total_data_rate = 0.0;   // size units per second
};

/// Projects the masked reports (ordered like the constraint set) and wraps
/// the result in a broadcast.
std::pair<std::vector<double>, protocol::WireMessage> z_round(
    const std::vector<std::pair<std::string, double>>& reports, const ConstraintSet& set,
    std::int64_t round);

/// Gateway state machine. It is transport agnostic: every input returns the
/// messages to send, and observations are drained by the caller.
///
/// The session table holds a_i, gamma_i, masked reports, consensus values and
/// arrival windows only; no utility information reaches the gateway.
class Gateway {
 public:
  explicit Gateway(GatewayConfig config);

  std::vector<Outbound> on_message(const protocol::WireMessage& message, Micros now);
  std::vector<Outbound> on_disconnect(const std::string& device_id, Micros now);
  std::vector<Outbound> on_timer(Micros now);

  /// Pending round-barrier deadline, if a round is waiting for reports.
  std::optional<Micros> next_deadline() const { return deadline_; }

  bool negotiating() const { return session_active_; }
  bool negotiation_failed() const { return failed_; }
  std::int64_t round() const { return round_; }
  std::vector<std::string> members() const;
  std::optional<double> reference_z(const std::string& device_id) const;
  std::optional<RateEstimate> estimate(const std::string& device_id) const;
  double delta_for(const std::string& device_id) const;
  ResourceUsage resource_usage() const;
  const std::vector<AnomalyEvent>& anomalies() const { return anomalies_; }
  const CloudSink& sink() const { return sink_; }
  const GatewayConfig& config() const { return config_; }
  const std::optional<ConstraintSet>& constraints() const { return constraints_; }

  nlohmann::ordered_json dump_state() const;

  std::vector<GatewayEvent> drain_events();
  std::vector<TraceRow> drain_trace();
  std::vector<PacketRecord> drain_packets();

 private:
  struct Session {
    double a = 0.0;
    double gamma = 0.0;
    std::optional<double> latest_s;
    std::optional<double> latest_z;
    std::optional<double> reference_z;
    std::optional<double> previous_u;  // s - z of the last completed round
    ArrivalWindow arrivals;
    bool alert_active = false;
  };

  std::vector<Outbound> handle_hello(const protocol::WireMessage& m, Micros now);
  std::vector<Outbound> handle_report(const protocol::WireMessage& m, Micros now);
  std::vector<Outbound> handle_data(const protocol::WireMessage& m, Micros now);
  std::vector<Outbound> remove_member(const std::string& id, const std::string& reason, Micros now);
  std::vector<Outbound> start_session(Micros now, const std::string& cause);
  std::vector<Outbound> complete_round(Micros now);
  void log(Micros at, std::string kind, nlohmann::ordered_json detail);

  GatewayConfig config_;
  CloudSink sink_;
  std::map<std::string, Session> sessions_;
  std::optional<ConstraintSet> constraints_;

  bool session_active_ = false;
  bool failed_ = false;
  std::int64_t round_ = 0;
  int session_rounds_ = 0;
  std::map<std::string, double> reports_;
  std::optional<Micros> deadline_;

  std::vector<AnomalyEvent> anomalies_;
  std::vector<GatewayEvent> events_;
  std::vector<TraceRow> trace_;
  std::vector<PacketRecord> packets_;
};

}  // namespace txfreq
