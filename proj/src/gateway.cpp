#include "txfreq/gateway.hpp"

#include <cmath>

#include "txfreq/errors.hpp"
#include "txfreq/projection.hpp"

namespace txfreq {

using nlohmann::ordered_json;

std::pair<std::vector<double>, protocol::WireMessage> z_round(
    const std::vector<std::pair<std::string, double>>& reports, const ConstraintSet& set,
    std::int64_t round) {
  if (reports.size() != set.size()) throw RejectedInput("one report per device is required");
  std::vector<double> s;
  s.reserve(reports.size());
  for (const auto& [id, value] : reports) s.push_back(value);
  auto z = project_onto_constraints(s, set);
  protocol::ZBroadcast body;
  for (std::size_t i = 0; i < reports.size(); ++i) body.z[reports[i].first] = z[i];
  return {std::move(z), protocol::WireMessage{"gateway", round, std::move(body)}};
}

Gateway::Gateway(GatewayConfig config) : config_(std::move(config)), sink_(config_.sink, config_.sink_log) {
  if (!(config_.rho > 0.0)) throw RejectedInput("rho must be positive");
  if (!(config_.tol > 0.0)) throw RejectedInput("tolerance must be positive");
  if (config_.max_rounds < 2) throw RejectedInput("max_rounds must be at least 2");
  if (config_.delta && !(*config_.delta > 0.0)) throw RejectedInput("delta must be positive");
  if (config_.window < 2) throw RejectedInput("estimation window must be at least 2");
}

std::vector<std::string> Gateway::members() const {
  std::vector<std::string> out;
  for (const auto& [id, s] : sessions_) out.push_back(id);
  return out;
}

std::optional<double> Gateway::reference_z(const std::string& device_id) const {
  const auto it = sessions_.find(device_id);
  if (it == sessions_.end()) return std::nullopt;
  return it->second.reference_z;
}

std::optional<RateEstimate> Gateway::estimate(const std::string& device_id) const {
  const auto it = sessions_.find(device_id);
  if (it == sessions_.end()) return std::nullopt;
  auto est = it->second.arrivals.estimate();
  if (est) est->device_id = device_id;
  return est;
}

double Gateway::delta_for(const std::string& device_id) const {
  if (config_.delta) return *config_.delta;
  const auto ref = reference_z(device_id);
  return auto_delta(ref.value_or(0.0), config_.latency_bound_s);
}

ResourceUsage Gateway::resource_usage() const {
  ResourceUsage usage;
  for (const auto& [id, s] : sessions_) {
    if (!s.reference_z) continue;
    const auto est = s.arrivals.estimate();
    if (!est) continue;
    usage.total_rate += est->estimated_rate;
    usage.total_data_rate += s.a * est->estimated_rate;
  }
  return usage;
}

void Gateway::log(Micros at, std::string kind, ordered_json detail) {
  events_.push_back({at, std::move(kind), std::move(detail)});
}

std::vector<Outbound> Gateway::on_message(const protocol::WireMessage& m, Micros now) {
  using protocol::Tag;
  switch (m.tag()) {
    case Tag::hello:
      return handle_hello(m, now);
    case Tag::x_report:
      return handle_report(m, now);
    case Tag::data:
      return handle_data(m, now);
    case Tag::leave:
      if (sessions_.count(m.device_id) == 0) return {};
      return remove_member(m.device_id, "leave", now);
    default:
      log(now, "ignored", ordered_json{{"device", m.device_id}, {"tag", protocol::tag_name(m.tag())}});
      return {};
  }
}

std::vector<Outbound> Gateway::on_disconnect(const std::string& device_id, Micros now) {
  if (sessions_.count(device_id) == 0) return {};
  return remove_member(device_id, "disconnected", now);
}

std::vector<Outbound> Gateway::on_timer(Micros now) {
  if (!session_active_ || !deadline_ || now < *deadline_) return {};
  std::vector<std::string> missing;
  for (const auto& [id, s] : sessions_)
    if (reports_.count(id) == 0) missing.push_back(id);
  for (const auto& id : missing) {
    sessions_.erase(id);
    log(now, "leave", ordered_json{{"device", id}, {"reason", "barrier_timeout"}, {"round", round_}});
  }
  std::vector<Outbound> out;
  for (const auto& id : missing) out.push_back({id, {id, round_, protocol::Leave{}}});
  auto restarted = start_session(now, "membership");
  out.insert(out.end(), restarted.begin(), restarted.end());
  return out;
}

std::vector<Outbound> Gateway::handle_hello(const protocol::WireMessage& m, Micros now) {
  const auto& hello = std::get<protocol::Hello>(m.payload);
  if (sessions_.count(m.device_id) != 0) {
    log(now, "ignored", ordered_json{{"device", m.device_id}, {"tag", "HELLO"}, {"reason", "duplicate"}});
    return {};
  }
  std::vector<double> a;
  std::vector<double> gamma;
  for (const auto& [id, s] : sessions_) {
    a.push_back(s.a);
    gamma.push_back(s.gamma);
  }
  a.push_back(hello.a);
  gamma.push_back(hello.gamma);
  try {
    ConstraintSet candidate(config_.c, config_.d, a, gamma);
  } catch (const RejectedInput& e) {
    log(now, "join_rejected", ordered_json{{"device", m.device_id}, {"reason", e.what()}});
    return {{m.device_id, {m.device_id, round_, protocol::Leave{}}}};
  }
  Session session{hello.a, hello.gamma, {}, {}, {}, {}, ArrivalWindow(config_.window), false};
  sessions_.emplace(m.device_id, std::move(session));
  log(now, "join", ordered_json{{"device", m.device_id}, {"a", hello.a}, {"gamma", hello.gamma}});
  return start_session(now, "membership");
}

std::vector<Outbound> Gateway::remove_member(const std::string& id, const std::string& reason, Micros now) {
  sessions_.erase(id);
  reports_.erase(id);
  log(now, "leave", ordered_json{{"device", id}, {"reason", reason}});
  return start_session(now, "membership");
}

std::vector<Outbound> Gateway::start_session(Micros now, const std::string& cause) {
  reports_.clear();
  session_rounds_ = 0;
  failed_ = false;
  if (sessions_.empty()) {
    session_active_ = false;
    deadline_.reset();
    constraints_.reset();
    return {};
  }

  std::vector<double> a;
  std::vector<double> gamma;
  std::vector<double> warm;
  for (const auto& [id, s] : sessions_) {
    a.push_back(s.a);
    gamma.push_back(s.gamma);
    warm.push_back(s.latest_z.value_or(s.gamma));
  }
  constraints_.emplace(config_.c, config_.d, a, gamma);
  const auto z0 = project_onto_constraints(warm, *constraints_);

  ++round_;
  std::vector<Outbound> out;
  protocol::ZBroadcast broadcast;
  std::int64_t index = 0;
  for (auto& [id, s] : sessions_) {
    out.push_back({id, {id, round_, protocol::JoinAck{index, config_.rho, config_.c, config_.d}}});
    s.latest_z = z0[static_cast<std::size_t>(index)];
    s.previous_u.reset();
    broadcast.z[id] = z0[static_cast<std::size_t>(index)];
    ++index;
  }
  for (const auto& [id, s] : sessions_) out.push_back({id, {"gateway", round_, broadcast}});

  session_active_ = true;
  deadline_ = now + config_.barrier_deadline;
  ordered_json members = ordered_json::array();
  for (const auto& [id, s] : sessions_) members.push_back(id);
  log(now, "session_start", ordered_json{{"round", round_}, {"cause", cause}, {"members", members}});
  return out;
}

std::vector<Outbound> Gateway::handle_report(const protocol::WireMessage& m, Micros now) {
  const auto it = sessions_.find(m.device_id);
  if (!session_active_ || it == sessions_.end() || m.round != round_) {
    log(now, "stale_report", ordered_json{{"device", m.device_id}, {"round", m.round}, {"current", round_}});
    return {};
  }
  const double s = std::get<protocol::XReport>(m.payload).s;
  if (!std::isfinite(s)) {
    log(now, "ignored", ordered_json{{"device", m.device_id}, {"tag", "X_REPORT"}, {"reason", "non-finite"}});
    return {};
  }
  reports_[m.device_id] = s;
  if (reports_.size() < sessions_.size()) return {};
  return complete_round(now);
}

std::vector<Outbound> Gateway::complete_round(Micros now) {
  std::vector<std::pair<std::string, double>> ordered;
  for (const auto& [id, s] : sessions_) ordered.emplace_back(id, reports_.at(id));
  auto [z, broadcast] = z_round(ordered, *constraints_, round_);
  reports_.clear();
  ++session_rounds_;

  double primal_sq = 0.0;
  double dual_sq = 0.0;
  bool have_residuals = true;
  std::size_t i = 0;
  for (auto& [id, s] : sessions_) {
    const double u = ordered[i].second - z[i];
    if (s.previous_u)
      primal_sq += (u - *s.previous_u) * (u - *s.previous_u);
    else
      have_residuals = false;
    dual_sq += (z[i] - *s.latest_z) * (z[i] - *s.latest_z);
    s.previous_u = u;
    s.latest_s = ordered[i].second;
    s.latest_z = z[i];
    ++i;
  }
  std::optional<double> primal;
  std::optional<double> dual;
  if (have_residuals) {
    primal = std::sqrt(primal_sq);
    dual = config_.rho * std::sqrt(dual_sq);
  }
  i = 0;
  for (const auto& [id, s] : sessions_) trace_.push_back({round_, id, ordered[i++].second, *s.latest_z, primal, dual});

  ordered_json detail{{"round", round_}, {"session_round", session_rounds_}};
  detail["primal"] = primal ? ordered_json(*primal) : ordered_json(nullptr);
  detail["dual"] = dual ? ordered_json(*dual) : ordered_json(nullptr);
  log(now, "round", std::move(detail));

  std::vector<Outbound> out;
  if (session_rounds_ >= 2 && primal && *primal < config_.tol && *dual < config_.tol) {
    protocol::Converged body;
    ordered_json rates = ordered_json::object();
    for (auto& [id, s] : sessions_) {
      const double agreed = *s.latest_z;
      body.z[id] = agreed;
      rates[id] = agreed;
      // A changed reference invalidates the window collected at the old rate.
      if (!s.reference_z || std::abs(*s.reference_z - agreed) > 1e-6) {
        s.arrivals.clear();
        s.alert_active = false;
      }
      s.reference_z = agreed;
    }
    for (const auto& [id, s] : sessions_) out.push_back({id, {"gateway", round_, body}});
    session_active_ = false;
    deadline_.reset();
    log(now, "converged", ordered_json{{"round", round_}, {"session_rounds", session_rounds_}, {"z", rates}});
    return out;
  }
  if (session_rounds_ >= config_.max_rounds) {
    session_active_ = false;
    failed_ = true;
    deadline_.reset();
    log(now, "negotiation_failed", ordered_json{{"round", round_}, {"session_rounds", session_rounds_}});
    return out;
  }

  ++round_;
  broadcast.round = round_;
  for (const auto& [id, s] : sessions_) out.push_back({id, broadcast});
  deadline_ = now + config_.barrier_deadline;
  return out;
}

std::vector<Outbound> Gateway::handle_data(const protocol::WireMessage& m, Micros now) {
  const auto it = sessions_.find(m.device_id);
  if (it == sessions_.end()) {
    log(now, "ignored", ordered_json{{"device", m.device_id}, {"tag", "DATA"}, {"reason", "not a member"}});
    return {};
  }
  Session& s = it->second;
  const auto& data = std::get<protocol::Data>(m.payload);
  s.arrivals.push(now);
  auto est = s.arrivals.estimate();
  if (est) est->device_id = m.device_id;

  const WriteResult written = sink_.write({m.device_id, data.seq, Micros{data.send_ts_us}, now, data.size});
  if (written != WriteResult::accepted)
    log(now, "sink_rejected", ordered_json{{"device", m.device_id}, {"seq", data.seq},
                                           {"result", write_result_name(written)}});

  packets_.push_back({now, m.device_id, data.seq,
                      est ? std::optional<double>(est->estimated_rate) : std::nullopt, s.reference_z});

  std::vector<Outbound> out;
  if (!s.reference_z || !est) return out;
  const double delta = delta_for(m.device_id);
  const auto event = detect_anomaly(*est, *s.reference_z, delta, config_.min_samples, now);
  if (event && !s.alert_active) {
    s.alert_active = true;
    anomalies_.push_back(*event);
    log(now, "alert", ordered_json{{"device", m.device_id}, {"estimated_rate", event->estimated_rate},
                                   {"reference_z", event->reference_z}, {"delta", delta},
                                   {"samples", est->sample_count}});
    out.push_back({m.device_id, {m.device_id, round_,
                                 protocol::Alert{event->estimated_rate, event->reference_z, delta}}});
    if (config_.auto_remediate && !session_active_) {
      auto restarted = start_session(now, "remediation");
      out.insert(out.end(), restarted.begin(), restarted.end());
    }
  } else if (!event && s.alert_active && est->sample_count >= config_.min_samples) {
    s.alert_active = false;
    log(now, "alert_cleared", ordered_json{{"device", m.device_id}, {"estimated_rate", est->estimated_rate}});
  }
  return out;
}

ordered_json Gateway::dump_state() const {
  ordered_json members = ordered_json::array();
  for (const auto& [id, s] : sessions_) {
    ordered_json row{{"device_id", id}, {"a", s.a}, {"gamma", s.gamma}};
    row["latest_s"] = s.latest_s ? ordered_json(*s.latest_s) : ordered_json(nullptr);
    row["latest_z"] = s.latest_z ? ordered_json(*s.latest_z) : ordered_json(nullptr);
    row["reference_z"] = s.reference_z ? ordered_json(*s.reference_z) : ordered_json(nullptr);
    row["arrivals"] = s.arrivals.size();
    const auto est = s.arrivals.estimate();
    row["estimated_rate"] = est ? ordered_json(est->estimated_rate) : ordered_json(nullptr);
    row["alert_active"] = s.alert_active;
    members.push_back(std::move(row));
  }
  return ordered_json{{"c", config_.c},
                      {"d", config_.d},
                      {"rho", config_.rho},
                      {"round", round_},
                      {"negotiating", session_active_},
                      {"members", members},
                      {"anomalies", anomalies_.size()},
                      {"sink_records", sink_.dump().size()},
                      {"sink_congestion_errors", sink_.congestion_errors()}};
}

std::vector<GatewayEvent> Gateway::drain_events() { return std::exchange(events_, {}); }
std::vector<TraceRow> Gateway::drain_trace() { return std::exchange(trace_, {}); }
std::vector<PacketRecord> Gateway::drain_packets() { return std::exchange(packets_, {}); }

}  // namespace txfreq
