#include "txfreq/runner.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <fstream>
#include <iomanip>
#include <queue>
#include <sstream>

#include "txfreq/errors.hpp"
#include "txfreq/transport.hpp"

namespace txfreq {
namespace {

using nlohmann::ordered_json;

std::string fmt(double v) {
  std::ostringstream os;
  os << std::setprecision(12) << v;
  return os.str();
}

std::string fmt(const std::optional<double>& v) { return v ? fmt(*v) : std::string(); }

std::ofstream open_out(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::out | std::ios::trunc);
  if (!out) throw std::ios_base::failure("cannot write " + path.string());
  return out;
}

std::vector<std::string> initial_members(const ScenarioConfig& config) {
  double first = std::numeric_limits<double>::infinity();
  for (const auto& d : config.devices) first = std::min(first, d.join_time_s);
  std::vector<std::string> ids;
  for (const auto& d : config.devices)
    if (d.join_time_s == first) ids.push_back(d.id);
  return ids;
}

// Timers fire in (time, kind, device, insertion) order.
enum class TimerKind { join = 0, leave = 1, manipulation = 2, barrier = 3, tick = 4, usage = 5 };

struct Timer {
  Micros at{0};
  TimerKind kind = TimerKind::tick;
  std::string device;
  std::uint64_t seq = 0;

  bool operator>(const Timer& o) const {
    return std::tie(at, kind, device, seq) > std::tie(o.at, o.kind, o.device, o.seq);
  }
};

class SimulatedRun {
 public:
  SimulatedRun(const ScenarioConfig& config, GatewayConfig gateway_config, TransportConfig transport_config)
      : config_(config), net_(std::move(transport_config)), gateway_(std::move(gateway_config)) {}

  RunOutcome execute();

 private:
  void push_timer(Micros at, TimerKind kind, const std::string& device = {}) {
    timers_.push(Timer{at, kind, device, timer_seq_++});
  }
  void dispatch(const Delivery& delivery);
  void deliver_to_agent(DeviceAgent& agent, const protocol::WireMessage& message, Micros now);
  void fire(const Timer& timer);
  void send_from_gateway(std::vector<Outbound> outbound);
  void send_from_agent(const std::string& id, const protocol::WireMessage& message);
  void schedule_tick(const std::string& id);
  void schedule_barrier();
  void drain_gateway();

  const ScenarioConfig& config_;
  SimulatedTransport net_;
  Gateway gateway_;
  std::map<std::string, DeviceAgent> agents_;
  std::map<std::string, Micros> scheduled_tick_;
  std::optional<Micros> scheduled_barrier_;
  std::priority_queue<Timer, std::vector<Timer>, std::greater<>> timers_;
  std::uint64_t timer_seq_ = 0;
  RunOutcome outcome_;
};

void SimulatedRun::drain_gateway() {
  for (auto& e : gateway_.drain_events()) outcome_.event_log.push_back(detail::format_event(e));
  for (auto& r : gateway_.drain_trace()) outcome_.trace.push_back(std::move(r));
  for (auto& p : gateway_.drain_packets()) outcome_.packets.push_back(std::move(p));
}

void SimulatedRun::send_from_gateway(std::vector<Outbound> outbound) {
  std::deque<Outbound> pending(outbound.begin(), outbound.end());
  while (!pending.empty()) {
    Outbound out = std::move(pending.front());
    pending.pop_front();
    try {
      net_.send(kGatewayEndpoint, out.to, out.message);
    } catch (const TransportError&) {
      auto more = gateway_.on_disconnect(out.to, net_.now());
      pending.insert(pending.end(), more.begin(), more.end());
    }
  }
  drain_gateway();
  schedule_barrier();
}

void SimulatedRun::send_from_agent(const std::string& id, const protocol::WireMessage& message) {
  const auto receipt = net_.send(id, kGatewayEndpoint, message);
  if (message.tag() == protocol::Tag::data) agents_.at(id).send_completed(receipt.sender_free_at);
}

void SimulatedRun::schedule_tick(const std::string& id) {
  const auto due = agents_.at(id).next_send_due();
  if (!due) {
    scheduled_tick_.erase(id);
    return;
  }
  const auto it = scheduled_tick_.find(id);
  if (it != scheduled_tick_.end() && it->second == *due) return;
  scheduled_tick_[id] = *due;
  push_timer(*due, TimerKind::tick, id);
}

void SimulatedRun::schedule_barrier() {
  const auto deadline = gateway_.next_deadline();
  if (!deadline || deadline == scheduled_barrier_) return;
  scheduled_barrier_ = deadline;
  push_timer(*deadline, TimerKind::barrier);
}

void SimulatedRun::dispatch(const Delivery& delivery) {
  outcome_.wire_log.push_back(std::to_string(delivery.at.count()) + ' ' + delivery.from + ' ' + delivery.to +
                              ' ' + delivery.line.substr(0, delivery.line.size() - 1));
  const auto message = protocol::decode(delivery.line);
  if (delivery.to == kGatewayEndpoint) {
    send_from_gateway(gateway_.on_message(message, delivery.at));
    return;
  }
  const auto it = agents_.find(delivery.to);
  if (it == agents_.end()) return;
  deliver_to_agent(it->second, message, delivery.at);
  schedule_tick(delivery.to);
}

void SimulatedRun::deliver_to_agent(DeviceAgent& agent, const protocol::WireMessage& message, Micros now) {
  using protocol::Tag;
  switch (message.tag()) {
    case Tag::join_ack:
      agent.on_join_ack(message);
      break;
    case Tag::z_broadcast:
      if (agent.phase() == AgentPhase::negotiating) send_from_agent(agent.id(), agent.negotiate_round(message));
      break;
    case Tag::converged:
      if (agent.phase() == AgentPhase::negotiating) agent.enter_transmitting(message, now);
      break;
    case Tag::leave:
      // Rejected join or dropped by the gateway.
      agent.leave();
      net_.disconnect(agent.id());
      break;
    default:
      break;
  }
}

void SimulatedRun::fire(const Timer& timer) {
  const Micros now = timer.at;
  switch (timer.kind) {
    case TimerKind::join: {
      const auto& dev = config_.device(timer.device);
      auto [it, inserted] = agents_.emplace(dev.id, DeviceAgent(config_.spec_for(dev)));
      net_.connect(dev.id);
      send_from_agent(dev.id, it->second.hello());
      break;
    }
    case TimerKind::leave: {
      auto it = agents_.find(timer.device);
      if (it == agents_.end() || it->second.phase() == AgentPhase::stopped) break;
      send_from_agent(timer.device, it->second.leave());
      net_.disconnect(timer.device);
      scheduled_tick_.erase(timer.device);
      break;
    }
    case TimerKind::manipulation: {
      auto it = agents_.find(timer.device);
      if (it == agents_.end() || it->second.phase() != AgentPhase::transmitting) break;
      const auto& m = *config_.device(timer.device).manipulation;
      it->second.apply_manipulation(m.override_rate, now);
      outcome_.manipulation_started[timer.device] = now;
      outcome_.event_log.push_back(detail::format_event(
          {now, "manipulation", ordered_json{{"device", timer.device}, {"override_rate", m.override_rate}}}));
      schedule_tick(timer.device);
      break;
    }
    case TimerKind::barrier:
      if (scheduled_barrier_ == now) scheduled_barrier_.reset();
      send_from_gateway(gateway_.on_timer(now));
      break;
    case TimerKind::tick: {
      const auto sched = scheduled_tick_.find(timer.device);
      if (sched == scheduled_tick_.end() || sched->second != now) break;
      scheduled_tick_.erase(sched);
      auto& agent = agents_.at(timer.device);
      if (auto packet = agent.transmit_tick(now)) send_from_agent(timer.device, *packet);
      schedule_tick(timer.device);
      break;
    }
    case TimerKind::usage:
      outcome_.usage.push_back({to_seconds(now), gateway_.resource_usage()});
      break;
  }
}

RunOutcome SimulatedRun::execute() {
  net_.connect(kGatewayEndpoint);
  const Micros end = from_seconds(config_.duration_s);
  for (const auto& dev : config_.devices) {
    push_timer(from_seconds(dev.join_time_s), TimerKind::join, dev.id);
    if (dev.leave_time_s) push_timer(from_seconds(*dev.leave_time_s), TimerKind::leave, dev.id);
    if (dev.manipulation) push_timer(from_seconds(dev.manipulation->at_time_s), TimerKind::manipulation, dev.id);
  }
  for (Micros t{1'000'000}; t <= end; t += Micros{1'000'000}) push_timer(t, TimerKind::usage);

  for (;;) {
    const auto next_net = net_.next_delivery_time();
    const std::optional<Micros> next_timer =
        timers_.empty() ? std::nullopt : std::optional<Micros>(timers_.top().at);
    if (!next_net && !next_timer) break;
    const Micros t = std::min(next_net.value_or(Micros::max()), next_timer.value_or(Micros::max()));
    if (t > end) break;
    if (next_net && *next_net <= t) {
      for (const auto& delivery : net_.advance_clock(t)) dispatch(delivery);
    } else {
      net_.advance_clock(t);
      const Timer timer = timers_.top();
      timers_.pop();
      fire(timer);
    }
    drain_gateway();
  }
  net_.advance_clock(end);
  drain_gateway();
  detail::finalize_outcome(config_, gateway_, outcome_);
  if (std::any_of(outcome_.event_log.begin(), outcome_.event_log.end(), [](const std::string& line) {
        return line.find("\"event\":\"negotiation_failed\"") != std::string::npos;
      })) {
    outcome_.exit_code = kExitNonConvergence;
    outcome_.error = "negotiation did not converge within max_iter rounds";
  }
  return std::move(outcome_);
}

}  // namespace

SolveReport solve_scenario(const ScenarioConfig& config, const std::vector<std::string>& device_ids) {
  SolveReport report;
  report.device_ids = device_ids;
  std::vector<UtilityFunction> utilities;
  std::vector<double> a;
  std::vector<double> gamma;
  for (const auto& id : device_ids) {
    const auto& dev = config.device(id);
    utilities.push_back(config.utility_for(dev));
    a.push_back(dev.a);
    gamma.push_back(dev.gamma);
  }
  const ConstraintSet set(config.gateway.c, config.gateway.d, a, gamma);
  report.result = solve_centralized(utilities, set,
                                    {config.gateway.rho, config.gateway.tol, config.gateway.max_rounds});
  report.admm_utility = total_utility(utilities, report.result.x_star);
  report.average_utility = total_utility(utilities, average_allocation(config.gateway.c, utilities.size()));
  report.proportional_utility = total_utility(utilities, proportional_allocation(config.gateway.c, a));
  return report;
}

SolveReport solve_scenario(const ScenarioConfig& config) {
  std::vector<std::string> ids;
  for (const auto& d : config.devices) ids.push_back(d.id);
  return solve_scenario(config, ids);
}

RunOutcome run_simulated(const ScenarioConfig& config, const RunOptions& options) {
  TransportConfig transport = config.transport;
  if (options.seed) transport.seed = *options.seed;
  const auto out_dir = options.output_dir.value_or(config.output_dir);

  RunOutcome infeasible;
  try {
    std::vector<double> a;
    std::vector<double> gamma;
    for (const auto& id : initial_members(config)) {
      a.push_back(config.device(id).a);
      gamma.push_back(config.device(id).gamma);
    }
    ConstraintSet check(config.gateway.c, config.gateway.d, a, gamma);
  } catch (const InfeasibleConstraints& e) {
    infeasible.exit_code = kExitInfeasible;
    infeasible.error = e.what();
    return infeasible;
  }

  GatewayConfig gateway_config = config.gateway;
  if (options.write_artifacts) {
    std::filesystem::create_directories(out_dir);
    gateway_config.sink_log = out_dir / "sink.csv";
  }
  SimulatedRun run(config, gateway_config, transport);
  RunOutcome outcome = run.execute();
  if (options.write_artifacts) detail::write_artifacts(config, out_dir, outcome);
  return outcome;
}

RunOutcome run_scenario(const ScenarioConfig& config, const RunOptions& options) {
  if (config.transport.mode == TransportConfig::Mode::socket) return run_socket(config, options);
  return run_simulated(config, options);
}

namespace detail {

std::string format_event(const GatewayEvent& event) {
  ordered_json line{{"t_us", event.at.count()}, {"event", event.kind}};
  for (const auto& [key, value] : event.detail.items()) line[key] = value;
  return line.dump();
}

void finalize_outcome(const ScenarioConfig& config, Gateway& gateway, RunOutcome& outcome) {
  outcome.anomalies = gateway.anomalies();
  outcome.final_usage = gateway.resource_usage();
  outcome.sink_records = gateway.sink().dump().size();
  outcome.sink_congestion_errors = gateway.sink().congestion_errors();
  outcome.gateway_state = gateway.dump_state();

  const auto members = gateway.members();
  if (members.empty()) return;
  SolveReport solved;
  try {
    solved = solve_scenario(config, members);
  } catch (const InfeasibleConstraints&) {
    return;
  }
  for (std::size_t i = 0; i < members.size(); ++i) {
    DeviceSummary row;
    row.device_id = members[i];
    row.theoretical = solved.result.x_star[i];
    if (const auto est = gateway.estimate(members[i])) {
      row.estimated = est->estimated_rate;
      row.abs_error = std::abs(row.theoretical - est->estimated_rate);
    }
    outcome.summary.push_back(std::move(row));
  }
  outcome.utility = UtilitySummary{solved.admm_utility, solved.average_utility, solved.proportional_utility};
}

void write_artifacts(const ScenarioConfig& config, const std::filesystem::path& dir, const RunOutcome& outcome) {
  std::filesystem::create_directories(dir);
  {
    auto out = open_out(dir / "trace.csv");
    out << "round,device,s,z,primal_residual,dual_residual\n";
    for (const auto& r : outcome.trace)
      out << r.round << ',' << r.device_id << ',' << fmt(r.s) << ',' << fmt(r.z) << ',' << fmt(r.primal) << ','
          << fmt(r.dual) << '\n';
  }
  {
    auto out = open_out(dir / "packets.csv");
    out << "arrival_us,device,seq,estimated_rate,reference_z\n";
    for (const auto& p : outcome.packets)
      out << p.arrival.count() << ',' << p.device_id << ',' << p.seq << ',' << fmt(p.estimated_rate) << ','
          << fmt(p.reference_z) << '\n';
  }
  {
    auto out = open_out(dir / "usage.csv");
    out << "t_s,total_rate,total_data_rate,c,d\n";
    for (const auto& u : outcome.usage)
      out << fmt(u.t_s) << ',' << fmt(u.usage.total_rate) << ',' << fmt(u.usage.total_data_rate) << ','
          << fmt(config.gateway.c) << ',' << fmt(config.gateway.d) << '\n';
  }
  {
    auto out = open_out(dir / "summary.csv");
    out << "device,theoretical,estimated,abs_error\n";
    for (const auto& s : outcome.summary)
      out << s.device_id << ',' << fmt(s.theoretical) << ',' << fmt(s.estimated) << ',' << fmt(s.abs_error) << '\n';
  }
  if (outcome.utility) {
    auto out = open_out(dir / "utility.csv");
    out << "allocation,utility,reference,gap\n";
    const auto row = [&](const char* name, double value, const std::optional<double>& reference) {
      out << name << ',' << fmt(value) << ',' << fmt(reference) << ','
          << (reference ? fmt(*reference - value) : std::string()) << '\n';
    };
    row("admm", outcome.utility->admm, config.reference_utility.admm);
    row("average", outcome.utility->average, config.reference_utility.average);
    row("proportional", outcome.utility->proportional, config.reference_utility.proportional);
  }
  {
    auto out = open_out(dir / "events.jsonl");
    for (const auto& line : outcome.event_log) out << line << '\n';
  }
  {
    auto out = open_out(dir / "wire.log");
    for (const auto& line : outcome.wire_log) out << line << '\n';
  }
  {
    auto out = open_out(dir / "gateway_state.json");
    out << outcome.gateway_state.dump(2) << '\n';
  }
}

}  // namespace detail
}  // namespace txfreq
