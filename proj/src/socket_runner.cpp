#include <poll.h>

#include <algorithm>
#include <atomic>
#include <mutex>
#include <thread>

#include "txfreq/errors.hpp"
#include "txfreq/runner.hpp"
#include "txfreq/socket_transport.hpp"

namespace txfreq {
namespace {

using Clock = std::chrono::steady_clock;

// Shared log sinks for the gateway and agent threads.
struct SharedLogs {
  std::mutex mutex;
  std::vector<std::string> wire;
  std::vector<std::string> events;
  std::map<std::string, Micros> manipulation_started;

  void wire_line(Micros at, const std::string& from, const std::string& to, const std::string& line) {
    std::lock_guard lock(mutex);
    wire.push_back(std::to_string(at.count()) + ' ' + from + ' ' + to + ' ' + line);
  }
  void event(const GatewayEvent& e) {
    std::lock_guard lock(mutex);
    events.push_back(detail::format_event(e));
  }
};

class SocketRun {
 public:
  SocketRun(const ScenarioConfig& config, GatewayConfig gateway_config)
      : config_(config),
        gateway_(std::move(gateway_config)),
        listener_(config.transport.host, config.transport.port),
        end_(from_seconds(config.duration_s)) {}

  RunOutcome execute();

 private:
  void gateway_loop();
  void agent_loop(const DeviceConfig& device);
  void send_outbound(std::vector<Outbound> outbound);
  void drain_gateway();

  const ScenarioConfig& config_;
  Gateway gateway_;
  LineListener listener_;
  SocketTransport transport_;
  Micros end_;
  std::atomic<bool> stop_{false};
  SharedLogs logs_;
  RunOutcome outcome_;
};

void SocketRun::drain_gateway() {
  for (auto& e : gateway_.drain_events()) logs_.event(e);
  for (auto& r : gateway_.drain_trace()) outcome_.trace.push_back(std::move(r));
  for (auto& p : gateway_.drain_packets()) outcome_.packets.push_back(std::move(p));
}

void SocketRun::send_outbound(std::vector<Outbound> outbound) {
  for (std::size_t i = 0; i < outbound.size(); ++i) {
    try {
      transport_.send(kGatewayEndpoint, outbound[i].to, outbound[i].message);
    } catch (const TransportError&) {
      transport_.detach(outbound[i].to);
      auto more = gateway_.on_disconnect(outbound[i].to, transport_.now());
      outbound.insert(outbound.end(), more.begin(), more.end());
    }
  }
  drain_gateway();
}

void SocketRun::gateway_loop() {
  struct Peer {
    std::shared_ptr<LineSocket> socket;
    std::string id;  // empty until the HELLO arrives
  };
  std::vector<Peer> peers;
  Micros next_usage{1'000'000};

  while (true) {
    const Micros now = transport_.now();
    if (now >= end_) break;
    if (now >= next_usage) {
      outcome_.usage.push_back({to_seconds(next_usage), gateway_.resource_usage()});
      next_usage += Micros{1'000'000};
    }
    if (const auto deadline = gateway_.next_deadline(); deadline && now >= *deadline)
      send_outbound(gateway_.on_timer(now));

    std::vector<pollfd> fds{{listener_.fd(), POLLIN, 0}};
    for (const auto& p : peers) fds.push_back({p.socket->fd(), POLLIN, 0});
    Micros wake = std::min(end_, next_usage);
    if (const auto deadline = gateway_.next_deadline()) wake = std::min(wake, *deadline);
    const auto wait_ms = std::clamp<std::int64_t>((wake - now).count() / 1000, 0, 20);
    if (::poll(fds.data(), fds.size(), static_cast<int>(wait_ms)) < 0 && errno != EINTR)
      throw TransportError("poll failed");

    if (fds[0].revents & POLLIN) peers.push_back({std::make_shared<LineSocket>(listener_.accept()), {}});

    for (std::size_t i = 0; i < peers.size();) {
      auto& peer = peers[i];
      bool open = true;
      if (i + 1 < fds.size() && (fds[i + 1].revents & (POLLIN | POLLHUP | POLLERR))) {
        try {
          open = peer.socket->fill();
        } catch (const TransportError&) {
          open = false;
        }
      }
      while (auto line = peer.socket->buffered_line()) {
        const Micros at = transport_.now();
        protocol::WireMessage message;
        try {
          message = protocol::decode(*line);
        } catch (const protocol::ProtocolError& e) {
          logs_.event({at, "protocol_error", {{"field", e.field()}, {"error", e.what()}}});
          continue;
        }
        if (peer.id.empty()) {
          peer.id = message.device_id;
          transport_.attach(peer.id, peer.socket);
        }
        logs_.wire_line(at, peer.id, kGatewayEndpoint, *line);
        send_outbound(gateway_.on_message(message, at));
      }
      if (!open) {
        if (!peer.id.empty()) {
          transport_.detach(peer.id);
          send_outbound(gateway_.on_disconnect(peer.id, transport_.now()));
        }
        peers.erase(peers.begin() + static_cast<std::ptrdiff_t>(i));
        // fds indices no longer line up; re-poll on the next pass.
        break;
      }
      ++i;
    }
  }
  stop_ = true;
  drain_gateway();
}

void SocketRun::agent_loop(const DeviceConfig& device) {
  const auto sleep_until = [&](Micros t) {
    while (!stop_ && transport_.now() < t)
      std::this_thread::sleep_for(std::min<Micros>(t - transport_.now(), Micros{20'000}));
  };
  sleep_until(from_seconds(device.join_time_s));
  if (stop_) return;

  DeviceAgent agent(config_.spec_for(device));
  LineSocket socket;
  try {
    socket = LineSocket::connect(config_.transport.host, listener_.port());
    socket.send_line(protocol::encode(agent.hello()));
  } catch (const TransportError& e) {
    logs_.event({transport_.now(), "transport_error", {{"device", device.id}, {"error", e.what()}}});
    return;
  }
  const std::optional<Micros> leave_at =
      device.leave_time_s ? std::optional<Micros>(from_seconds(*device.leave_time_s)) : std::nullopt;
  std::optional<Micros> manipulate_at;
  if (device.manipulation) manipulate_at = from_seconds(device.manipulation->at_time_s);

  try {
    while (!stop_) {
      const Micros now = transport_.now();
      if (leave_at && now >= *leave_at) {
        socket.send_line(protocol::encode(agent.leave()));
        break;
      }
      if (manipulate_at && now >= *manipulate_at && agent.phase() == AgentPhase::transmitting) {
        agent.apply_manipulation(device.manipulation->override_rate, now);
        {
          std::lock_guard lock(logs_.mutex);
          logs_.manipulation_started[device.id] = now;
        }
        logs_.event({now, "manipulation", {{"device", device.id}, {"override_rate", device.manipulation->override_rate}}});
        manipulate_at.reset();
      }
      if (auto packet = agent.transmit_tick(now)) {
        socket.send_line(protocol::encode(*packet));
        agent.send_completed(transport_.now());
      }
      Micros wake = now + Micros{20'000};
      if (const auto due = agent.next_send_due()) wake = std::min(wake, *due);
      const auto wait = std::chrono::duration_cast<std::chrono::milliseconds>(std::max(Micros{0}, wake - now));
      const auto line = socket.recv_line(wait);
      if (!line) continue;
      const Micros at = transport_.now();
      logs_.wire_line(at, kGatewayEndpoint, device.id, *line);
      const auto message = protocol::decode(*line);
      using protocol::Tag;
      switch (message.tag()) {
        case Tag::join_ack:
          agent.on_join_ack(message);
          break;
        case Tag::z_broadcast:
          if (agent.phase() == AgentPhase::negotiating)
            socket.send_line(protocol::encode(agent.negotiate_round(message)));
          break;
        case Tag::converged:
          if (agent.phase() == AgentPhase::negotiating) agent.enter_transmitting(message, at);
          break;
        case Tag::leave:
          agent.leave();
          return;
        default:
          break;
      }
    }
  } catch (const TransportError&) {
    // Gateway went away; the run is over for this device.
  }
}

RunOutcome SocketRun::execute() {
  std::vector<std::thread> agents;
  std::exception_ptr failure;
  std::thread gateway([&] {
    try {
      gateway_loop();
    } catch (...) {
      failure = std::current_exception();
      stop_ = true;
    }
  });
  for (const auto& device : config_.devices) agents.emplace_back([this, &device] { agent_loop(device); });
  gateway.join();
  for (auto& t : agents) t.join();
  if (failure) std::rethrow_exception(failure);

  outcome_.event_log = std::move(logs_.events);
  outcome_.wire_log = std::move(logs_.wire);
  outcome_.manipulation_started = std::move(logs_.manipulation_started);
  detail::finalize_outcome(config_, gateway_, outcome_);
  if (gateway_.negotiation_failed()) {
    outcome_.exit_code = kExitNonConvergence;
    outcome_.error = "negotiation did not converge within max_iter rounds";
  }
  return std::move(outcome_);
}

}  // namespace

RunOutcome run_socket(const ScenarioConfig& config, const RunOptions& options) {
  const auto out_dir = options.output_dir.value_or(config.output_dir);
  GatewayConfig gateway_config = config.gateway;
  if (options.write_artifacts) {
    std::filesystem::create_directories(out_dir);
    gateway_config.sink_log = out_dir / "sink.csv";
  }
  SocketRun run(config, gateway_config);
  RunOutcome outcome = run.execute();
  if (options.write_artifacts) detail::write_artifacts(config, out_dir, outcome);
  return outcome;
}

}  // namespace txfreq
