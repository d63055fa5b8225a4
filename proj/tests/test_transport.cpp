#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <thread>

#include "txfreq/errors.hpp"
#include "txfreq/socket_transport.hpp"
#include "txfreq/transport.hpp"

using namespace txfreq;

namespace {

protocol::WireMessage report(const std::string& id, double s) { return {id, 1, protocol::XReport{s}}; }

TransportConfig with_latency(std::map<std::string, double> latency, double jitter = 0.0, std::uint64_t seed = 42) {
  TransportConfig config;
  config.latency_s = std::move(latency);
  config.jitter_s = jitter;
  config.seed = seed;
  return config;
}

SimulatedTransport network(TransportConfig config, std::initializer_list<const char*> endpoints) {
  SimulatedTransport net(std::move(config));
  for (const char* e : endpoints) net.connect(e);
  return net;
}

}  // namespace

TEST_SUITE("simulated transport") {
  TEST_CASE("fixed latency delivers exactly one latency later and blocks the sender as long") {
    auto net = network(with_latency({{"dev1", 0.0016}}), {"dev1", kGatewayEndpoint});
    net.advance_clock(Micros{5'000'000});
    const auto receipt = net.send("dev1", kGatewayEndpoint, report("dev1", 1.0));
    CHECK(receipt.deliver_at == Micros{5'001'600});
    CHECK(receipt.sender_free_at == Micros{5'001'600});
    CHECK(net.advance_clock(Micros{5'001'599}).empty());
    const auto due = net.advance_clock(Micros{5'001'600});
    REQUIRE(due.size() == 1);
    CHECK(due[0].at == Micros{5'001'600});
    CHECK(protocol::decode(due[0].line) == report("dev1", 1.0));
  }

  TEST_CASE("zero latency delivers at the send instant") {
    auto net = network(with_latency({}), {"dev1", kGatewayEndpoint});
    const auto receipt = net.send(kGatewayEndpoint, "dev1", report("dev1", 2.0));
    CHECK(receipt.deliver_at == net.now());
    CHECK(net.advance_clock(net.now()).size() == 1);
  }

  TEST_CASE("same seed gives the same timeline") {
    const auto timeline = [](std::uint64_t seed) {
      auto net = network(with_latency({{"dev1", 0.002}, {"dev2", 0.004}}, 0.001, seed), {"dev1", "dev2", kGatewayEndpoint});
      std::vector<std::int64_t> out;
      for (int i = 0; i < 200; ++i) {
        net.advance_clock(Micros{i * 10'000});
        out.push_back(net.send(i % 2 ? "dev1" : "dev2", kGatewayEndpoint, report("x", i)).deliver_at.count());
      }
      return out;
    };
    CHECK(timeline(42) == timeline(42));
    CHECK(timeline(42) != timeline(43));
  }

  TEST_CASE("empty queue and horizon rule") {
    auto net = network(with_latency({{"dev1", 0.5}}), {"dev1", kGatewayEndpoint});
    CHECK(net.advance_clock(Micros{1'000}).empty());
    net.send("dev1", kGatewayEndpoint, report("dev1", 1.0));
    CHECK(net.advance_clock(Micros{400'000}).empty());
    CHECK(net.next_delivery_time() == Micros{501'000});
  }

  TEST_CASE("simultaneous deliveries are ordered by sender") {
    auto net = network(with_latency({}), {"dev1", "dev2", kGatewayEndpoint});
    net.send("dev2", kGatewayEndpoint, report("dev2", 2.0));
    net.send("dev1", kGatewayEndpoint, report("dev1", 1.0));
    const auto due = net.advance_clock(Micros{0});
    REQUIRE(due.size() == 2);
    CHECK(due[0].from == "dev1");
    CHECK(due[1].from == "dev2");
  }

  TEST_CASE("property: jitter never reorders a channel") {
    auto net = network(with_latency({{"dev1", 0.003}}, 0.0029, 9), {"dev1", kGatewayEndpoint});
    std::vector<Delivery> due;
    for (int i = 0; i < 2000; ++i) {
      for (auto& d : net.advance_clock(net.now() + Micros{i % 3 == 0 ? 0 : 700})) due.push_back(std::move(d));
      net.send("dev1", kGatewayEndpoint, report("dev1", i));
    }
    for (auto& d : net.advance_clock(Micros{10'000'000'000})) due.push_back(std::move(d));
    REQUIRE(due.size() == 2000);
    for (std::size_t i = 0; i < due.size(); ++i)
      CHECK(std::get<protocol::XReport>(protocol::decode(due[i].line).payload).s == static_cast<double>(i));
  }

  TEST_CASE("disconnected endpoints raise a transport error") {
    auto net = network(with_latency({}), {"dev1", kGatewayEndpoint});
    net.disconnect("dev1");
    CHECK_THROWS_AS(net.send(kGatewayEndpoint, "dev1", report("dev1", 1.0)), TransportError);
    CHECK_THROWS_AS(net.send("dev1", kGatewayEndpoint, report("dev1", 1.0)), TransportError);
  }

  TEST_CASE("channel latency is the device end's") {
    const auto config = with_latency({{"dev1", 0.0016}, {"dev2", 0.0043}});
    CHECK(config.latency_for("dev2") == 0.0043);
    CHECK(config.latency_for("unknown") == 0.0);
    CHECK(config.max_latency() == 0.0043);
    auto net = network(config, {"dev1", "dev2", kGatewayEndpoint});
    CHECK(net.send(kGatewayEndpoint, "dev2", report("dev2", 1.0)).deliver_at == Micros{4300});
  }
}

TEST_SUITE("socket transport") {
  TEST_CASE("line records cross a loopback connection intact") {
    LineListener listener("127.0.0.1", 0);
    REQUIRE(listener.port() > 0);
    std::thread client([port = listener.port()] {
      auto sock = LineSocket::connect("127.0.0.1", port);
      sock.send_line(protocol::encode(report("dev1", 1.5)));
      sock.send_line(protocol::encode(report("dev1", 2.5)));
      const auto reply = sock.recv_line(std::chrono::milliseconds(2000));
      REQUIRE(reply);
      CHECK(protocol::decode(*reply).tag() == protocol::Tag::leave);
    });
    auto server = listener.accept();
    const auto first = server.recv_line(std::chrono::milliseconds(2000));
    const auto second = server.recv_line(std::chrono::milliseconds(2000));
    REQUIRE(first);
    REQUIRE(second);
    CHECK(protocol::decode(*first) == report("dev1", 1.5));
    CHECK(protocol::decode(*second) == report("dev1", 2.5));
    server.send_line(protocol::encode({"dev1", 1, protocol::Leave{}}));
    client.join();
  }

  TEST_CASE("receive timeout and closed peer") {
    LineListener listener("127.0.0.1", 0);
    auto client = LineSocket::connect("127.0.0.1", listener.port());
    auto server = listener.accept();
    CHECK_FALSE(server.recv_line(std::chrono::milliseconds(20)));
    client.close();
    CHECK_THROWS_AS(server.recv_line(std::chrono::milliseconds(500)), TransportError);
  }

  TEST_CASE("socket transport routes by endpoint and refuses unknown peers") {
    LineListener listener("127.0.0.1", 0);
    auto client = LineSocket::connect("127.0.0.1", listener.port());
    SocketTransport transport;
    transport.attach("dev1", std::make_shared<LineSocket>(listener.accept()));
    transport.send(kGatewayEndpoint, "dev1", report("dev1", 3.0));
    const auto line = client.recv_line(std::chrono::milliseconds(2000));
    REQUIRE(line);
    CHECK(protocol::decode(*line) == report("dev1", 3.0));
    transport.detach("dev1");
    CHECK_THROWS_AS(transport.send(kGatewayEndpoint, "dev1", report("dev1", 3.0)), TransportError);
    CHECK(transport.now() >= Micros{0});
  }

  TEST_CASE("connecting to a closed port fails") {
    int port = 0;
    {
      LineListener listener("127.0.0.1", 0);
      port = listener.port();
    }
    CHECK_THROWS_AS(LineSocket::connect("127.0.0.1", port), TransportError);
    CHECK_THROWS_AS(LineListener("not-an-ip", 0), TransportError);
  }
}
