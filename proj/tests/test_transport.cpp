#include <doctest.h>

#include <chrono>
#include <cmath>
#include <thread>

#include <json.hpp>

#include "dpn/transport.hpp"

using namespace dpn;

TEST_CASE("transport: json framing round-trips every message type exactly") {
  // doubles chosen to need all 17 digits
  std::vector<double> a = {0.1 + 0.2, -1.2345678901234567e-5, std::sqrt(2.0), 4.0};
  std::vector<double> b = {-0.333333333333333315, 1e300, -7.0, 0.0};

  Message mt = Message::power_target(3, 7, a, b);
  Message mr = Message::power_reply(4, 9, b, a);
  Message mc = Message::converged(12);
  Message ma = Message::abort_with("zone 2 diverged");

  for (const Message& m : {mt, mr, mc, ma}) {
    Message back = message_from_json(message_to_json(m));
    CHECK(back == m);
  }

  // identity is bitwise on the payloads
  Message back = message_from_json(message_to_json(mt));
  for (size_t i = 0; i < a.size(); ++i) {
    CHECK(back.u_bar[i] == a[i]);
    CHECK(back.lambda[i] == b[i]);
  }
}

TEST_CASE("transport: target frame carries exactly horizon-length arrays") {
  Message m = Message::power_target(0, 1, {1, 2, 3, 4}, {5, 6, 7, 8});
  std::string line = message_to_json(m);
  CHECK(line.find('\n') == std::string::npos);
  nlohmann::json j = nlohmann::json::parse(line);
  CHECK(j["u_bar"].size() == 4);
  CHECK(j["lambda"].size() == 4);
  CHECK(j["type"] == "power_target");
}

TEST_CASE("transport: malformed frames are rejected") {
  CHECK_THROWS_WITH_AS(message_from_json("{oops"),
                       doctest::Contains("malformed frame"), std::runtime_error);
  CHECK_THROWS(message_from_json("42"));
  CHECK_THROWS(message_from_json("{\"zone\": 1}"));
  CHECK_THROWS(message_from_json("{\"type\": \"warp\"}"));
  CHECK_THROWS(message_from_json("{\"type\": \"power_target\", \"zone\": 1, \"iter\": 0}"));
  CHECK_THROWS(message_from_json(
      "{\"type\": \"power_target\", \"zone\": 1, \"iter\": 0, \"u_bar\": [1], \"lambda\": [1, 2]}"));
  CHECK_THROWS(message_from_json(
      "{\"type\": \"power_reply\", \"zone\": 0, \"iter\": 0, \"u_pred\": [\"x\"], \"delta\": [1]}"));
  CHECK_THROWS(message_from_json("{\"type\": \"abort\"}"));
  CHECK_THROWS(message_from_json("{\"type\": \"converged\", \"iter\": \"one\"}"));
}

namespace {

void exercise_pair(TransportPair& tp, int n_zones) {
  // barrier shape: all targets out before any reply is consumed
  for (int z = 0; z < n_zones; ++z)
    tp.hub->send_to(z, Message::power_target(z, 1, {1.5 * z, -2.0}, {0.25, 0.5}));
  for (int z = n_zones - 1; z >= 0; --z) {  // reverse order on purpose
    Message got = tp.zones[static_cast<size_t>(z)]->recv();
    CHECK(got.type == MsgType::PowerTarget);
    CHECK(got.zone == z);
    CHECK(got.u_bar[0] == 1.5 * z);
    tp.zones[static_cast<size_t>(z)]->send(
        Message::power_reply(z, 1, {got.u_bar[0] + 1.0, 7.0}, {-0.25, 0.0}));
  }
  for (int z = 0; z < n_zones; ++z) {
    Message r = tp.hub->recv_from(z);
    CHECK(r.type == MsgType::PowerReply);
    CHECK(r.zone == z);
    CHECK(r.u_pred[0] == 1.5 * z + 1.0);
  }
  // control messages pass too
  tp.hub->send_to(0, Message::converged(1));
  CHECK(tp.zones[0]->recv().type == MsgType::Converged);
}

}  // namespace

TEST_CASE("transport: in-process queues round-trip and preserve zone addressing") {
  TransportPair tp = make_inproc_transport(3, 5.0);
  exercise_pair(tp, 3);
}

TEST_CASE("transport: in-process recv times out when nothing arrives") {
  TransportPair tp = make_inproc_transport(1, 0.05);
  auto t0 = std::chrono::steady_clock::now();
  CHECK_THROWS_WITH_AS(tp.hub->recv_from(0), doctest::Contains("transport timeout"),
                       std::runtime_error);
  double waited = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  CHECK(waited < 2.0);
  CHECK_THROWS_WITH_AS(tp.zones[0]->recv(), doctest::Contains("transport timeout"),
                       std::runtime_error);
}

TEST_CASE("transport: loopback sockets carry frames bit-exactly") {
  TransportPair tp = make_socket_transport(3, 2, 5.0);
  exercise_pair(tp, 3);

  // doubles survive the wire exactly
  std::vector<double> payload = {0.1 + 0.2, std::sqrt(2.0), -1.2345678901234567e-5,
                                 5.0e-324, 1.7976931348623157e308, 0.0};
  std::vector<double> zeros(payload.size(), 0.0);
  tp.hub->send_to(1, Message::power_target(1, 2, payload, zeros));
  Message got = tp.zones[1]->recv();
  for (size_t i = 0; i < payload.size(); ++i) CHECK(got.u_bar[i] == payload[i]);

  // back-to-back frames stay separate
  tp.hub->send_to(2, Message::power_target(2, 3, {1}, {2}));
  tp.hub->send_to(2, Message::converged(3));
  CHECK(tp.zones[2]->recv().type == MsgType::PowerTarget);
  CHECK(tp.zones[2]->recv().type == MsgType::Converged);
}

TEST_CASE("transport: socket recv times out") {
  TransportPair tp = make_socket_transport(1, 4, 0.1);
  auto t0 = std::chrono::steady_clock::now();
  CHECK_THROWS_WITH_AS(tp.hub->recv_from(0), doctest::Contains("transport timeout"),
                       std::runtime_error);
  double waited = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  CHECK(waited >= 0.05);
  CHECK(waited < 3.0);
}

TEST_CASE("transport: sockets work from worker threads") {
  const int N = 4;
  TransportPair tp = make_socket_transport(N, 3, 5.0);
  std::vector<std::thread> workers;
  for (int z = 0; z < N; ++z)
    workers.emplace_back([&tp, z] {
      for (;;) {
        Message m = tp.zones[static_cast<size_t>(z)]->recv();
        if (m.type != MsgType::PowerTarget) return;
        tp.zones[static_cast<size_t>(z)]->send(Message::power_reply(
            z, m.iter, {m.u_bar[0] * 2, m.u_bar[1] * 2, m.u_bar[2] * 2}, {0, 0, 0}));
      }
    });
  for (int it = 1; it <= 3; ++it) {
    for (int z = 0; z < N; ++z)
      tp.hub->send_to(z, Message::power_target(z, it, {1.0 * it, 2.0 * it, 3.0 * it}, {0, 0, 0}));
    for (int z = 0; z < N; ++z) {
      Message r = tp.hub->recv_from(z);
      CHECK(r.iter == it);
      CHECK(r.u_pred[2] == 6.0 * it);
    }
  }
  for (int z = 0; z < N; ++z) tp.hub->send_to(z, Message::converged(3));
  for (auto& w : workers) w.join();
}
