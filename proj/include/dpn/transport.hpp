#pragma once

#include <memory>
#include <string>
#include <vector>

namespace dpn {

enum class MsgType { PowerTarget, PowerReply, Converged, Abort };

// Coordinator/LC wire unit. Power payloads travel in normalized units so the
// consensus arithmetic survives serialization exactly.
struct Message {
  MsgType type = MsgType::Abort;
  int zone = -1;
  int iter = -1;
  std::vector<double> u_bar, lambda;  // PowerTarget
  std::vector<double> u_pred, delta;  // PowerReply
  std::string reason;                 // Abort

  static Message power_target(int zone, int iter, std::vector<double> u_bar,
                              std::vector<double> lambda);
  static Message power_reply(int zone, int iter, std::vector<double> u_pred,
                             std::vector<double> delta);
  static Message converged(int iter);
  static Message abort_with(std::string reason);
};

bool operator==(const Message& a, const Message& b);
inline bool operator!=(const Message& a, const Message& b) { return !(a == b); }

// One JSON object per frame, no trailing newline. Doubles round-trip exactly.
std::string message_to_json(const Message& m);
// Throws std::runtime_error with a "malformed frame" message on bad input.
Message message_from_json(const std::string& line);

// Zone side of one duplex link. recv blocks up to the transport timeout and
// then throws.
class Channel {
 public:
  virtual ~Channel() = default;
  virtual void send(const Message& m) = 0;
  virtual Message recv() = 0;
};

// Coordinator side of all links.
class Hub {
 public:
  virtual ~Hub() = default;
  virtual int n_zones() const = 0;
  virtual void send_to(int zone, const Message& m) = 0;
  virtual Message recv_from(int zone) = 0;
};

struct TransportPair {
  std::unique_ptr<Hub> hub;
  std::vector<std::unique_ptr<Channel>> zones;
};

// Per-zone in-memory queues; messages are value copies.
TransportPair make_inproc_transport(int n_zones, double timeout_s = 30.0);

// Loopback TCP, one connection per zone, newline-delimited JSON frames. The
// handshake (proto "dpn/1", n_zones, horizon) completes before this returns;
// mismatches throw.
TransportPair make_socket_transport(int n_zones, int horizon, double timeout_s = 30.0);

}  // namespace dpn
