#include "dpn/transport.hpp"

#include <arpa/inet.h>
#include <netinet/in.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include <cerrno>
#include <chrono>
#include <condition_variable>
#include <cstring>
#include <deque>
#include <mutex>
#include <stdexcept>

#include <json.hpp>

namespace dpn {

using nlohmann::json;

Message Message::power_target(int zone, int iter, std::vector<double> u_bar,
                              std::vector<double> lambda) {
  Message m;
  m.type = MsgType::PowerTarget;
  m.zone = zone;
  m.iter = iter;
  m.u_bar = std::move(u_bar);
  m.lambda = std::move(lambda);
  return m;
}

Message Message::power_reply(int zone, int iter, std::vector<double> u_pred,
                             std::vector<double> delta) {
  Message m;
  m.type = MsgType::PowerReply;
  m.zone = zone;
  m.iter = iter;
  m.u_pred = std::move(u_pred);
  m.delta = std::move(delta);
  return m;
}

Message Message::converged(int iter) {
  Message m;
  m.type = MsgType::Converged;
  m.iter = iter;
  return m;
}

Message Message::abort_with(std::string reason) {
  Message m;
  m.type = MsgType::Abort;
  m.reason = std::move(reason);
  return m;
}

bool operator==(const Message& a, const Message& b) {
  return a.type == b.type && a.zone == b.zone && a.iter == b.iter && a.u_bar == b.u_bar &&
         a.lambda == b.lambda && a.u_pred == b.u_pred && a.delta == b.delta &&
         a.reason == b.reason;
}

std::string message_to_json(const Message& m) {
  json j;
  switch (m.type) {
    case MsgType::PowerTarget:
      j["type"] = "power_target";
      j["zone"] = m.zone;
      j["iter"] = m.iter;
      j["u_bar"] = m.u_bar;
      j["lambda"] = m.lambda;
      break;
    case MsgType::PowerReply:
      j["type"] = "power_reply";
      j["zone"] = m.zone;
      j["iter"] = m.iter;
      j["u_pred"] = m.u_pred;
      j["delta"] = m.delta;
      break;
    case MsgType::Converged:
      j["type"] = "converged";
      j["iter"] = m.iter;
      break;
    case MsgType::Abort:
      j["type"] = "abort";
      j["reason"] = m.reason;
      break;
  }
  return j.dump();
}

namespace {

[[noreturn]] void malformed(const std::string& why) {
  throw std::runtime_error("malformed frame: " + why);
}

std::vector<double> require_array(const json& j, const char* key) {
  if (!j.contains(key) || !j[key].is_array()) malformed(std::string("missing array ") + key);
  std::vector<double> v;
  v.reserve(j[key].size());
  for (const auto& x : j[key]) {
    if (!x.is_number()) malformed(std::string("non-numeric entry in ") + key);
    v.push_back(x.get<double>());
  }
  return v;
}

int require_int(const json& j, const char* key) {
  if (!j.contains(key) || !j[key].is_number_integer())
    malformed(std::string("missing integer ") + key);
  return j[key].get<int>();
}

}  // namespace

Message message_from_json(const std::string& line) {
  json j;
  try {
    j = json::parse(line);
  } catch (const json::exception& e) {
    malformed(e.what());
  }
  if (!j.is_object() || !j.contains("type") || !j["type"].is_string())
    malformed("no type field");
  std::string type = j["type"].get<std::string>();
  Message m;
  if (type == "power_target") {
    m.type = MsgType::PowerTarget;
    m.zone = require_int(j, "zone");
    m.iter = require_int(j, "iter");
    m.u_bar = require_array(j, "u_bar");
    m.lambda = require_array(j, "lambda");
    if (m.u_bar.size() != m.lambda.size()) malformed("target arrays disagree on length");
  } else if (type == "power_reply") {
    m.type = MsgType::PowerReply;
    m.zone = require_int(j, "zone");
    m.iter = require_int(j, "iter");
    m.u_pred = require_array(j, "u_pred");
    m.delta = require_array(j, "delta");
    if (m.u_pred.size() != m.delta.size()) malformed("reply arrays disagree on length");
  } else if (type == "converged") {
    m.type = MsgType::Converged;
    m.iter = require_int(j, "iter");
  } else if (type == "abort") {
    m.type = MsgType::Abort;
    if (!j.contains("reason") || !j["reason"].is_string()) malformed("abort without reason");
    m.reason = j["reason"].get<std::string>();
  } else {
    malformed("unknown type " + type);
  }
  return m;
}

// ---- in-process -----------------------------------------------------------------

namespace {

struct MsgQueue {
  std::mutex mu;
  std::condition_variable cv;
  std::deque<Message> q;

  void push(Message m) {
    {
      std::lock_guard<std::mutex> lk(mu);
      q.push_back(std::move(m));
    }
    cv.notify_one();
  }

  Message pop(double timeout_s, const std::string& who) {
    std::unique_lock<std::mutex> lk(mu);
    if (!cv.wait_for(lk, std::chrono::duration<double>(timeout_s), [&] { return !q.empty(); }))
      throw std::runtime_error("transport timeout waiting for " + who);
    Message m = std::move(q.front());
    q.pop_front();
    return m;
  }
};

struct InprocLink {
  MsgQueue to_zone, to_coord;
};

struct InprocState {
  std::vector<InprocLink> links;
  double timeout_s;
  explicit InprocState(int n, double t) : links(static_cast<size_t>(n)), timeout_s(t) {}
};

class InprocChannel : public Channel {
 public:
  InprocChannel(std::shared_ptr<InprocState> st, int zone) : st_(std::move(st)), zone_(zone) {}
  void send(const Message& m) override {
    st_->links[static_cast<size_t>(zone_)].to_coord.push(m);
  }
  Message recv() override {
    return st_->links[static_cast<size_t>(zone_)].to_zone.pop(st_->timeout_s, "coordinator");
  }

 private:
  std::shared_ptr<InprocState> st_;
  int zone_;
};

class InprocHub : public Hub {
 public:
  explicit InprocHub(std::shared_ptr<InprocState> st) : st_(std::move(st)) {}
  int n_zones() const override { return static_cast<int>(st_->links.size()); }
  void send_to(int zone, const Message& m) override {
    st_->links.at(static_cast<size_t>(zone)).to_zone.push(m);
  }
  Message recv_from(int zone) override {
    return st_->links.at(static_cast<size_t>(zone))
        .to_coord.pop(st_->timeout_s, "zone " + std::to_string(zone));
  }

 private:
  std::shared_ptr<InprocState> st_;
};

}  // namespace

TransportPair make_inproc_transport(int n_zones, double timeout_s) {
  if (n_zones < 1) throw std::invalid_argument("transport needs at least one zone");
  auto st = std::make_shared<InprocState>(n_zones, timeout_s);
  TransportPair p;
  p.hub = std::make_unique<InprocHub>(st);
  for (int i = 0; i < n_zones; ++i) p.zones.push_back(std::make_unique<InprocChannel>(st, i));
  return p;
}

// ---- loopback TCP -----------------------------------------------------------------

namespace {

class LineSock {
 public:
  explicit LineSock(int fd = -1) : fd_(fd) {}
  LineSock(const LineSock&) = delete;
  LineSock& operator=(const LineSock&) = delete;
  LineSock(LineSock&& o) noexcept : fd_(o.fd_), buf_(std::move(o.buf_)) { o.fd_ = -1; }
  LineSock& operator=(LineSock&& o) noexcept {
    close_fd();
    fd_ = o.fd_;
    buf_ = std::move(o.buf_);
    o.fd_ = -1;
    return *this;
  }
  ~LineSock() { close_fd(); }

  int fd() const { return fd_; }

  void send_line(const std::string& line, const std::string& peer) {
    std::string out = line;
    out.push_back('\n');
    size_t off = 0;
    while (off < out.size()) {
      ssize_t n = ::send(fd_, out.data() + off, out.size() - off, MSG_NOSIGNAL);
      if (n < 0) {
        if (errno == EINTR) continue;
        throw std::runtime_error("transport send to " + peer + " failed: " +
                                 std::strerror(errno));
      }
      off += static_cast<size_t>(n);
    }
  }

  std::string recv_line(double timeout_s, const std::string& peer) {
    auto deadline = std::chrono::steady_clock::now() +
                    std::chrono::duration_cast<std::chrono::steady_clock::duration>(
                        std::chrono::duration<double>(timeout_s));
    for (;;) {
      size_t nl = buf_.find('\n');
      if (nl != std::string::npos) {
        std::string line = buf_.substr(0, nl);
        buf_.erase(0, nl + 1);
        return line;
      }
      auto left = std::chrono::duration_cast<std::chrono::milliseconds>(
          deadline - std::chrono::steady_clock::now());
      if (left.count() <= 0) throw std::runtime_error("transport timeout waiting for " + peer);
      pollfd p{fd_, POLLIN, 0};
      int pr = ::poll(&p, 1, static_cast<int>(left.count()));
      if (pr < 0) {
        if (errno == EINTR) continue;
        throw std::runtime_error(std::string("transport poll failed: ") + std::strerror(errno));
      }
      if (pr == 0) throw std::runtime_error("transport timeout waiting for " + peer);
      char chunk[4096];
      ssize_t n = ::recv(fd_, chunk, sizeof chunk, 0);
      if (n < 0) {
        if (errno == EINTR) continue;
        throw std::runtime_error("transport recv from " + peer + " failed: " +
                                 std::strerror(errno));
      }
      if (n == 0) throw std::runtime_error("transport connection to " + peer + " closed");
      buf_.append(chunk, static_cast<size_t>(n));
    }
  }

 private:
  void close_fd() {
    if (fd_ >= 0) ::close(fd_);
    fd_ = -1;
  }
  int fd_;
  std::string buf_;
};

class SocketChannel : public Channel {
 public:
  SocketChannel(LineSock sock, double timeout_s) : sock_(std::move(sock)), timeout_s_(timeout_s) {}
  void send(const Message& m) override { sock_.send_line(message_to_json(m), "coordinator"); }
  Message recv() override {
    return message_from_json(sock_.recv_line(timeout_s_, "coordinator"));
  }

 private:
  LineSock sock_;
  double timeout_s_;
};

class SocketHub : public Hub {
 public:
  SocketHub(std::vector<LineSock> socks, double timeout_s)
      : socks_(std::move(socks)), timeout_s_(timeout_s) {}
  int n_zones() const override { return static_cast<int>(socks_.size()); }
  void send_to(int zone, const Message& m) override {
    socks_.at(static_cast<size_t>(zone))
        .send_line(message_to_json(m), "zone " + std::to_string(zone));
  }
  Message recv_from(int zone) override {
    return message_from_json(socks_.at(static_cast<size_t>(zone))
                                 .recv_line(timeout_s_, "zone " + std::to_string(zone)));
  }

 private:
  std::vector<LineSock> socks_;
  double timeout_s_;
};

[[noreturn]] void sys_fail(const char* what) {
  throw std::runtime_error(std::string(what) + ": " + std::strerror(errno));
}

}  // namespace

TransportPair make_socket_transport(int n_zones, int horizon, double timeout_s) {
  if (n_zones < 1) throw std::invalid_argument("transport needs at least one zone");

  int listener = ::socket(AF_INET, SOCK_STREAM, 0);
  if (listener < 0) sys_fail("socket");
  LineSock listener_guard(listener);
  sockaddr_in addr{};
  addr.sin_family = AF_INET;
  addr.sin_addr.s_addr = htonl(INADDR_LOOPBACK);
  addr.sin_port = 0;
  if (::bind(listener, reinterpret_cast<sockaddr*>(&addr), sizeof addr) < 0) sys_fail("bind");
  if (::listen(listener, n_zones) < 0) sys_fail("listen");
  socklen_t alen = sizeof addr;
  if (::getsockname(listener, reinterpret_cast<sockaddr*>(&addr), &alen) < 0)
    sys_fail("getsockname");

  // all connects land in the backlog, so a single thread can drive both ends
  std::vector<LineSock> clients;
  for (int i = 0; i < n_zones; ++i) {
    int fd = ::socket(AF_INET, SOCK_STREAM, 0);
    if (fd < 0) sys_fail("socket");
    LineSock guard(fd);
    if (::connect(fd, reinterpret_cast<sockaddr*>(&addr), sizeof addr) < 0) sys_fail("connect");
    clients.push_back(std::move(guard));
  }
  std::vector<LineSock> accepted;
  for (int i = 0; i < n_zones; ++i) {
    int fd = ::accept(listener, nullptr, nullptr);
    if (fd < 0) sys_fail("accept");
    accepted.emplace_back(fd);
  }

  // handshake: each zone announces itself, the hub confirms the dimensions
  json hello;
  hello["proto"] = "dpn/1";
  hello["n_zones"] = n_zones;
  hello["horizon"] = horizon;
  for (int i = 0; i < n_zones; ++i) {
    json ident = hello;
    ident["zone"] = i;
    clients[static_cast<size_t>(i)].send_line(ident.dump(), "coordinator");
  }
  std::vector<LineSock> by_zone(static_cast<size_t>(n_zones));
  std::vector<bool> seen(static_cast<size_t>(n_zones), false);
  for (int i = 0; i < n_zones; ++i) {
    std::string line = accepted[static_cast<size_t>(i)].recv_line(timeout_s, "handshake");
    json j;
    try {
      j = json::parse(line);
    } catch (const json::exception& e) {
      malformed(std::string("handshake: ") + e.what());
    }
    if (!j.is_object() || j.value("proto", "") != "dpn/1")
      malformed("handshake protocol mismatch");
    if (j.value("n_zones", -1) != n_zones || j.value("horizon", -1) != horizon)
      malformed("handshake dimension mismatch");
    int zone = j.value("zone", -1);
    if (zone < 0 || zone >= n_zones || seen[static_cast<size_t>(zone)])
      malformed("handshake zone id invalid");
    seen[static_cast<size_t>(zone)] = true;
    accepted[static_cast<size_t>(i)].send_line(hello.dump(), "zone " + std::to_string(zone));
    by_zone[static_cast<size_t>(zone)] = std::move(accepted[static_cast<size_t>(i)]);
  }
  for (int i = 0; i < n_zones; ++i) {
    std::string line = clients[static_cast<size_t>(i)].recv_line(timeout_s, "handshake");
    json j = json::parse(line, nullptr, false);
    if (j.is_discarded() || j.value("proto", "") != "dpn/1" || j.value("n_zones", -1) != n_zones ||
        j.value("horizon", -1) != horizon)
      malformed("handshake confirmation mismatch");
  }

  TransportPair p;
  p.hub = std::make_unique<SocketHub>(std::move(by_zone), timeout_s);
  for (int i = 0; i < n_zones; ++i)
    p.zones.push_back(std::make_unique<SocketChannel>(std::move(clients[static_cast<size_t>(i)]),
                                                      timeout_s));
  return p;
}

}  // namespace dpn
