#include "h2slow/sim/socket_driver.hpp"

#include <arpa/inet.h>
#include <fcntl.h>
#include <netinet/in.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include <algorithm>
#include <cerrno>
#include <cmath>
#include <cstring>

#include "h2slow/errors.hpp"

namespace h2slow::sim {

namespace {

std::optional<Endpoint> endpoint_of(const sockaddr_in& a) {
  if (a.sin_family != AF_INET) return std::nullopt;
  return Endpoint{IpAddress::v4(ntohl(a.sin_addr.s_addr)), ntohs(a.sin_port)};
}

std::optional<Endpoint> local_of(int fd) {
  sockaddr_in a{};
  socklen_t len = sizeof a;
  if (getsockname(fd, reinterpret_cast<sockaddr*>(&a), &len) != 0) return std::nullopt;
  return endpoint_of(a);
}

std::optional<Endpoint> peer_of(int fd) {
  sockaddr_in a{};
  socklen_t len = sizeof a;
  if (getpeername(fd, reinterpret_cast<sockaddr*>(&a), &len) != 0) return std::nullopt;
  return endpoint_of(a);
}

sockaddr_in make_addr(const std::string& host, std::uint16_t port) {
  sockaddr_in a{};
  a.sin_family = AF_INET;
  a.sin_port = htons(port);
  if (inet_pton(AF_INET, host.c_str(), &a.sin_addr) != 1) throw ConnectRefused("bad IPv4 address: " + host);
  return a;
}

}  // namespace

struct SocketDriver::Conn {
  std::uint64_t id = 0;
  int fd = -1;
  bool server_side = false;
  bool connecting = false;
  bool want_fin = false;
  bool fin_sent = false;
  bool peer_closed = false;
  bool reap = false;
  std::size_t bytes_received = 0;
  std::unique_ptr<App> app;
  std::unique_ptr<Side> side;
  Bytes out;
  std::optional<FlowKey> key;
  std::uint32_t seq[2] = {0, 0};
};

class SocketDriver::Side final : public Transport {
 public:
  Side(SocketDriver& d, Conn& c) : d_(d), c_(c) {}
  std::uint64_t id() const override { return c_.id; }
  double now() const override { return d_.now(); }
  void send(ByteView bytes) override { d_.send(c_, bytes); }
  void close() override { d_.close(c_); }
  bool closed() const override { return c_.want_fin || c_.reap; }
  std::optional<FlowKey> flow_key() const override { return c_.key; }
  void after(double delay_s, std::function<void()> fn) override {
    d_.schedule(d_.now() + std::max(0.0, delay_s), c_.id, std::move(fn));
  }

 private:
  SocketDriver& d_;
  Conn& c_;
};

SocketDriver::SocketDriver()
    : start_(std::chrono::steady_clock::now()),
      epoch_us_(std::chrono::duration_cast<std::chrono::microseconds>(
                    std::chrono::system_clock::now().time_since_epoch())
                    .count()) {}

SocketDriver::~SocketDriver() {
  for (auto& l : listeners_) ::close(l.fd);
  for (auto& [id, c] : conns_) {
    if (c->fd >= 0) ::close(c->fd);
  }
}

double SocketDriver::now() const {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
}

void SocketDriver::schedule(double t, std::uint64_t conn, std::function<void()> fn) {
  if (conn == 0) ++free_timers_;
  timers_.push(Timer{t, timer_order_++, conn, std::move(fn)});
}

void SocketDriver::at(double t, std::function<void()> fn) { schedule(t, 0, std::move(fn)); }

std::uint16_t SocketDriver::listen(const std::string& host, std::uint16_t port, Acceptor& acceptor) {
  const sockaddr_in addr = make_addr(host, port);
  const int fd = ::socket(AF_INET, SOCK_STREAM | SOCK_NONBLOCK | SOCK_CLOEXEC, 0);
  if (fd < 0) throw Error(std::string("socket: ") + std::strerror(errno));
  const int one = 1;
  ::setsockopt(fd, SOL_SOCKET, SO_REUSEADDR, &one, sizeof one);
  if (::bind(fd, reinterpret_cast<const sockaddr*>(&addr), sizeof addr) != 0 || ::listen(fd, 1024) != 0) {
    const int err = errno;
    ::close(fd);
    throw Error("listen on " + host + ":" + std::to_string(port) + ": " + std::strerror(err));
  }
  listeners_.push_back(Listener{fd, &acceptor});
  auto local = local_of(fd);
  return local ? local->port : port;
}

std::uint64_t SocketDriver::connect(const std::string& host, std::uint16_t port, std::unique_ptr<App> app,
                                    double delay_s) {
  make_addr(host, port);  // validate early
  auto c = std::make_unique<Conn>();
  c->id = next_id_++;
  c->app = std::move(app);
  c->side = std::make_unique<Side>(*this, *c);
  const std::uint64_t id = c->id;
  conns_.emplace(id, std::move(c));
  schedule(now() + std::max(0.0, delay_s), id, [this, id, host, port] { start_connect(id, host, port); });
  return id;
}

std::optional<FlowKey> SocketDriver::key_of(std::uint64_t conn_id) const {
  auto it = conns_.find(conn_id);
  if (it == conns_.end()) return std::nullopt;
  return it->second->key;
}

void SocketDriver::start_connect(std::uint64_t id, const std::string& host, std::uint16_t port) {
  Conn& c = *conns_.at(id);
  const sockaddr_in addr = make_addr(host, port);
  c.fd = ::socket(AF_INET, SOCK_STREAM | SOCK_NONBLOCK | SOCK_CLOEXEC, 0);
  if (c.fd < 0) {
    c.app->on_refused(*c.side);
    c.reap = true;
    return;
  }
  const int rc = ::connect(c.fd, reinterpret_cast<const sockaddr*>(&addr), sizeof addr);
  if (rc != 0 && errno != EINPROGRESS) {
    c.app->on_refused(*c.side);
    c.reap = true;
    return;
  }
  if (auto local = local_of(c.fd)) c.key = FlowKey{local->ip, local->port, IpAddress::v4(ntohl(addr.sin_addr.s_addr)), port};
  c.connecting = true;
}

void SocketDriver::tap(Conn& c, bool from_client, std::uint8_t flags, ByteView payload) {
  if (!tap_ || !c.key) return;
  const Micros ts = epoch_us_ + static_cast<Micros>(std::llround(now() * 1e6));
  const int d = from_client ? 0 : 1;
  auto one = [&](ByteView chunk) {
    TcpSegmentSpec spec;
    spec.src_ip = from_client ? c.key->src_ip : c.key->dst_ip;
    spec.src_port = from_client ? c.key->src_port : c.key->dst_port;
    spec.dst_ip = from_client ? c.key->dst_ip : c.key->src_ip;
    spec.dst_port = from_client ? c.key->dst_port : c.key->src_port;
    spec.seq = c.seq[d];
    spec.ack = (flags & tcp_flags::kAck) ? c.seq[1 - d] : 0;
    spec.flags = flags;
    spec.payload = chunk;
    tap_(RawPacket{ts, build_tcp_packet(spec)});
    c.seq[d] += static_cast<std::uint32_t>(chunk.size());
    if (flags & (tcp_flags::kSyn | tcp_flags::kFin)) c.seq[d] += 1;
  };
  if (payload.empty()) {
    one({});
    return;
  }
  for (std::size_t off = 0; off < payload.size(); off += Network::kMss) {
    one(payload.subspan(off, std::min(Network::kMss, payload.size() - off)));
  }
}

void SocketDriver::accept_from(Listener& l) {
  while (true) {
    const int fd = ::accept4(l.fd, nullptr, nullptr, SOCK_NONBLOCK | SOCK_CLOEXEC);
    if (fd < 0) return;
    auto c = std::make_unique<Conn>();
    c->id = next_id_++;
    c->fd = fd;
    c->server_side = true;
    const auto peer = peer_of(fd);
    const auto local = local_of(fd);
    if (peer && local) c->key = FlowKey{peer->ip, peer->port, local->ip, local->port};
    c->seq[0] = static_cast<std::uint32_t>(c->id * 2654435761u);
    c->seq[1] = static_cast<std::uint32_t>(c->id * 40503u + 977u);
    c->side = std::make_unique<Side>(*this, *c);
    tap(*c, true, tcp_flags::kSyn, {});
    const FlowKey key = c->key.value_or(FlowKey{});
    c->app = l.acceptor->on_syn(c->id, now(), key);
    if (!c->app) {
      tap(*c, false, tcp_flags::kRst | tcp_flags::kAck, {});
      linger lg{1, 0};
      ::setsockopt(fd, SOL_SOCKET, SO_LINGER, &lg, sizeof lg);
      ::close(fd);
      continue;
    }
    tap(*c, false, tcp_flags::kSyn | tcp_flags::kAck, {});
    tap(*c, true, tcp_flags::kAck, {});
    Conn& ref = *c;
    conns_.emplace(c->id, std::move(c));
    ref.app->on_open(*ref.side);
  }
}

void SocketDriver::send(Conn& c, ByteView bytes) {
  if (c.want_fin || c.reap || bytes.empty()) return;
  if (c.server_side) tap(c, false, tcp_flags::kPsh | tcp_flags::kAck, bytes);
  append(c.out, bytes);
  if (!c.connecting && c.fd >= 0) flush(c);
}

void SocketDriver::close(Conn& c) {
  if (c.want_fin || c.reap) return;
  c.want_fin = true;
  if (c.server_side) tap(c, false, tcp_flags::kFin | tcp_flags::kAck, {});
  if (!c.connecting && c.fd >= 0) flush(c);
}

void SocketDriver::flush(Conn& c) {
  while (!c.out.empty()) {
    const ssize_t n = ::send(c.fd, c.out.data(), c.out.size(), MSG_NOSIGNAL);
    if (n < 0) {
      if (errno == EAGAIN || errno == EWOULDBLOCK) return;
      c.out.clear();
      c.peer_closed = true;
      c.reap = true;
      return;
    }
    c.out.erase(c.out.begin(), c.out.begin() + n);
  }
  if (c.want_fin && !c.fin_sent) {
    ::shutdown(c.fd, SHUT_WR);
    c.fin_sent = true;
  }
  maybe_reap(c);
}

void SocketDriver::maybe_reap(Conn& c) {
  if (c.fin_sent && c.peer_closed) c.reap = true;
}

void SocketDriver::on_writable(Conn& c) {
  if (c.connecting) {
    int err = 0;
    socklen_t len = sizeof err;
    ::getsockopt(c.fd, SOL_SOCKET, SO_ERROR, &err, &len);
    c.connecting = false;
    if (err != 0) {
      c.app->on_refused(*c.side);
      c.reap = true;
      return;
    }
    if (!c.key) {
      if (auto local = local_of(c.fd)) {
        if (auto peer = peer_of(c.fd)) c.key = FlowKey{local->ip, local->port, peer->ip, peer->port};
      }
    }
    c.app->on_open(*c.side);
  }
  if (!c.reap) flush(c);
}

void SocketDriver::on_readable(Conn& c) {
  std::uint8_t buf[65536];
  while (!c.reap && !c.peer_closed) {
    const ssize_t n = ::recv(c.fd, buf, sizeof buf, 0);
    if (n > 0) {
      const ByteView chunk(buf, static_cast<std::size_t>(n));
      c.bytes_received += chunk.size();
      if (c.server_side) tap(c, true, tcp_flags::kPsh | tcp_flags::kAck, chunk);
      c.app->on_data(*c.side, chunk);
      continue;
    }
    if (n == 0) {
      c.peer_closed = true;
      if (c.server_side) tap(c, true, tcp_flags::kFin | tcp_flags::kAck, {});
      c.app->on_peer_close(*c.side);
      maybe_reap(c);
      return;
    }
    if (errno == EAGAIN || errno == EWOULDBLOCK) return;
    if (errno == EINTR) continue;
    // reset
    c.peer_closed = true;
    if (c.server_side) tap(c, true, tcp_flags::kRst | tcp_flags::kAck, {});
    if (!c.server_side && c.bytes_received == 0) {
      c.app->on_refused(*c.side);
    } else {
      c.app->on_peer_close(*c.side);
    }
    c.reap = true;
    return;
  }
}

void SocketDriver::fire_timers() {
  const double t = now();
  while (!timers_.empty() && timers_.top().t <= t) {
    Timer timer = timers_.top();
    timers_.pop();
    if (timer.conn == 0) --free_timers_;
    if (timer.conn != 0) {
      auto it = conns_.find(timer.conn);
      if (it == conns_.end() || it->second->reap) continue;
    }
    timer.fn();
  }
}

void SocketDriver::poll_once(double deadline) {
  std::vector<pollfd> fds;
  std::vector<Conn*> owners;
  for (const auto& l : listeners_) {
    fds.push_back({l.fd, POLLIN, 0});
    owners.push_back(nullptr);
  }
  for (auto& [id, c] : conns_) {
    if (c->fd < 0 || c->reap) continue;
    short ev = 0;
    if (!c->peer_closed && !c->connecting) ev |= POLLIN;
    if (c->connecting || !c->out.empty()) ev |= POLLOUT;
    if (!ev) continue;
    fds.push_back({c->fd, ev, 0});
    owners.push_back(c.get());
  }
  double wake = deadline;
  if (!timers_.empty()) wake = std::min(wake, timers_.top().t);
  const double wait_s = std::clamp(wake - now(), 0.0, 0.5);
  const int timeout_ms = static_cast<int>(std::ceil(wait_s * 1000.0));
  const int rc = ::poll(fds.data(), fds.size(), timeout_ms);
  if (rc > 0) {
    for (std::size_t i = 0; i < fds.size(); ++i) {
      if (!fds[i].revents) continue;
      if (!owners[i]) {
        for (auto& l : listeners_) {
          if (l.fd == fds[i].fd) accept_from(l);
        }
        continue;
      }
      Conn& c = *owners[i];
      if (fds[i].revents & (POLLOUT | POLLERR | POLLHUP)) {
        if (c.connecting || !c.out.empty()) on_writable(c);
      }
      if (!c.reap && (fds[i].revents & (POLLIN | POLLHUP | POLLERR)) && !c.connecting) on_readable(c);
    }
  }
  fire_timers();
  for (auto it = conns_.begin(); it != conns_.end();) {
    if (it->second->reap) {
      if (it->second->fd >= 0) ::close(it->second->fd);
      it = conns_.erase(it);
    } else {
      ++it;
    }
  }
}

void SocketDriver::run_until(double t) {
  while (!stopped_ && now() < t) poll_once(t);
}

void SocketDriver::run() {
  while (!stopped_ && (!conns_.empty() || free_timers_ > 0)) poll_once(now() + 0.5);
}

}  // namespace h2slow::sim
