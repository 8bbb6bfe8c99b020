#pragma once

// Real-socket runtime for the same App/Acceptor objects the virtual network
// drives: non-blocking TCP, one poll loop, wall-clock timers.
//
// Connections accepted by a listener can be mirrored to a tap as synthesized
// Ethernet/IPv4/TCP packets, which stands in for a capture at the server NIC.

#include <chrono>
#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <queue>
#include <string>
#include <vector>

#include "h2slow/pcap.hpp"
#include "h2slow/sim/network.hpp"

namespace h2slow::sim {

class SocketDriver {
 public:
  using Tap = std::function<void(const RawPacket&)>;

  SocketDriver();
  ~SocketDriver();
  SocketDriver(const SocketDriver&) = delete;
  SocketDriver& operator=(const SocketDriver&) = delete;

  // Seconds since construction.
  double now() const;

  // Binds and listens; port 0 picks an ephemeral port. Returns the bound port.
  std::uint16_t listen(const std::string& host, std::uint16_t port, Acceptor& acceptor);

  // Starts a non-blocking connect `delay_s` from now. Throws ConnectRefused
  // for an unusable address.
  std::uint64_t connect(const std::string& host, std::uint16_t port, std::unique_ptr<App> app,
                        double delay_s = 0.0);

  // Client->server 4-tuple of a connection once its socket exists.
  std::optional<FlowKey> key_of(std::uint64_t conn_id) const;

  void set_tap(Tap tap) { tap_ = std::move(tap); }

  void at(double t, std::function<void()> fn);

  void run_until(double t);
  // Until no connection and no free-standing timer is left, or stop().
  void run();
  void stop() { stopped_ = true; }

  std::size_t open_connections() const { return conns_.size(); }

 private:
  struct Conn;
  class Side;
  struct Listener {
    int fd = -1;
    Acceptor* acceptor = nullptr;
  };
  struct Timer {
    double t;
    std::uint64_t order;
    std::uint64_t conn;  // 0 when not tied to a connection
    std::function<void()> fn;
    bool operator>(const Timer& o) const { return t != o.t ? t > o.t : order > o.order; }
  };

  void schedule(double t, std::uint64_t conn, std::function<void()> fn);
  void poll_once(double deadline);
  void fire_timers();
  void accept_from(Listener& l);
  void start_connect(std::uint64_t id, const std::string& host, std::uint16_t port);
  void on_readable(Conn& c);
  void on_writable(Conn& c);
  void send(Conn& c, ByteView bytes);
  void close(Conn& c);
  void flush(Conn& c);
  void maybe_reap(Conn& c);
  void tap(Conn& c, bool from_client, std::uint8_t flags, ByteView payload);

  std::chrono::steady_clock::time_point start_;
  Micros epoch_us_ = 0;
  Tap tap_;
  bool stopped_ = false;
  std::uint64_t next_id_ = 1;
  std::uint64_t timer_order_ = 0;
  std::size_t free_timers_ = 0;
  std::vector<Listener> listeners_;
  std::map<std::uint64_t, std::unique_ptr<Conn>> conns_;
  std::priority_queue<Timer, std::vector<Timer>, std::greater<>> timers_;
};

}  // namespace h2slow::sim
