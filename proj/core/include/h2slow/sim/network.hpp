#pragma once

// Discrete-event TCP network with a capture tap at the server NIC.
//
// Client segments are captured when they reach the server, server segments
// when they leave it, so capture order equals the server's processing order.

#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <queue>
#include <unordered_map>
#include <vector>

#include "h2slow/bytes.hpp"
#include "h2slow/flow.hpp"
#include "h2slow/pcap.hpp"

namespace h2slow::sim {

inline Micros to_micros(double seconds) { return static_cast<Micros>(seconds * 1e6 + (seconds >= 0 ? 0.5 : -0.5)); }

class EventLoop {
 public:
  Micros now() const { return now_; }
  // Runs `fn` at `t` (clamped to now). Equal times run in scheduling order.
  void at(Micros t, std::function<void()> fn);
  bool empty() const { return queue_.empty(); }
  // Runs one event; false when idle.
  bool step();
  void run_until(Micros t);
  void run();

 private:
  struct Item {
    Micros t;
    std::uint64_t order;
    std::function<void()> fn;
    bool operator>(const Item& o) const { return t != o.t ? t > o.t : order > o.order; }
  };
  Micros now_ = 0;
  std::uint64_t order_ = 0;
  std::priority_queue<Item, std::vector<Item>, std::greater<>> queue_;
};

// One side of a connection, as an application sees it. Shared by the virtual
// network and the real-socket driver.
class Transport {
 public:
  virtual ~Transport() = default;
  virtual std::uint64_t id() const = 0;
  virtual double now() const = 0;
  virtual void send(ByteView bytes) = 0;
  // Sends FIN. Further sends are dropped.
  virtual void close() = 0;
  virtual bool closed() const = 0;
  virtual void after(double delay_s, std::function<void()> fn) = 0;
  // Client -> server 4-tuple, when known.
  virtual std::optional<FlowKey> flow_key() const = 0;
};

class App {
 public:
  virtual ~App() = default;
  virtual void on_open(Transport&) {}
  virtual void on_data(Transport&, ByteView) {}
  // FIN or RST from the peer.
  virtual void on_peer_close(Transport&) {}
  // Client side only: the server answered the SYN with RST.
  virtual void on_refused(Transport&) {}
};

// Server admission policy: returns the per-connection app, or null to refuse.
class Acceptor {
 public:
  virtual ~Acceptor() = default;
  virtual std::unique_ptr<App> on_syn(std::uint64_t conn_id, double now, const FlowKey& key) = 0;
};

struct Endpoint {
  IpAddress ip;
  std::uint16_t port = 0;
};

class Network {
 public:
  static constexpr std::size_t kMss = 1460;

  Network(EventLoop& loop, Endpoint server, Acceptor& acceptor);
  ~Network();
  Network(const Network&) = delete;
  Network& operator=(const Network&) = delete;

  // Schedules a SYN from `client` at time `at`; returns the connection id.
  std::uint64_t connect(Endpoint client, Micros one_way_latency, std::unique_ptr<App> app, Micros at);

  FlowKey key_of(std::uint64_t conn_id) const;
  const Capture& capture() const { return capture_; }
  Capture take_capture() { return std::move(capture_); }

 private:
  struct Conn;
  class Side;

  void tap(const Conn& c, int from, std::uint8_t flags, ByteView payload, std::uint32_t seq);
  void send_from(Conn& c, int from, ByteView bytes);
  void close_from(Conn& c, int from);
  void deliver(Conn& c, int to, std::function<void(App&, Transport&)> fn);

  EventLoop& loop_;
  Endpoint server_;
  Acceptor& acceptor_;
  Capture capture_;
  std::uint64_t next_id_ = 1;
  std::unordered_map<std::uint64_t, std::unique_ptr<Conn>> conns_;
};

}  // namespace h2slow::sim
