#include "h2slow/sim/network.hpp"

#include <algorithm>

namespace h2slow::sim {

void EventLoop::at(Micros t, std::function<void()> fn) {
  queue_.push(Item{std::max(t, now_), order_++, std::move(fn)});
}

bool EventLoop::step() {
  if (queue_.empty()) return false;
  Item item = queue_.top();
  queue_.pop();
  now_ = item.t;
  item.fn();
  return true;
}

void EventLoop::run_until(Micros t) {
  while (!queue_.empty() && queue_.top().t <= t) step();
  now_ = std::max(now_, t);
}

void EventLoop::run() {
  while (step()) {
  }
}

class Network::Side final : public Transport {
 public:
  Side(Network& net, Conn& conn, int index) : net_(net), conn_(conn), index_(index) {}

  std::uint64_t id() const override;
  double now() const override { return to_seconds(net_.loop_.now()); }
  void send(ByteView bytes) override { net_.send_from(conn_, index_, bytes); }
  void close() override { net_.close_from(conn_, index_); }
  bool closed() const override;
  std::optional<FlowKey> flow_key() const override;
  void after(double delay_s, std::function<void()> fn) override {
    net_.loop_.at(net_.loop_.now() + to_micros(std::max(0.0, delay_s)), std::move(fn));
  }

 private:
  Network& net_;
  Conn& conn_;
  int index_;
};

struct Network::Conn {
  std::uint64_t id = 0;
  FlowKey key;
  Micros latency = 0;
  bool refused = false;
  std::unique_ptr<App> app[2];
  std::uint32_t next_seq[2] = {0, 0};
  bool fin_sent[2] = {false, false};
  std::unique_ptr<Side> side[2];
};

std::uint64_t Network::Side::id() const { return conn_.id; }
bool Network::Side::closed() const { return conn_.fin_sent[index_] || conn_.refused; }
std::optional<FlowKey> Network::Side::flow_key() const { return conn_.key; }

Network::Network(EventLoop& loop, Endpoint server, Acceptor& acceptor)
    : loop_(loop), server_(std::move(server)), acceptor_(acceptor) {}

Network::~Network() = default;

FlowKey Network::key_of(std::uint64_t conn_id) const { return conns_.at(conn_id)->key; }

void Network::tap(const Conn& c, int from, std::uint8_t flags, ByteView payload, std::uint32_t seq) {
  TcpSegmentSpec spec;
  if (from == 0) {
    spec.src_ip = c.key.src_ip;
    spec.src_port = c.key.src_port;
    spec.dst_ip = c.key.dst_ip;
    spec.dst_port = c.key.dst_port;
  } else {
    spec.src_ip = c.key.dst_ip;
    spec.src_port = c.key.dst_port;
    spec.dst_ip = c.key.src_ip;
    spec.dst_port = c.key.src_port;
  }
  spec.seq = seq;
  spec.ack = (flags & tcp_flags::kAck) ? c.next_seq[1 - from] : 0;
  spec.flags = flags;
  spec.payload = payload;
  capture_.packets.push_back(RawPacket{loop_.now(), build_tcp_packet(spec)});
}

void Network::deliver(Conn& c, int to, std::function<void(App&, Transport&)> fn) {
  Conn* cp = &c;
  loop_.at(loop_.now() + c.latency, [cp, to, fn = std::move(fn)] {
    if (cp->app[to]) fn(*cp->app[to], *cp->side[to]);
  });
}

std::uint64_t Network::connect(Endpoint client, Micros one_way_latency, std::unique_ptr<App> app,
                               Micros at) {
  auto conn = std::make_unique<Conn>();
  Conn& c = *conn;
  c.id = next_id_++;
  c.key = FlowKey{client.ip, client.port, server_.ip, server_.port};
  c.latency = std::max<Micros>(one_way_latency, 0);
  c.app[0] = std::move(app);
  c.side[0] = std::make_unique<Side>(*this, c, 0);
  c.side[1] = std::make_unique<Side>(*this, c, 1);
  const std::uint32_t client_isn = static_cast<std::uint32_t>(c.id * 2654435761u);
  const std::uint32_t server_isn = static_cast<std::uint32_t>(c.id * 40503u + 977u);
  conns_.emplace(c.id, std::move(conn));

  Conn* cp = &c;
  loop_.at(at + c.latency, [this, cp, client_isn, server_isn] {
    Conn& c = *cp;
    tap(c, 0, tcp_flags::kSyn, {}, client_isn);
    c.next_seq[0] = client_isn + 1;
    c.app[1] = acceptor_.on_syn(c.id, to_seconds(loop_.now()), c.key);
    if (!c.app[1]) {
      c.refused = true;
      c.next_seq[1] = 0;
      tap(c, 1, tcp_flags::kRst | tcp_flags::kAck, {}, 0);
      deliver(c, 0, [](App& a, Transport& t) { a.on_refused(t); });
      return;
    }
    tap(c, 1, tcp_flags::kSyn | tcp_flags::kAck, {}, server_isn);
    c.next_seq[1] = server_isn + 1;
    loop_.at(loop_.now() + c.latency, [this, cp] {
      Conn& c = *cp;
      // the handshake ACK reaches the server one latency later
      loop_.at(loop_.now() + c.latency, [this, cp] {
        tap(*cp, 0, tcp_flags::kAck, {}, cp->next_seq[0]);
        cp->app[1]->on_open(*cp->side[1]);
      });
      c.app[0]->on_open(*c.side[0]);
    });
  });
  return c.id;
}

void Network::send_from(Conn& c, int from, ByteView bytes) {
  if (c.refused || c.fin_sent[from] || bytes.empty()) return;
  for (std::size_t off = 0; off < bytes.size(); off += kMss) {
    const std::size_t len = std::min(kMss, bytes.size() - off);
    Bytes chunk(bytes.begin() + static_cast<std::ptrdiff_t>(off),
                bytes.begin() + static_cast<std::ptrdiff_t>(off + len));
    const std::uint32_t seq = c.next_seq[from];
    c.next_seq[from] += static_cast<std::uint32_t>(len);
    const std::uint8_t flags = tcp_flags::kPsh | tcp_flags::kAck;
    if (from == 1) {
      tap(c, 1, flags, chunk, seq);
      auto data = std::make_shared<Bytes>(std::move(chunk));
      deliver(c, 0, [data](App& a, Transport& t) { a.on_data(t, *data); });
    } else {
      Conn* cp = &c;
      auto data = std::make_shared<Bytes>(std::move(chunk));
      loop_.at(loop_.now() + c.latency, [this, cp, data, seq, flags] {
        tap(*cp, 0, flags, *data, seq);
        if (cp->app[1]) cp->app[1]->on_data(*cp->side[1], *data);
      });
    }
  }
}

void Network::close_from(Conn& c, int from) {
  if (c.refused || c.fin_sent[from]) return;
  c.fin_sent[from] = true;
  const std::uint32_t seq = c.next_seq[from];
  c.next_seq[from] += 1;
  const std::uint8_t flags = tcp_flags::kFin | tcp_flags::kAck;
  if (from == 1) {
    tap(c, 1, flags, {}, seq);
    deliver(c, 0, [](App& a, Transport& t) { a.on_peer_close(t); });
  } else {
    Conn* cp = &c;
    loop_.at(loop_.now() + c.latency, [this, cp, seq, flags] {
      tap(*cp, 0, flags, {}, seq);
      if (cp->app[1]) cp->app[1]->on_peer_close(*cp->side[1]);
    });
  }
}

}  // namespace h2slow::sim
