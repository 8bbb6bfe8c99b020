#include "h2slow/flow.hpp"

#include <algorithm>
#include <charconv>
#include <cstdio>

#include "h2slow/errors.hpp"

namespace h2slow {

namespace {

// Out-of-order data beyond this is abandoned and the flow flagged.
constexpr std::size_t kMaxPendingBytes = 4u << 20;

std::string endpoint_to_string(const IpAddress& ip, std::uint16_t port) {
  if (ip.is_v6()) return "[" + ip.to_string() + "]:" + std::to_string(port);
  return ip.to_string() + ":" + std::to_string(port);
}

std::pair<IpAddress, std::uint16_t> parse_endpoint(std::string_view text) {
  std::string_view host;
  std::string_view port;
  if (!text.empty() && text.front() == '[') {
    const auto close = text.find(']');
    if (close == std::string_view::npos || close + 1 >= text.size() || text[close + 1] != ':') {
      throw InputError("bad endpoint: " + std::string(text));
    }
    host = text.substr(1, close - 1);
    port = text.substr(close + 2);
  } else {
    const auto colon = text.rfind(':');
    if (colon == std::string_view::npos) throw InputError("bad endpoint: " + std::string(text));
    host = text.substr(0, colon);
    port = text.substr(colon + 1);
  }
  unsigned value = 0;
  auto [ptr, ec] = std::from_chars(port.data(), port.data() + port.size(), value);
  if (ec != std::errc{} || ptr != port.data() + port.size() || value > 65535) {
    throw InputError("bad port: " + std::string(port));
  }
  return {IpAddress::parse(host), static_cast<std::uint16_t>(value)};
}

FlowKey canonical(const FlowKey& k) {
  if (std::tie(k.src_ip, k.src_port) <= std::tie(k.dst_ip, k.dst_port)) return k;
  return FlowKey{k.dst_ip, k.dst_port, k.src_ip, k.src_port};
}

// Orders one direction's TCP payload by sequence number. Offsets are kept as
// 64-bit byte counts from the initial sequence number so wraparound is harmless.
class StreamReassembler {
 public:
  bool initialized() const { return initialized_; }

  void init(std::uint32_t next_seq) {
    initialized_ = true;
    next_seq_ = next_seq;
  }

  // Appends in-order bytes made available by this segment to `out`.
  void push(std::uint32_t seq, ByteView payload, Bytes& out, std::size_t& duplicates, bool& gap) {
    if (payload.empty()) return;
    if (!initialized_) init(seq);
    const auto diff = static_cast<std::int32_t>(seq - next_seq_);
    const std::int64_t abs = static_cast<std::int64_t>(delivered_) + diff;
    const std::int64_t end = abs + static_cast<std::int64_t>(payload.size());
    if (end <= static_cast<std::int64_t>(delivered_)) {
      ++duplicates;
      return;
    }
    if (abs < 0) return;  // before the stream start; nothing sane to do
    auto [it, inserted] =
        pending_.try_emplace(static_cast<std::uint64_t>(abs), Bytes(payload.begin(), payload.end()));
    if (!inserted) {
      if (it->second.size() >= payload.size()) {
        ++duplicates;
      } else {
        pending_bytes_ += payload.size() - it->second.size();
        it->second.assign(payload.begin(), payload.end());
      }
    } else {
      pending_bytes_ += payload.size();
    }
    drain(out);
    if (pending_bytes_ > kMaxPendingBytes) {
      gap = true;
      pending_.clear();
      pending_bytes_ = 0;
    }
  }

  bool has_pending() const { return !pending_.empty(); }

 private:
  void drain(Bytes& out) {
    while (!pending_.empty()) {
      auto it = pending_.begin();
      if (it->first > delivered_) break;
      const std::uint64_t skip = delivered_ - it->first;
      const Bytes& bytes = it->second;
      if (skip < bytes.size()) {
        const auto fresh = static_cast<std::ptrdiff_t>(bytes.size() - skip);
        out.insert(out.end(), bytes.end() - fresh, bytes.end());
        delivered_ += static_cast<std::uint64_t>(fresh);
        next_seq_ += static_cast<std::uint32_t>(fresh);
      }
      pending_bytes_ -= bytes.size();
      pending_.erase(it);
    }
  }

  bool initialized_ = false;
  std::uint32_t next_seq_ = 0;
  std::uint64_t delivered_ = 0;
  std::map<std::uint64_t, Bytes> pending_;
  std::size_t pending_bytes_ = 0;
};

// Cuts a reassembled byte stream into frames; the client side first looks
// for the connection preface.
class FrameStreamParser {
 public:
  explicit FrameStreamParser(bool client_side) : awaiting_preface_(client_side) {}

  bool dead() const { return dead_; }

  // Returns false when the stream turned out to be malformed on this call.
  template <class Emit>
  bool feed(ByteView bytes, Emit&& emit) {
    if (dead_) return true;
    append(buffer_, bytes);
    std::size_t off = 0;
    if (awaiting_preface_) {
      const std::size_t n = std::min(buffer_.size(), kConnectionPreface.size());
      const bool prefix_match =
          std::equal(buffer_.begin(), buffer_.begin() + static_cast<std::ptrdiff_t>(n),
                     kConnectionPreface.begin());
      if (prefix_match && n < kConnectionPreface.size()) return true;  // wait for more
      awaiting_preface_ = false;
      if (prefix_match) {
        emit(FlowContent{PrefaceMarker{}});
        off = kConnectionPreface.size();
      }
    }
    bool ok = true;
    while (off < buffer_.size()) {
      DecodeResult r = decode_frame(ByteView(buffer_).subspan(off));
      if (auto* d = std::get_if<Decoded>(&r)) {
        off += d->consumed;
        emit(FlowContent{std::move(d->frame)});
      } else if (std::holds_alternative<Truncated>(r)) {
        break;
      } else {
        dead_ = true;
        ok = false;
        buffer_.clear();
        return ok;
      }
    }
    buffer_.erase(buffer_.begin(), buffer_.begin() + static_cast<std::ptrdiff_t>(off));
    return ok;
  }

 private:
  bool awaiting_preface_;
  bool dead_ = false;
  Bytes buffer_;
};

}  // namespace

std::string FlowKey::to_string() const {
  return endpoint_to_string(src_ip, src_port) + "->" + endpoint_to_string(dst_ip, dst_port);
}

FlowKey FlowKey::parse(std::string_view text) {
  const auto arrow = text.find("->");
  if (arrow == std::string_view::npos) throw InputError("bad flow key: " + std::string(text));
  auto [sip, sport] = parse_endpoint(text.substr(0, arrow));
  auto [dip, dport] = parse_endpoint(text.substr(arrow + 2));
  return FlowKey{sip, sport, dip, dport};
}

std::size_t FlowKeyHash::operator()(const FlowKey& k) const noexcept {
  std::size_t h = 1469598103934665603ull;
  auto mix = [&](std::uint8_t b) { h = (h ^ b) * 1099511628211ull; };
  for (auto b : k.src_ip.bytes()) mix(b);
  for (auto b : k.dst_ip.bytes()) mix(b);
  mix(static_cast<std::uint8_t>(k.src_port));
  mix(static_cast<std::uint8_t>(k.src_port >> 8));
  mix(static_cast<std::uint8_t>(k.dst_port));
  mix(static_cast<std::uint8_t>(k.dst_port >> 8));
  return h;
}

std::string to_string(CloseKind kind) {
  switch (kind) {
    case CloseKind::kFin: return "fin";
    case CloseKind::kRst: return "rst";
    case CloseKind::kCaptureEnd: return "capture-end";
  }
  return "?";
}

struct FlowAssembler::Connection {
  FlowKey key;  // client -> server
  std::uint64_t order = 0;
  bool syn_seen = false;
  bool synack_seen = false;
  bool established = false;
  bool closed = false;
  bool gap = false;
  std::uint32_t client_isn = 0;
  StreamReassembler reasm[2];
  FrameStreamParser parser[2] = {FrameStreamParser(true), FrameStreamParser(false)};
};

FlowAssembler::FlowAssembler(FlowSink& sink, LinkType link) : sink_(sink), link_(link) {}

FlowAssembler::~FlowAssembler() = default;

void FlowAssembler::feed(const RawPacket& packet) {
  ++stats_.packets;
  const double t = to_seconds(packet.ts);
  last_t_ = std::max(last_t_, t);
  auto seg = parse_tcp_packet(packet.data, link_);
  if (!seg) {
    ++stats_.non_tcp;
    return;
  }
  const FlowKey tuple{seg->src_ip, seg->src_port, seg->dst_ip, seg->dst_port};
  const FlowKey canon = canonical(tuple);
  auto it = conns_.find(canon);

  const bool syn = seg->has(tcp_flags::kSyn);
  const bool ack = seg->has(tcp_flags::kAck);
  const bool rst = seg->has(tcp_flags::kRst);
  const bool fin = seg->has(tcp_flags::kFin);

  if (syn && !ack) {
    if (it != conns_.end()) {
      Connection& old = *it->second;
      if (!old.established && !old.closed && old.syn_seen && old.key == tuple &&
          old.client_isn == seg->seq) {
        return;  // retransmitted SYN
      }
      if (old.established && !old.closed) {
        close(old, t, CloseKind::kCaptureEnd);
      } else if (!old.established) {
        ++stats_.refused;
      }
      conns_.erase(it);
    }
    auto c = std::make_unique<Connection>();
    c->key = tuple;
    c->order = next_order_++;
    c->syn_seen = true;
    c->client_isn = seg->seq;
    c->reasm[0].init(seg->seq + 1);
    conns_.emplace(canon, std::move(c));
    return;
  }

  if (it == conns_.end()) {
    if (rst) return;
    auto c = std::make_unique<Connection>();
    c->order = next_order_++;
    if (syn && ack) {
      c->key = FlowKey{tuple.dst_ip, tuple.dst_port, tuple.src_ip, tuple.src_port};
    } else if (tuple.src_port >= tuple.dst_port) {
      c->key = tuple;
    } else {
      c->key = FlowKey{tuple.dst_ip, tuple.dst_port, tuple.src_ip, tuple.src_port};
    }
    it = conns_.emplace(canon, std::move(c)).first;
  }

  Connection& c = *it->second;
  if (c.closed) {
    if (!seg->payload.empty()) ++stats_.post_close_payloads;
    return;
  }
  const Direction dir = (tuple == c.key) ? Direction::kClientToServer : Direction::kServerToClient;
  const int d = dir == Direction::kClientToServer ? 0 : 1;

  if (syn && ack) {
    if (dir == Direction::kServerToClient) {
      c.synack_seen = true;
      c.reasm[1].init(seg->seq + 1);
    }
    return;
  }

  if (rst) {
    if (!c.established) {
      if (c.syn_seen) ++stats_.refused;
      conns_.erase(it);
      return;
    }
    close(c, t, CloseKind::kRst);
    return;
  }

  if (!c.established) {
    const bool handshake_done = dir == Direction::kClientToServer && ack && c.synack_seen;
    if (handshake_done || !seg->payload.empty() || fin) {
      c.established = true;
      ++stats_.flows;
      sink_.on_established(c.key, t, c.syn_seen && c.synack_seen);
    } else {
      return;
    }
  }

  if (!seg->payload.empty()) {
    Bytes in_order;
    c.reasm[d].push(seg->seq, seg->payload, in_order, stats_.duplicate_segments, c.gap);
    if (!in_order.empty()) deliver(c, dir, in_order, t);
  }
  if (fin) close(c, t, CloseKind::kFin);
}

void FlowAssembler::deliver(Connection& c, Direction dir, ByteView bytes, double t) {
  const int d = dir == Direction::kClientToServer ? 0 : 1;
  const bool ok = c.parser[d].feed(bytes, [&](FlowContent content) {
    sink_.on_item(c.key, FlowItem{t, dir, std::move(content)});
  });
  if (!ok) ++stats_.malformed_streams;
}

void FlowAssembler::close(Connection& c, double t, CloseKind kind) {
  c.closed = true;
  const bool gap = c.gap || c.reasm[0].has_pending() || c.reasm[1].has_pending();
  if (gap) ++stats_.reassembly_gaps;
  sink_.on_closed(c.key, t, kind, gap);
}

void FlowAssembler::finish() {
  std::vector<Connection*> open;
  for (auto& [canon, c] : conns_) {
    (void)canon;
    if (c->established && !c->closed) {
      open.push_back(c.get());
    } else if (!c->established && c->syn_seen) {
      ++stats_.refused;
    }
  }
  std::sort(open.begin(), open.end(),
            [](const Connection* a, const Connection* b) { return a->order < b->order; });
  for (Connection* c : open) close(*c, last_t_, CloseKind::kCaptureEnd);
  conns_.clear();
}

void FlowRecordCollector::on_established(const FlowKey& key, double t, bool handshake_seen) {
  FlowRecord r;
  r.key = key;
  r.established_at = t;
  r.handshake_seen = handshake_seen;
  open_[key] = records_.size();
  records_.push_back(std::move(r));
}

void FlowRecordCollector::on_item(const FlowKey& key, const FlowItem& item) {
  auto it = open_.find(key);
  if (it == open_.end()) return;
  records_[it->second].items.push_back(item);
}

void FlowRecordCollector::on_closed(const FlowKey& key, double t, CloseKind kind,
                                    bool reassembly_gap) {
  auto it = open_.find(key);
  if (it == open_.end()) return;
  FlowRecord& r = records_[it->second];
  r.close_kind = kind;
  r.reassembly_gap = reassembly_gap;
  if (kind != CloseKind::kCaptureEnd) r.closed_at = t;
  open_.erase(it);
}

std::vector<FlowRecord> FlowRecordCollector::take() {
  for (auto& r : records_) {
    std::stable_sort(r.items.begin(), r.items.end(),
                     [](const FlowItem& a, const FlowItem& b) { return a.t < b.t; });
  }
  open_.clear();
  return std::move(records_);
}

std::vector<FlowRecord> assemble(const Capture& capture, AssemblerStats* stats) {
  FlowRecordCollector collector;
  FlowAssembler assembler(collector, capture.link);
  for (const auto& p : capture.packets) assembler.feed(p);
  assembler.finish();
  if (stats) *stats = assembler.stats();
  return collector.take();
}

double waiting_time(const FlowRecord& flow) {
  if (!flow.closed_at) throw StillOpen();
  return *flow.closed_at - flow.established_at;
}

std::vector<CdfPoint> empirical_cdf(std::vector<double> samples) {
  std::vector<CdfPoint> out;
  if (samples.empty()) return out;
  std::sort(samples.begin(), samples.end());
  const double total = static_cast<double>(samples.size());
  for (std::size_t i = 0; i < samples.size(); ++i) {
    if (i + 1 < samples.size() && samples[i + 1] == samples[i]) continue;
    out.push_back({samples[i], static_cast<double>(i + 1) / total});
  }
  return out;
}

std::vector<CdfPoint> waiting_time_cdf(std::span<const FlowRecord> flows) {
  std::vector<double> durations;
  for (const auto& f : flows) {
    if (f.closed_at) durations.push_back(waiting_time(f));
  }
  if (durations.empty()) throw NoClosedFlows();
  return empirical_cdf(std::move(durations));
}

std::string cdf_to_csv(std::span<const CdfPoint> cdf, const std::string& value_column) {
  std::string out = value_column + ",fraction\n";
  char line[64];
  for (const auto& p : cdf) {
    std::snprintf(line, sizeof line, "%.6f,%.6f\n", p.value, p.fraction);
    out += line;
  }
  return out;
}

}  // namespace h2slow
