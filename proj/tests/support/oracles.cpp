#include "oracles.hpp"

#include <algorithm>

#include "h2slow/packet.hpp"

namespace oracle {

using namespace h2slow;

std::map<Triple, std::uint64_t> window_pairs(const std::vector<EventSymbol>& seq, std::size_t n) {
  std::map<Triple, std::uint64_t> out;
  for (std::size_t i = 0; i < seq.size(); ++i) {
    for (std::size_t j = i + 1; j < seq.size() && j <= i + n; ++j) {
      ++out[Triple{seq[i], seq[j], static_cast<std::uint32_t>(j - i)}];
    }
  }
  return out;
}

std::uint64_t window_pair_total(const std::vector<EventSymbol>& seq, std::size_t n) {
  std::uint64_t total = 0;
  for (const auto& [t, c] : window_pairs(seq, n)) total += c;
  return total;
}

std::uint64_t mismatches(const std::vector<EventSymbol>& seq, std::size_t n, const std::set<Triple>& db) {
  std::uint64_t m = 0;
  for (const auto& [t, c] : window_pairs(seq, n)) {
    if (!db.count(t)) m += c;
  }
  return m;
}

std::vector<EventSymbol> sample_sequence() { return {kStart, kStar, kMcs, kIws, kStar, kWu, kStar, kPref}; }

std::vector<EventSymbol> w1_slice() { return {kStart, kStar, kMcs, kIws}; }

std::vector<EventSymbol> test_sequence() { return {kStart, kStar, kMcs, kStar, kIws, kStar, kWu, kStar, kPref}; }

std::set<Triple> w1_table() {
  return {
      {kStart, kStar, 1}, {kStart, kMcs, 2}, {kStart, kIws, 3},
      {kStar, kMcs, 1},   {kStar, kIws, 2},  {kMcs, kIws, 1},
  };
}

std::set<Triple> full_table_printed_cells() {
  return {
      {kStart, kStar, 1}, {kStart, kMcs, 2}, {kStart, kIws, 3},
      {kStar, kMcs, 1},   {kStar, kWu, 1},   {kStar, kPref, 1},
      {kStar, kIws, 2},   {kStar, kStar, 2}, {kStar, kStar, 3},
      {kStar, kPref, 3},  {kMcs, kIws, 1},   {kMcs, kStar, 2},
      {kMcs, kWu, 3},     {kIws, kStar, 1},  {kIws, kWu, 2},
      {kIws, kStar, 3},
  };
}

std::set<Triple> full_table() {
  auto t = full_table_printed_cells();
  t.insert({kWu, kStar, 1});
  t.insert({kWu, kPref, 2});
  return t;
}

std::vector<EventSymbol> random_sequence(Rng& rng, std::size_t length) {
  const auto base = base_alphabet();
  std::vector<EventSymbol> out;
  out.reserve(length);
  for (std::size_t i = 0; i < length; ++i) {
    const std::uint64_t r = rng.uniform_int(0, base.size() + 2);
    out.push_back(r < base.size() ? base[r] : EventSymbol::timeout(static_cast<std::uint32_t>(r - base.size() + 1)));
  }
  return out;
}

namespace {

Bytes random_bytes(Rng& rng, std::size_t max_len) {
  Bytes b(rng.uniform_int(0, max_len));
  for (auto& x : b) x = static_cast<std::uint8_t>(rng.uniform_int(0, 255));
  return b;
}

std::uint32_t random_stream(Rng& rng) { return static_cast<std::uint32_t>(rng.uniform_int(1, kStreamIdMask)); }

std::optional<Padding> random_padding(Rng& rng) {
  if (!rng.chance(0.3)) return std::nullopt;
  Padding p;
  // padding octets must be zero on the wire
  p.bytes.assign(rng.uniform_int(0, 20), 0);
  return p;
}

}  // namespace

Frame random_frame(Rng& rng) {
  Frame f;
  switch (rng.uniform_int(0, 9)) {
    case 0: {
      DataBody d;
      d.end_stream = rng.chance(0.5);
      d.payload = random_bytes(rng, 64);
      d.padding = random_padding(rng);
      f.header.type = static_cast<std::uint8_t>(FrameType::kData);
      f.header.stream_id = random_stream(rng);
      f.body = d;
      break;
    }
    case 1: {
      HeadersBody h;
      h.end_stream = rng.chance(0.5);
      h.end_headers = rng.chance(0.5);
      h.block = random_bytes(rng, 64);
      if (rng.chance(0.3)) {
        std::array<std::uint8_t, 5> pr{};
        for (auto& x : pr) x = static_cast<std::uint8_t>(rng.uniform_int(0, 255));
        h.priority = pr;
      }
      h.padding = random_padding(rng);
      f.header.type = static_cast<std::uint8_t>(FrameType::kHeaders);
      f.header.stream_id = random_stream(rng);
      f.body = h;
      break;
    }
    case 2: {
      ContinuationBody c;
      c.end_headers = rng.chance(0.5);
      c.block = random_bytes(rng, 64);
      f.header.type = static_cast<std::uint8_t>(FrameType::kContinuation);
      f.header.stream_id = random_stream(rng);
      f.body = c;
      break;
    }
    case 3: {
      SettingsBody s;
      s.ack = rng.chance(0.3);
      if (!s.ack) {
        const auto count = rng.uniform_int(0, 6);
        for (std::uint64_t i = 0; i < count; ++i) {
          s.params.push_back({static_cast<std::uint16_t>(rng.uniform_int(0, 0xffff)),
                              static_cast<std::uint32_t>(rng.uniform_int(0, 0xffffffffu))});
        }
      }
      f.header.type = static_cast<std::uint8_t>(FrameType::kSettings);
      f.body = s;
      break;
    }
    case 4: {
      f.header.type = static_cast<std::uint8_t>(FrameType::kWindowUpdate);
      f.header.stream_id = rng.chance(0.5) ? 0 : random_stream(rng);
      f.body = WindowUpdateBody{static_cast<std::uint32_t>(rng.uniform_int(0, 0x7fffffffu))};
      break;
    }
    case 5: {
      GoAwayBody g;
      g.last_stream_id = static_cast<std::uint32_t>(rng.uniform_int(0, kStreamIdMask));
      g.error_code = static_cast<std::uint32_t>(rng.uniform_int(0, 13));
      g.debug_data = random_bytes(rng, 32);
      f.header.type = static_cast<std::uint8_t>(FrameType::kGoAway);
      f.body = g;
      break;
    }
    case 6: {
      f.header.type = static_cast<std::uint8_t>(FrameType::kPing);
      f.header.flags = rng.chance(0.5) ? frame_flags::kAck : 0;
      f.body = OtherBody{random_bytes(rng, 0)};
      std::get<OtherBody>(f.body).raw.assign(8, static_cast<std::uint8_t>(rng.uniform_int(0, 255)));
      break;
    }
    case 7: {
      f.header.type = static_cast<std::uint8_t>(FrameType::kPriority);
      f.header.stream_id = random_stream(rng);
      Bytes raw(5);
      for (auto& x : raw) x = static_cast<std::uint8_t>(rng.uniform_int(0, 255));
      f.body = OtherBody{raw};
      break;
    }
    case 8: {
      f.header.type = static_cast<std::uint8_t>(FrameType::kRstStream);
      f.header.stream_id = random_stream(rng);
      Bytes raw(4);
      for (auto& x : raw) x = static_cast<std::uint8_t>(rng.uniform_int(0, 255));
      f.body = OtherBody{raw};
      break;
    }
    default: {
      // extension frame type
      f.header.type = static_cast<std::uint8_t>(rng.uniform_int(0x0a, 0xff));
      f.header.flags = static_cast<std::uint8_t>(rng.uniform_int(0, 255));
      f.header.stream_id = static_cast<std::uint32_t>(rng.uniform_int(0, kStreamIdMask));
      f.body = OtherBody{random_bytes(rng, 48)};
      break;
    }
  }
  sync_header(f);
  return f;
}

ConversationBuilder::ConversationBuilder(std::string client_ip, std::uint16_t client_port, std::string server_ip,
                                         std::uint16_t server_port)
    : cip_(std::move(client_ip)), cport_(client_port), sip_(std::move(server_ip)), sport_(server_port) {}

void ConversationBuilder::emit(double t, bool from_client, std::uint8_t flags, const Bytes& payload) {
  TcpSegmentSpec s;
  const int d = from_client ? 0 : 1;
  s.src_ip = IpAddress::parse(from_client ? cip_ : sip_);
  s.dst_ip = IpAddress::parse(from_client ? sip_ : cip_);
  s.src_port = from_client ? cport_ : sport_;
  s.dst_port = from_client ? sport_ : cport_;
  s.seq = seq_[d];
  s.ack = (flags & tcp_flags::kAck) ? seq_[1 - d] : 0;
  s.flags = flags;
  s.payload = payload;
  packets_.push_back(RawPacket{static_cast<Micros>(t * 1e6 + 0.5), build_tcp_packet(s)});
  seq_[d] += static_cast<std::uint32_t>(payload.size());
  if (flags & (tcp_flags::kSyn | tcp_flags::kFin)) seq_[d] += 1;
}

ConversationBuilder& ConversationBuilder::handshake(double t) {
  emit(t, true, tcp_flags::kSyn, {});
  emit(t, false, tcp_flags::kSyn | tcp_flags::kAck, {});
  emit(t, true, tcp_flags::kAck, {});
  return *this;
}

ConversationBuilder& ConversationBuilder::client_bytes(double t, const Bytes& bytes) {
  emit(t, true, tcp_flags::kPsh | tcp_flags::kAck, bytes);
  return *this;
}

ConversationBuilder& ConversationBuilder::server_bytes(double t, const Bytes& bytes) {
  emit(t, false, tcp_flags::kPsh | tcp_flags::kAck, bytes);
  return *this;
}

ConversationBuilder& ConversationBuilder::client_frame(double t, const Frame& f) {
  return client_bytes(t, encode_frame(f));
}

ConversationBuilder& ConversationBuilder::server_frame(double t, const Frame& f) {
  return server_bytes(t, encode_frame(f));
}

ConversationBuilder& ConversationBuilder::preface(double t) {
  return client_bytes(t, Bytes(kConnectionPreface.begin(), kConnectionPreface.end()));
}

ConversationBuilder& ConversationBuilder::client_fin(double t) {
  emit(t, true, tcp_flags::kFin | tcp_flags::kAck, {});
  return *this;
}

ConversationBuilder& ConversationBuilder::server_fin(double t) {
  emit(t, false, tcp_flags::kFin | tcp_flags::kAck, {});
  return *this;
}

ConversationBuilder& ConversationBuilder::client_rst(double t) {
  emit(t, true, tcp_flags::kRst, {});
  return *this;
}

Capture merge(const std::vector<const ConversationBuilder*>& convs) {
  Capture c;
  for (const auto* cv : convs) c.packets.insert(c.packets.end(), cv->packets().begin(), cv->packets().end());
  std::stable_sort(c.packets.begin(), c.packets.end(),
                   [](const RawPacket& a, const RawPacket& b) { return a.ts < b.ts; });
  return c;
}

}  // namespace oracle
