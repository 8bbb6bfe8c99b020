#include "h2slow/sim/victim.hpp"

#include <algorithm>
#include <cstdio>
#include <map>

#include "h2slow/errors.hpp"
#include "h2slow/sim/frame_reader.hpp"

namespace h2slow::sim {

void VictimConfig::validate() const {
  if (queue_capacity < 1) throw ConfigError("victim queue capacity must be >= 1");
  if (!(wait_duration > 0)) throw ConfigError("victim wait duration must be > 0");
}

std::string to_string(VictimEvent e) {
  switch (e) {
    case VictimEvent::kAccept: return "accept";
    case VictimEvent::kReject: return "reject";
    case VictimEvent::kComplete: return "complete";
    case VictimEvent::kExpire: return "expire";
  }
  return "?";
}

std::string format_log_line(const VictimLogEntry& e) {
  char buf[96];
  std::snprintf(buf, sizeof buf, "t=%.6f conn=%llu event=", e.t, static_cast<unsigned long long>(e.conn));
  return buf + to_string(e.event);
}

std::string format_victim_log(std::span<const VictimLogEntry> entries) {
  std::string out;
  for (const auto& e : entries) out += format_log_line(e) + "\n";
  return out;
}

namespace {

constexpr std::uint32_t kProtocolError = 0x1;
constexpr std::int64_t kDefaultWindow = 65535;

struct StreamState {
  bool headers_done = false;
  bool end_stream = false;
  bool responded = false;
  std::int64_t window = kDefaultWindow;
};

}  // namespace

class VictimSession final : public App {
 public:
  VictimSession(Victim& v, std::uint64_t id) : victim_(v), id_(id) {}

  void on_open(Transport& t) override {
    victim_.record(t.now(), id_, VictimEvent::kAccept);
    arm(t);
  }

  void on_data(Transport& t, ByteView bytes) override {
    if (done_) return;
    reader_.push(bytes);
    while (!done_) {
      auto item = reader_.next();
      if (!item) break;
      if (std::holds_alternative<PrefaceMarker>(*item)) {
        on_preface(t);
      } else {
        on_frame(t, std::get<Frame>(*item));
      }
    }
    if (!done_ && reader_.failed()) shut(t, Frame::goaway(last_stream_, kProtocolError));
  }

  void on_peer_close(Transport& t) override {
    if (done_) return;
    done_ = true;
    t.close();
    victim_.release();
  }

 private:
  void arm(Transport& t) {
    const std::uint64_t gen = ++deadline_gen_;
    t.after(victim_.cfg_.wait_duration, [this, &t, gen] {
      if (done_ || gen != deadline_gen_) return;
      victim_.record(t.now(), id_, VictimEvent::kExpire);
      shut(t, Frame::goaway(last_stream_, 0));
    });
  }

  void send(Transport& t, const Frame& f) { t.send(encode_frame(f)); }

  void shut(Transport& t, const Frame& goaway) {
    done_ = true;
    send(t, goaway);
    t.close();
    victim_.release();
  }

  void on_preface(Transport& t) {
    const auto& cfg = victim_.cfg_;
    Bytes out;
    encode_frame_into(Frame::settings({{settings_id::kMaxConcurrentStreams, cfg.max_concurrent_streams},
                                       {settings_id::kInitialWindowSize, cfg.initial_window_size}}),
                      out);
    encode_frame_into(Frame::window_update(0, (1u << 20)), out);
    t.send(out);
  }

  void on_frame(Transport& t, const Frame& f) {
    const std::uint32_t sid = f.header.stream_id;
    if (const auto* s = std::get_if<SettingsBody>(&f.body)) {
      if (s->ack) {
        own_acked_ = true;
      } else {
        for (const auto& p : s->params) {
          if (p.id != settings_id::kInitialWindowSize) continue;
          const std::int64_t delta = static_cast<std::int64_t>(p.value) - client_iws_;
          client_iws_ = p.value;
          for (auto& [id, st] : streams_) st.window += delta;
        }
        send(t, Frame::settings_ack());
      }
    } else if (const auto* h = std::get_if<HeadersBody>(&f.body)) {
      auto [it, fresh] = streams_.try_emplace(sid);
      auto& st = it->second;
      if (fresh) st.window = client_iws_;
      st.headers_done = h->end_headers;
      st.end_stream = st.end_stream || h->end_stream;
      last_stream_ = std::max(last_stream_, sid);
    } else if (const auto* c = std::get_if<ContinuationBody>(&f.body)) {
      auto it = streams_.find(sid);
      if (it != streams_.end() && c->end_headers) it->second.headers_done = true;
    } else if (const auto* d = std::get_if<DataBody>(&f.body)) {
      auto it = streams_.find(sid);
      if (it != streams_.end() && d->end_stream) it->second.end_stream = true;
    } else if (const auto* w = std::get_if<WindowUpdateBody>(&f.body)) {
      if (sid == 0) {
        conn_window_ += w->increment;
      } else if (auto it = streams_.find(sid); it != streams_.end()) {
        it->second.window += w->increment;
      }
    } else if (std::holds_alternative<GoAwayBody>(f.body)) {
      shut(t, Frame::goaway(last_stream_, 0));
      return;
    } else if (const auto* o = std::get_if<OtherBody>(&f.body)) {
      const bool ping = f.header.type == static_cast<std::uint8_t>(FrameType::kPing);
      if (ping && !(f.header.flags & frame_flags::kAck) && o->raw.size() == 8) {
        std::array<std::uint8_t, 8> opaque{};
        std::copy(o->raw.begin(), o->raw.end(), opaque.begin());
        send(t, Frame::ping(opaque, true));
      }
    }
    try_complete(t);
  }

  void try_complete(Transport& t) {
    if (!own_acked_ || conn_window_ <= 0) return;
    for (auto& [sid, st] : streams_) {
      if (st.responded || !st.headers_done || !st.end_stream || st.window <= 0) continue;
      st.responded = true;
      Bytes out;
      // :status 200, content-type text/plain (already HPACK-encoded)
      encode_frame_into(Frame::headers(sid, Bytes{0x88, 0x5f, 0x87, 0x49, 0x7c, 0xa5, 0x8a, 0xe8, 0x19, 0xaa},
                                       false, true),
                        out);
      const std::size_t body = static_cast<std::size_t>(std::min<std::int64_t>({st.window, conn_window_, 64}));
      encode_frame_into(Frame::data(sid, Bytes(body, 'x'), true), out);
      conn_window_ -= static_cast<std::int64_t>(body);
      t.send(out);
      victim_.record(t.now(), id_, VictimEvent::kComplete);
      arm(t);
    }
  }

  Victim& victim_;
  std::uint64_t id_;
  FrameReader reader_{true};
  bool done_ = false;
  bool own_acked_ = false;
  std::int64_t client_iws_ = kDefaultWindow;
  std::int64_t conn_window_ = kDefaultWindow;
  std::uint32_t last_stream_ = 0;
  std::uint64_t deadline_gen_ = 0;
  std::map<std::uint32_t, StreamState> streams_;
};

Victim::Victim(VictimConfig cfg) : cfg_(cfg) { cfg_.validate(); }

Victim::~Victim() = default;

void Victim::record(double t, std::uint64_t conn, VictimEvent e) {
  log_.push_back({t, conn, e});
  if (sink_) sink_(log_.back());
}

void Victim::release() {
  if (occupancy_.load() > 0) --occupancy_;
}

std::unique_ptr<App> Victim::on_syn(std::uint64_t conn_id, double now, const FlowKey&) {
  if (occupancy_.load() >= cfg_.queue_capacity) {
    record(now, conn_id, VictimEvent::kReject);
    return nullptr;
  }
  peak_ = std::max(peak_, ++occupancy_);
  return std::make_unique<VictimSession>(*this, conn_id);
}

}  // namespace h2slow::sim
