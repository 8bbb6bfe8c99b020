#include "h2slow/sim/clients.hpp"

#include <algorithm>
#include <cstdio>

#include "h2slow/errors.hpp"
#include "h2slow/sim/frame_reader.hpp"

namespace h2slow::sim {

std::string to_string(AttackKind k) {
  switch (k) {
    case AttackKind::kZeroWindow: return "ZeroWindow";
    case AttackKind::kIncompleteBody: return "IncompleteBody";
    case AttackKind::kPrefaceOnly: return "PrefaceOnly";
    case AttackKind::kIncompleteHeader: return "IncompleteHeader";
    case AttackKind::kUnackedSettings: return "UnackedSettings";
  }
  return "?";
}

AttackKind parse_attack_kind(std::string_view text) {
  for (AttackKind k : kAllAttackKinds) {
    if (text == to_string(k) || text == std::to_string(static_cast<int>(k))) return k;
  }
  throw ConfigError("unknown attack kind '" + std::string(text) + "'");
}

void BenignProfile::validate() const {
  if (!(max_gap >= 0) || !(min_think >= 0) || !(max_think >= min_think)) {
    throw ConfigError("benign profile: delays must satisfy 0 <= min_think <= max_think, max_gap >= 0");
  }
  if (min_requests < 1 || max_requests < min_requests) {
    throw ConfigError("benign profile: need 1 <= min_requests <= max_requests");
  }
  for (double p : {post_share, large_header_share, ping_share, window_update_share}) {
    if (!(p >= 0 && p <= 1)) throw ConfigError("benign profile: shares must lie in [0, 1]");
  }
  if (post_share + large_header_share > 1) throw ConfigError("benign profile: request mix exceeds 1");
}

namespace {

std::string opt_seconds(const std::optional<double>& v) {
  if (!v) return "";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6f", *v);
  return buf;
}

}  // namespace

std::string format_summary(const std::vector<ConnReport>& reports) {
  std::string out = "conn_id,kind,established,closed,server_wait\n";
  for (const auto& r : reports) {
    out += std::to_string(r.conn_id) + "," + r.kind + "," + opt_seconds(r.established) + "," +
           opt_seconds(r.closed) + "," + opt_seconds(r.server_wait) + "\n";
  }
  return out;
}

namespace {

// A rough HPACK-looking header block of `size` octets.
Bytes header_block(Rng& rng, bool post, std::size_t size) {
  Bytes b{static_cast<std::uint8_t>(post ? 0x83 : 0x82), 0x86, 0x84, 0x41};
  while (b.size() < size) b.push_back(static_cast<std::uint8_t>('a' + rng.uniform_int(0, 25)));
  return b;
}

Bytes preface_bytes() { return Bytes(kConnectionPreface.begin(), kConnectionPreface.end()); }

struct SettingsProfile {
  std::vector<SettingsParam> params;
  std::uint32_t window_update = 0;  // connection-level increment after SETTINGS, 0 for none
  bool priority_frames = false;
};

SettingsProfile pick_settings(Rng& rng) {
  const double r = rng.uniform01();
  if (r < 0.45) {
    return {{{settings_id::kHeaderTableSize, 65536},
             {settings_id::kEnablePush, 0},
             {settings_id::kMaxConcurrentStreams, 1000},
             {settings_id::kInitialWindowSize, 6291456},
             {settings_id::kMaxHeaderListSize, 262144}},
            15663105,
            false};
  }
  if (r < 0.75) {
    return {{{settings_id::kHeaderTableSize, 65536},
             {settings_id::kInitialWindowSize, 131072},
             {settings_id::kMaxFrameSize, 16384}},
            12517377,
            true};
  }
  if (r < 0.95) {
    return {{{settings_id::kMaxConcurrentStreams, 100},
             {settings_id::kInitialWindowSize, 33554432},
             {settings_id::kEnablePush, 0}},
            33488897,
            false};
  }
  return {{{settings_id::kHeaderTableSize, 4096}}, 0, false};
}

class ClientBase : public App {
 public:
  ClientBase(Rng rng, std::shared_ptr<ConnReport> report) : rng_(rng), report_(std::move(report)) {}

  void on_open(Transport& t) override {
    report_->key = t.flow_key();
    report_->established = t.now();
    start(t);
  }

  void on_refused(Transport& t) override {
    if (!report_->key) report_->key = t.flow_key();
    report_->refused = true;
    stopped_ = true;
  }

  void on_peer_close(Transport& t) override {
    if (!report_->closed) {
      report_->closed = t.now();
      if (report_->established) report_->server_wait = t.now() - *report_->established;
    }
    stopped_ = true;
    t.close();
  }

  void on_data(Transport& t, ByteView bytes) override {
    if (stopped_) return;
    reader_.push(bytes);
    while (!stopped_) {
      auto item = reader_.next();
      if (!item) break;
      if (const auto* f = std::get_if<Frame>(&*item)) on_frame(t, *f);
    }
  }

 protected:
  virtual void start(Transport& t) = 0;
  virtual void on_frame(Transport& t, const Frame& f) = 0;

  // Sends `bytes` `delay` seconds after the previously scripted send.
  void emit(Transport& t, double delay, Bytes bytes) {
    cursor_ = std::max(cursor_, t.now()) + delay;
    t.after(cursor_ - t.now(), [this, &t, b = std::move(bytes)] {
      if (!stopped_) t.send(b);
    });
  }
  void emit(Transport& t, double delay, const Frame& f) { emit(t, delay, encode_frame(f)); }

  void close_after(Transport& t, double delay) {
    cursor_ = std::max(cursor_, t.now()) + delay;
    t.after(cursor_ - t.now(), [this, &t] { close_now(t); });
  }

  void close_now(Transport& t) {
    if (t.closed()) return;
    stopped_ = true;
    if (!report_->closed) report_->closed = t.now();
    t.close();
  }

  Rng rng_;
  std::shared_ptr<ConnReport> report_;
  FrameReader reader_{false};
  bool stopped_ = false;
  double cursor_ = 0.0;
};

class BenignClient final : public ClientBase {
 public:
  BenignClient(const BenignProfile& p, Rng rng, std::shared_ptr<ConnReport> report)
      : ClientBase(rng, std::move(report)), p_(p) {
    target_ = static_cast<std::uint32_t>(rng_.uniform_int(p_.min_requests, p_.max_requests));
  }

 private:
  double gap() { return rng_.uniform(0.0, p_.max_gap); }

  void start(Transport& t) override {
    const SettingsProfile s = pick_settings(rng_);
    emit(t, 0.0, preface_bytes());
    emit(t, gap(), Frame::settings(s.params));
    if (s.window_update) emit(t, gap(), Frame::window_update(0, s.window_update));
    if (s.priority_frames) {
      // dependency-tree placeholders on idle streams
      for (std::uint32_t sid : {3u, 5u, 7u}) {
        emit(t, gap(), Frame::other(static_cast<std::uint8_t>(FrameType::kPriority), 0, sid,
                                    Bytes{0, 0, 0, 0, static_cast<std::uint8_t>(rng_.uniform_int(0, 200))}));
      }
      stream_ = 11;
    }
    request(t, gap());
  }

  void request(Transport& t, double delay) {
    stream_ += 2;
    awaiting_ = stream_;
    ++sent_;
    if (rng_.chance(p_.ping_share)) {
      std::array<std::uint8_t, 8> opaque{};
      for (auto& b : opaque) b = static_cast<std::uint8_t>(rng_.uniform_int(0, 255));
      emit(t, delay, Frame::ping(opaque, false));
      delay = gap();
    }
    const double r = rng_.uniform01();
    if (r < p_.post_share) {
      emit(t, delay, Frame::headers(stream_, header_block(rng_, true, rng_.uniform_int(40, 160)), false, true));
      const auto chunks = rng_.uniform_int(1, 3);
      for (std::uint64_t i = 1; i <= chunks; ++i) {
        emit(t, gap(), Frame::data(stream_, Bytes(rng_.uniform_int(64, 3000), 'd'), i == chunks));
      }
    } else if (r < p_.post_share + p_.large_header_share) {
      emit(t, delay, Frame::headers(stream_, header_block(rng_, false, rng_.uniform_int(1200, 4000)), true, false));
      emit(t, gap(), Frame::continuation(stream_, header_block(rng_, false, rng_.uniform_int(100, 800)), true));
    } else {
      emit(t, delay, Frame::headers(stream_, header_block(rng_, false, rng_.uniform_int(20, 120)), true, true));
    }
  }

  void on_frame(Transport& t, const Frame& f) override {
    if (const auto* s = std::get_if<SettingsBody>(&f.body)) {
      if (!s->ack) {
        t.after(rng_.uniform(0.0, std::min(0.05, p_.max_gap)), [this, &t] {
          if (!stopped_) t.send(encode_frame(Frame::settings_ack()));
        });
      }
      return;
    }
    if (std::holds_alternative<GoAwayBody>(f.body)) {
      stopped_ = true;
      close_after(t, gap());
      return;
    }
    bool done = false;
    if (const auto* d = std::get_if<DataBody>(&f.body)) {
      received_ += d->payload.size();
      done = d->end_stream;
    } else if (const auto* h = std::get_if<HeadersBody>(&f.body)) {
      done = h->end_stream;
    }
    if (!done || f.header.stream_id != awaiting_) return;
    awaiting_ = 0;
    if (rng_.chance(p_.window_update_share)) {
      emit(t, gap(), Frame::window_update(0, static_cast<std::uint32_t>(std::max<std::uint64_t>(received_, 1))));
      received_ = 0;
    }
    const double think = rng_.uniform(p_.min_think, p_.max_think);
    if (sent_ < target_) {
      request(t, think);
    } else {
      emit(t, think, Frame::goaway(0, 0));
      close_after(t, gap());
    }
  }

  BenignProfile p_;
  std::uint32_t target_ = 1;
  std::uint32_t sent_ = 0;
  std::uint32_t stream_ = static_cast<std::uint32_t>(-1);
  std::uint32_t awaiting_ = 0;
  std::uint64_t received_ = 0;
};

class AttackClient final : public ClientBase {
 public:
  AttackClient(AttackKind kind, double hold, Rng rng, std::shared_ptr<ConnReport> report)
      : ClientBase(rng, std::move(report)), kind_(kind), hold_(hold) {}

 private:
  double gap() { return rng_.uniform(0.0, 0.1); }

  void start(Transport& t) override {
    t.after(hold_, [this, &t] { close_now(t); });
    emit(t, 0.0, preface_bytes());
    if (kind_ == AttackKind::kPrefaceOnly) return;

    if (kind_ == AttackKind::kZeroWindow) {
      emit(t, gap(), Frame::settings({{settings_id::kMaxConcurrentStreams, 100},
                                      {settings_id::kInitialWindowSize, 0}}));
      emit(t, gap(), Frame::headers(1, header_block(rng_, false, rng_.uniform_int(20, 120)), true, true));
      return;
    }
    const SettingsProfile s = pick_settings(rng_);
    emit(t, gap(), Frame::settings(s.params));
    if (s.window_update) emit(t, gap(), Frame::window_update(0, s.window_update));
    switch (kind_) {
      case AttackKind::kIncompleteBody:
        emit(t, gap(), Frame::headers(1, header_block(rng_, true, rng_.uniform_int(40, 160)), false, true));
        emit(t, gap(), Frame::data(1, Bytes(rng_.uniform_int(16, 512), 'd'), false));
        break;
      case AttackKind::kIncompleteHeader:
        emit(t, gap(), Frame::headers(1, header_block(rng_, false, rng_.uniform_int(200, 1200)), false, false));
        break;
      case AttackKind::kUnackedSettings:
        emit(t, gap(), Frame::headers(1, header_block(rng_, false, rng_.uniform_int(20, 120)), true, true));
        break;
      default:
        break;
    }
  }

  void on_frame(Transport& t, const Frame& f) override {
    const auto* s = std::get_if<SettingsBody>(&f.body);
    if (!s || s->ack) return;
    if (kind_ == AttackKind::kUnackedSettings || kind_ == AttackKind::kPrefaceOnly) return;
    t.after(rng_.uniform(0.0, 0.05), [this, &t] {
      if (!stopped_) t.send(encode_frame(Frame::settings_ack()));
    });
  }

  AttackKind kind_;
  double hold_;
};

}  // namespace

std::unique_ptr<App> make_benign_client(const BenignProfile& profile, Rng rng,
                                        std::shared_ptr<ConnReport> report) {
  return std::make_unique<BenignClient>(profile, rng, std::move(report));
}

std::unique_ptr<App> make_attack_client(AttackKind kind, double hold, Rng rng,
                                        std::shared_ptr<ConnReport> report) {
  return std::make_unique<AttackClient>(kind, hold, rng, std::move(report));
}

}  // namespace h2slow::sim
