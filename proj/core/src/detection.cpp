#include "h2slow/detection.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

#include "h2slow/errors.hpp"

namespace h2slow {

namespace {

std::int64_t to_us(double seconds) { return std::llround(seconds * 1e6); }

std::string fixed6(double v) {
  char buf[48];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

}  // namespace

void DetectorConfig::validate() const {
  if (n == 0) throw ConfigError("window size n must be >= 1");
  if (!(threshold > 0.0 && threshold < 1.0)) throw ConfigError("threshold must lie in (0, 1)");
  if (!lookahead) throw ConfigError("detector needs a lookahead database");
  if (!delay) throw ConfigError("detector needs a delay database");
  if (lookahead->n() != n) {
    throw WindowMismatch("lookahead database was learned with n=" + std::to_string(lookahead->n()) +
                         " but n=" + std::to_string(n) + " was requested");
  }
  if (!(fallback_delay >= 0.0)) throw ConfigError("fallback delay must be >= 0");
  if (!(tick > 0.0) || to_us(tick) < 1) throw ConfigError("timer tick must be >= 1us");
}

std::string to_string(Label label) {
  switch (label) {
    case Label::kAnomalous: return "anomalous";
    case Label::kNormal: return "normal";
    case Label::kPending: break;
  }
  return "pending";
}

double max_delay_for(EventSymbol last, const DelayDb& db, double fallback) {
  std::optional<double> best;
  const auto& entries = db.entries();
  for (auto it = entries.lower_bound(DelayDb::Key{last, EventSymbol(EventKind::kStart)});
       it != entries.end() && it->first.first == last; ++it) {
    if (it->first.second.is_star()) continue;
    best = best ? std::max(*best, it->second) : it->second;
  }
  return best.value_or(fallback);
}

FlowState::FlowState(FlowKey key, const DetectorConfig& cfg, double start_time)
    : cfg_(cfg), first_event_at_(start_time) {
  seq_.flow = std::move(key);
}

double FlowState::score() const {
  const auto max = max_pair_count(seq_.events.size(), cfg_.n);
  return max == 0 ? 0.0 : static_cast<double>(mismatches_) / static_cast<double>(max);
}

void FlowState::append(EventSymbol s, double t) {
  seq_.events.push_back({s, t});
  const std::size_t j = seq_.events.size() - 1;
  if (!s.is_star()) last_non_star_ = j;
  const std::size_t reach = std::min(j, cfg_.n);
  for (std::size_t k = 1; k <= reach; ++k) {
    const LookaheadPair p{seq_.events[j - k].symbol, s, static_cast<std::uint32_t>(k)};
    if (!cfg_.lookahead->contains(p)) ++mismatches_;
  }
}

std::optional<Verdict> FlowState::evaluate(double t, bool is_end) {
  if (seq_.events.size() <= cfg_.n && !is_end) return std::nullopt;
  const double s = score();
  if (cfg_.record_trace) trace_.push_back({seq_.events.size(), s});
  if (s > cfg_.threshold) {
    label_ = Label::kAnomalous;
  } else if (is_end) {
    label_ = Label::kNormal;
  } else {
    return std::nullopt;
  }
  return make_verdict(t);
}

Verdict FlowState::make_verdict(double t) {
  Verdict v;
  v.flow = seq_.flow;
  v.label = label_;
  v.final_score = score();
  v.trace = std::move(trace_);
  v.first_event_at = first_event_at_;
  v.decided_at = t;
  v.latency = t - first_event_at_;
  v.length = seq_.events.size();
  v.mismatches = mismatches_;
  return v;
}

std::optional<Verdict> FlowState::on_start() {
  append(EventKind::kStart, first_event_at_);
  append(EventKind::kStar, first_event_at_);
  return evaluate(first_event_at_, false);
}

std::optional<Verdict> FlowState::on_group(std::span<const EventSymbol> group, double t) {
  if (label_ != Label::kPending) throw DecidedFlow();
  if (group.empty()) return std::nullopt;
  for (const auto& s : group) append(s, t);
  append(EventKind::kStar, t);
  return evaluate(t, false);
}

std::optional<Verdict> FlowState::on_end(double t) {
  if (label_ != Label::kPending) throw DecidedFlow();
  append(EventKind::kEnd, t);
  return evaluate(t, true);
}

std::optional<Verdict> FlowState::on_timeout(double now) {
  if (label_ != Label::kPending) throw DecidedFlow();
  const EventSymbol last = last_event().symbol;
  append(EventSymbol::timeout(last.is_timeout() ? last.timeout_index() + 1 : 1), now);
  append(EventKind::kStar, now);
  return evaluate(now, false);
}

Verdict FlowState::flush(double now) {
  if (label_ == Label::kPending) {
    const double s = score();
    if (cfg_.record_trace) trace_.push_back({seq_.events.size(), s});
    label_ = s > cfg_.threshold ? Label::kAnomalous : Label::kNormal;
  }
  Verdict v = make_verdict(now);
  v.at_capture_end = true;
  return v;
}

Detector::Detector(DetectorConfig cfg, VerdictFn on_verdict)
    : cfg_(std::move(cfg)), on_verdict_(std::move(on_verdict)) {
  cfg_.validate();
  tick_us_ = to_us(cfg_.tick);
}

Detector::Active* Detector::find(const FlowKey& key) {
  auto it = flows_.find(key);
  if (it != flows_.end()) return &it->second;
  if (decided_.count(key)) {
    ++stats_.decided_flow_events;
  } else {
    ++stats_.unknown_flow_events;
  }
  return nullptr;
}

double Detector::delay_after(EventSymbol s) {
  auto it = delay_cache_.find(s);
  if (it != delay_cache_.end()) return it->second;
  const double d = max_delay_for(s, *cfg_.delay, cfg_.fallback_delay);
  delay_cache_.emplace(s, d);
  return d;
}

void Detector::arm(const FlowKey& key, Active& a) {
  const TimedEvent& last = a.state->last_event();
  if (last.symbol.kind() == EventKind::kEnd) return;
  const std::int64_t limit = to_us(last.t) + to_us(delay_after(last.symbol));
  // first tick strictly past the limit
  std::int64_t due = (limit >= 0 ? limit / tick_us_ : (limit - tick_us_ + 1) / tick_us_) * tick_us_;
  due += tick_us_;
  timers_.push(Timer{due, timer_order_++, key, a.generation});
}

void Detector::emit(const FlowKey& key, const Verdict& v) {
  ++stats_.verdicts;
  flows_.erase(key);
  decided_.insert(key);
  if (on_verdict_) on_verdict_(v);
}

void Detector::on_start(const FlowKey& key, double t) {
  advance_to(t);
  if (auto it = flows_.find(key); it != flows_.end()) {
    // a new incarnation without a close of the old one
    const Verdict v = it->second.state->flush(t);
    emit(key, v);
  }
  decided_.erase(key);
  ++stats_.flows;
  Active& a = flows_[key];
  a.state = std::make_unique<FlowState>(key, cfg_, t);
  if (auto v = a.state->on_start()) {
    emit(key, *v);
    return;
  }
  arm(key, a);
}

void Detector::on_group(const FlowKey& key, std::span<const EventSymbol> group, double t) {
  advance_to(t);
  Active* a = find(key);
  if (!a || group.empty()) return;
  ++a->generation;
  if (auto v = a->state->on_group(group, t)) {
    emit(key, *v);
    return;
  }
  arm(key, *a);
}

void Detector::on_end(const FlowKey& key, double t) {
  advance_to(t);
  Active* a = find(key);
  if (!a) return;
  ++a->generation;
  auto v = a->state->on_end(t);
  emit(key, *v);
}

void Detector::advance_to(double now) {
  const std::int64_t now_us = to_us(now);
  while (!timers_.empty() && timers_.top().due_us <= now_us) {
    const Timer timer = timers_.top();
    timers_.pop();
    auto it = flows_.find(timer.key);
    if (it == flows_.end() || it->second.generation != timer.generation) continue;
    Active& a = it->second;
    ++a.generation;
    ++stats_.timeouts;
    if (auto v = a.state->on_timeout(static_cast<double>(timer.due_us) / 1e6)) {
      emit(timer.key, *v);
      continue;
    }
    arm(timer.key, a);
  }
}

void Detector::finish(double now) {
  std::vector<FlowKey> keys;
  keys.reserve(flows_.size());
  for (const auto& [k, a] : flows_) keys.push_back(k);
  std::sort(keys.begin(), keys.end());
  for (const auto& k : keys) {
    const Verdict v = flows_.at(k).state->flush(now);
    emit(k, v);
  }
  timers_ = {};
}

std::optional<double> Detector::next_deadline() const {
  if (timers_.empty()) return std::nullopt;
  return static_cast<double>(timers_.top().due_us) / 1e6;
}

std::vector<Verdict> detect_records(std::span<const FlowRecord> flows, const DetectorConfig& cfg) {
  struct Input {
    double t;
    std::size_t record;
    std::size_t pos;  // 0 start, 1..items, items+1 end
  };
  std::vector<Input> inputs;
  double last = 0.0;
  for (std::size_t r = 0; r < flows.size(); ++r) {
    const auto& f = flows[r];
    inputs.push_back({f.established_at, r, 0});
    last = std::max(last, f.established_at);
    for (std::size_t i = 0; i < f.items.size(); ++i) {
      inputs.push_back({f.items[i].t, r, i + 1});
      last = std::max(last, f.items[i].t);
    }
    if (f.closed_at) {
      last = std::max(last, *f.closed_at);
      if (f.close_kind != CloseKind::kCaptureEnd) inputs.push_back({*f.closed_at, r, f.items.size() + 1});
    }
  }
  std::stable_sort(inputs.begin(), inputs.end(), [](const Input& a, const Input& b) {
    if (a.t != b.t) return a.t < b.t;
    if (a.record != b.record) return a.record < b.record;
    return a.pos < b.pos;
  });

  std::vector<Verdict> out;
  Detector det(cfg, [&](const Verdict& v) { out.push_back(v); });
  for (const auto& in : inputs) {
    const auto& f = flows[in.record];
    if (in.pos == 0) {
      det.on_start(f.key, in.t);
    } else if (in.pos <= f.items.size()) {
      const auto group = translate_frame(f.items[in.pos - 1].content);
      det.on_group(f.key, group, in.t);
    } else {
      det.on_end(f.key, in.t);
    }
  }
  det.advance_to(last);
  det.finish(last);
  return out;
}

std::uint64_t count_mismatches(std::span<const EventSymbol> symbols, const LookaheadDb& db) {
  std::uint64_t count = 0;
  for_each_lookahead_pair(symbols, db.n(), [&](const LookaheadPair& p) {
    if (!db.contains(p)) ++count;
  });
  return count;
}

std::string format_verdict(const Verdict& v) {
  return "flow=" + v.flow.to_string() + " label=" + to_string(v.label) + " score=" +
         fixed6(v.final_score) + " latency=" + fixed6(v.latency) + " len=" + std::to_string(v.length);
}

std::string trace_csv(const Verdict& v) {
  std::ostringstream os;
  os << "length,score\n";
  for (const auto& p : v.trace) os << p.length << ',' << fixed6(p.score) << '\n';
  return os.str();
}

}  // namespace h2slow
