#pragma once

// Streaming per-flow mismatch scoring with timeout injection.

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <map>
#include <memory>
#include <optional>
#include <queue>
#include <set>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "h2slow/events.hpp"
#include "h2slow/learning.hpp"

namespace h2slow {

struct DetectorConfig {
  std::size_t n = 5;
  double threshold = 0.02;
  std::shared_ptr<const LookaheadDb> lookahead;
  std::shared_ptr<const DelayDb> delay;
  double fallback_delay = 10.0;  // seconds, for symbols with no learned successor
  double tick = 0.1;             // timer granularity, seconds
  bool record_trace = true;

  // Throws WindowMismatch when the DB was learned with another n, and
  // ConfigError for anything else out of range.
  void validate() const;
};

enum class Label : std::uint8_t { kPending, kAnomalous, kNormal };

std::string to_string(Label label);

struct ScorePoint {
  std::size_t length = 0;
  double score = 0.0;
};

struct Verdict {
  FlowKey flow;
  Label label = Label::kPending;
  double final_score = 0.0;
  std::vector<ScorePoint> trace;
  double first_event_at = 0.0;
  double decided_at = 0.0;
  double latency = 0.0;  // decided_at - first_event_at
  std::size_t length = 0;
  std::uint64_t mismatches = 0;
  bool at_capture_end = false;  // flow was still undecided when input ran out
};

// Largest learned delay from `last` to any non-Star successor, or `fallback`.
double max_delay_for(EventSymbol last, const DelayDb& db, double fallback);

// Live state of one flow. Each mutator appends a group and returns the verdict
// once one is reached; after that the state must not be fed again.
class FlowState {
 public:
  FlowState(FlowKey key, const DetectorConfig& cfg, double start_time);

  // Start and its Star.
  std::optional<Verdict> on_start();
  // One frame's event group followed by a Star.
  std::optional<Verdict> on_group(std::span<const EventSymbol> group, double t);
  // End (no trailing Star); always decides.
  std::optional<Verdict> on_end(double t);
  // TO_i and its Star, stamped at `now`.
  std::optional<Verdict> on_timeout(double now);
  // Decides with the current score; used when input ends first.
  Verdict flush(double now);

  const EventSequence& sequence() const { return seq_; }
  std::uint64_t mismatches() const { return mismatches_; }
  double score() const;
  Label label() const { return label_; }
  // Time and symbol of the most recent non-Star event.
  const TimedEvent& last_event() const { return seq_.events[last_non_star_]; }

 private:
  void append(EventSymbol s, double t);
  std::optional<Verdict> evaluate(double t, bool is_end);
  Verdict make_verdict(double t);

  DetectorConfig cfg_;  // copied; the DBs are shared
  EventSequence seq_;
  std::uint64_t mismatches_ = 0;
  std::size_t last_non_star_ = 0;
  Label label_ = Label::kPending;
  double first_event_at_ = 0.0;
  std::vector<ScorePoint> trace_;
};

struct DetectorStats {
  std::size_t flows = 0;
  std::size_t verdicts = 0;
  std::size_t timeouts = 0;
  std::size_t decided_flow_events = 0;  // events after a verdict, ignored
  std::size_t unknown_flow_events = 0;  // events for a flow never started
};

// Multi-flow driver. Input must be fed in nondecreasing time; timers due at or
// before an input's time fire before it is applied.
class Detector {
 public:
  using VerdictFn = std::function<void(const Verdict&)>;

  Detector(DetectorConfig cfg, VerdictFn on_verdict);
  Detector(const Detector&) = delete;
  Detector& operator=(const Detector&) = delete;

  void on_start(const FlowKey& key, double t);
  void on_group(const FlowKey& key, std::span<const EventSymbol> group, double t);
  void on_end(const FlowKey& key, double t);

  // Fires every timer due at or before `now`.
  void advance_to(double now);
  // Flushes every undecided flow at `now` without firing further timers.
  void finish(double now);

  std::size_t active_flows() const { return flows_.size(); }
  const DetectorStats& stats() const { return stats_; }
  const DetectorConfig& config() const { return cfg_; }
  // Earliest pending timer, in seconds.
  std::optional<double> next_deadline() const;

 private:
  struct Active {
    std::unique_ptr<FlowState> state;
    std::uint64_t generation = 0;
  };
  struct Timer {
    std::int64_t due_us;
    std::uint64_t order;
    FlowKey key;
    std::uint64_t generation;
    bool operator>(const Timer& o) const {
      return due_us != o.due_us ? due_us > o.due_us : order > o.order;
    }
  };

  Active* find(const FlowKey& key);
  void arm(const FlowKey& key, Active& a);
  void emit(const FlowKey& key, const Verdict& v);
  double delay_after(EventSymbol s);

  DetectorConfig cfg_;
  VerdictFn on_verdict_;
  std::int64_t tick_us_;
  std::unordered_map<FlowKey, Active, FlowKeyHash> flows_;
  std::set<FlowKey> decided_;
  std::priority_queue<Timer, std::vector<Timer>, std::greater<>> timers_;
  std::uint64_t timer_order_ = 0;
  std::map<EventSymbol, double> delay_cache_;
  DetectorStats stats_;
};

// Replays closed flow records through a Detector, interleaving their events by
// time (ties keep record order). Verdicts come back in emission order.
std::vector<Verdict> detect_records(std::span<const FlowRecord> flows, const DetectorConfig& cfg);

// Offline recount: occurrences of pairs in `symbols` absent from `db`.
std::uint64_t count_mismatches(std::span<const EventSymbol> symbols, const LookaheadDb& db);

// flow=<key> label=<label> score=<s> latency=<s> len=<events>
std::string format_verdict(const Verdict& v);
// length,score rows for one flow
std::string trace_csv(const Verdict& v);

}  // namespace h2slow
