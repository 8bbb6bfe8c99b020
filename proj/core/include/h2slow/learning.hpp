#pragma once

// Learning phase: the lookahead-pair database and the maximum-delay database
// built from benign flows.

#include <cstdint>
#include <iosfwd>
#include <map>
#include <set>
#include <span>
#include <string>
#include <unordered_set>
#include <utility>
#include <vector>

#include "h2slow/events.hpp"

namespace h2slow {

// `second` followed `first` at distance `distance` (1..n).
struct LookaheadPair {
  EventSymbol first;
  EventSymbol second;
  std::uint32_t distance = 0;

  auto operator<=>(const LookaheadPair&) const = default;

  // "A:B,k"
  std::string to_string() const;
  static LookaheadPair parse(std::string_view text);
};

struct LookaheadPairHash {
  std::size_t operator()(const LookaheadPair& p) const noexcept {
    std::uint64_t h = p.first.code();
    h = h * 0x9e3779b97f4a7c15ull + p.second.code();
    h = h * 0x9e3779b97f4a7c15ull + p.distance;
    return static_cast<std::size_t>(h ^ (h >> 29));
  }
};

// Visits every pair (events[i], events[i+k], k) for k in 1..n with i+k inside
// the sequence, with multiplicity, in order of the later position. This is the
// union of all windows of size n+1 including the truncated tail windows.
template <class Visit>
void for_each_lookahead_pair(std::span<const EventSymbol> events, std::size_t n, Visit&& visit) {
  for (std::size_t j = 1; j < events.size(); ++j) {
    const std::size_t reach = j < n ? j : n;
    for (std::size_t k = 1; k <= reach; ++k) {
      visit(LookaheadPair{events[j - k], events[j], static_cast<std::uint32_t>(k)});
    }
  }
}

std::set<LookaheadPair> extract_lookahead_pairs(std::span<const EventSymbol> events, std::size_t n);
std::set<LookaheadPair> extract_lookahead_pairs(const EventSequence& seq, std::size_t n);

// Number of pairs (with multiplicity) a sequence of `length` events yields:
// n(L - (n+1)/2) once L >= n+1, and L(L-1)/2 for shorter sequences.
std::uint64_t max_pair_count(std::size_t length, std::size_t n);

class LookaheadDb {
 public:
  LookaheadDb() = default;
  explicit LookaheadDb(std::size_t n);

  std::size_t n() const { return n_; }
  std::size_t size() const { return pairs_.size(); }
  bool empty() const { return pairs_.empty(); }
  bool contains(const LookaheadPair& p) const { return pairs_.count(p) != 0; }

  // Throws ConfigError when p.distance exceeds n.
  void insert(const LookaheadPair& p);
  void add_sequence(std::span<const EventSymbol> events);
  void merge(const LookaheadDb& other);

  std::set<LookaheadPair> sorted_pairs() const;

  // "#lookahead n=<n>" then one "A:B,k" per line, lexicographically sorted.
  void save(std::ostream& out) const;
  std::string serialize() const;
  static LookaheadDb load(std::istream& in);
  static LookaheadDb parse(std::string_view text);

  bool operator==(const LookaheadDb& other) const {
    return n_ == other.n_ && pairs_ == other.pairs_;
  }

 private:
  std::size_t n_ = 0;
  std::unordered_set<LookaheadPair, LookaheadPairHash> pairs_;
};

class DelayDb {
 public:
  using Key = std::pair<EventSymbol, EventSymbol>;

  // Keeps the maximum delay per transition.
  void observe(EventSymbol from, EventSymbol to, double delay);
  void merge(const DelayDb& other);

  std::optional<double> get(EventSymbol from, EventSymbol to) const;
  const std::map<Key, double>& entries() const { return entries_; }
  std::size_t size() const { return entries_.size(); }
  bool empty() const { return entries_.empty(); }

  // Adds the transitions of one sequence: every adjacent pair exactly as
  // listed, plus each pair of consecutive non-Star events (the Star between
  // two frames carries no delay of its own).
  void add_sequence(std::span<const TimedEvent> events);

  // "#delay" then one "A->B=<seconds>" per line, lexicographically sorted.
  void save(std::ostream& out) const;
  std::string serialize() const;
  static DelayDb load(std::istream& in);
  static DelayDb parse(std::string_view text);

  bool operator==(const DelayDb&) const = default;

 private:
  std::map<Key, double> entries_;
};

struct LearnedModel {
  LookaheadDb lookahead;
  DelayDb delay;
};

// Throws EmptyTraining for an empty input.
LearnedModel learn(std::span<const FlowRecord> flows, std::size_t n);
LearnedModel learn_sequences(std::span<const EventSequence> sequences, std::size_t n);

struct SaturationPoint {
  std::size_t flows = 0;
  std::size_t unique_pairs = 0;
};

// Cumulative unique-pair count after each flow.
std::vector<SaturationPoint> saturation_curve(std::span<const EventSequence> sequences,
                                              std::size_t n);

}  // namespace h2slow
