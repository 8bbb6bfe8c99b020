#include "h2slow/learning.hpp"

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <istream>
#include <ostream>
#include <sstream>

#include "h2slow/errors.hpp"

namespace h2slow {

namespace {

std::string trim(std::string_view s) {
  while (!s.empty() && (s.back() == '\r' || s.back() == ' ' || s.back() == '\t')) s.remove_suffix(1);
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  return std::string(s);
}

std::string format_seconds(double v) {
  char buf[48];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

}  // namespace

std::string LookaheadPair::to_string() const {
  return first.to_string() + ":" + second.to_string() + "," + std::to_string(distance);
}

LookaheadPair LookaheadPair::parse(std::string_view text) {
  const auto comma = text.rfind(',');
  if (comma == std::string_view::npos) throw InputError("bad lookahead pair: " + std::string(text));
  const auto symbols = text.substr(0, comma);
  const auto colon = symbols.find(':');
  if (colon == std::string_view::npos) throw InputError("bad lookahead pair: " + std::string(text));
  const auto k_text = text.substr(comma + 1);
  std::uint32_t k = 0;
  auto [ptr, ec] = std::from_chars(k_text.data(), k_text.data() + k_text.size(), k);
  if (ec != std::errc{} || ptr != k_text.data() + k_text.size() || k == 0) {
    throw InputError("bad lookahead distance: " + std::string(text));
  }
  return LookaheadPair{EventSymbol::parse(symbols.substr(0, colon)),
                       EventSymbol::parse(symbols.substr(colon + 1)), k};
}

std::set<LookaheadPair> extract_lookahead_pairs(std::span<const EventSymbol> events, std::size_t n) {
  std::set<LookaheadPair> out;
  for_each_lookahead_pair(events, n, [&](const LookaheadPair& p) { out.insert(p); });
  return out;
}

std::set<LookaheadPair> extract_lookahead_pairs(const EventSequence& seq, std::size_t n) {
  const auto symbols = seq.symbols();
  return extract_lookahead_pairs(symbols, n);
}

std::uint64_t max_pair_count(std::size_t length, std::size_t n) {
  if (length < 2 || n == 0) return 0;
  if (length <= n) return static_cast<std::uint64_t>(length) * (length - 1) / 2;
  // n(L - (n+1)/2) == n(L - n) + n(n-1)/2, kept in integers.
  return static_cast<std::uint64_t>(n) * (length - n) + static_cast<std::uint64_t>(n) * (n - 1) / 2;
}

LookaheadDb::LookaheadDb(std::size_t n) : n_(n) {
  if (n == 0) throw ConfigError("lookahead window size must be >= 1");
}

void LookaheadDb::insert(const LookaheadPair& p) {
  if (p.distance == 0 || p.distance > n_) {
    throw ConfigError("lookahead pair distance " + std::to_string(p.distance) +
                      " outside 1.." + std::to_string(n_));
  }
  pairs_.insert(p);
}

void LookaheadDb::add_sequence(std::span<const EventSymbol> events) {
  for_each_lookahead_pair(events, n_, [&](const LookaheadPair& p) { pairs_.insert(p); });
}

void LookaheadDb::merge(const LookaheadDb& other) {
  if (other.n_ != n_) throw WindowMismatch("cannot merge lookahead databases with different n");
  pairs_.insert(other.pairs_.begin(), other.pairs_.end());
}

std::set<LookaheadPair> LookaheadDb::sorted_pairs() const {
  return std::set<LookaheadPair>(pairs_.begin(), pairs_.end());
}

void LookaheadDb::save(std::ostream& out) const {
  std::vector<std::string> lines;
  lines.reserve(pairs_.size());
  for (const auto& p : pairs_) lines.push_back(p.to_string());
  std::sort(lines.begin(), lines.end());
  out << "#lookahead n=" << n_ << '\n';
  for (const auto& l : lines) out << l << '\n';
}

std::string LookaheadDb::serialize() const {
  std::ostringstream os;
  save(os);
  return os.str();
}

LookaheadDb LookaheadDb::load(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw InputError("lookahead db: empty file");
  const std::string header = trim(line);
  constexpr std::string_view kPrefix = "#lookahead n=";
  if (!header.starts_with(kPrefix)) throw InputError("lookahead db: missing '#lookahead n=' header");
  std::size_t n = 0;
  const char* first = header.data() + kPrefix.size();
  auto [ptr, ec] = std::from_chars(first, header.data() + header.size(), n);
  if (ec != std::errc{} || ptr != header.data() + header.size() || n == 0) {
    throw InputError("lookahead db: bad window size in header");
  }
  LookaheadDb db(n);
  while (std::getline(in, line)) {
    const std::string t = trim(line);
    if (t.empty() || t.front() == '#') continue;
    const LookaheadPair p = LookaheadPair::parse(t);
    if (p.distance > n) throw InputError("lookahead db: pair distance exceeds n: " + t);
    db.pairs_.insert(p);
  }
  return db;
}

LookaheadDb LookaheadDb::parse(std::string_view text) {
  std::istringstream is{std::string(text)};
  return load(is);
}

void DelayDb::observe(EventSymbol from, EventSymbol to, double delay) {
  if (delay < 0) delay = 0;
  auto [it, inserted] = entries_.try_emplace(Key{from, to}, delay);
  if (!inserted) it->second = std::max(it->second, delay);
}

void DelayDb::merge(const DelayDb& other) {
  for (const auto& [k, v] : other.entries_) observe(k.first, k.second, v);
}

std::optional<double> DelayDb::get(EventSymbol from, EventSymbol to) const {
  auto it = entries_.find(Key{from, to});
  if (it == entries_.end()) return std::nullopt;
  return it->second;
}

void DelayDb::add_sequence(std::span<const TimedEvent> events) {
  for (std::size_t i = 1; i < events.size(); ++i) {
    observe(events[i - 1].symbol, events[i].symbol, events[i].t - events[i - 1].t);
  }
  const TimedEvent* prev = nullptr;
  for (const auto& e : events) {
    if (e.symbol.is_star()) continue;
    if (prev) observe(prev->symbol, e.symbol, e.t - prev->t);
    prev = &e;
  }
}

void DelayDb::save(std::ostream& out) const {
  std::vector<std::string> lines;
  lines.reserve(entries_.size());
  for (const auto& [k, v] : entries_) {
    lines.push_back(k.first.to_string() + "->" + k.second.to_string() + "=" + format_seconds(v));
  }
  std::sort(lines.begin(), lines.end());
  out << "#delay\n";
  for (const auto& l : lines) out << l << '\n';
}

std::string DelayDb::serialize() const {
  std::ostringstream os;
  save(os);
  return os.str();
}

DelayDb DelayDb::load(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || trim(line) != "#delay") {
    throw InputError("delay db: missing '#delay' header");
  }
  DelayDb db;
  while (std::getline(in, line)) {
    const std::string t = trim(line);
    if (t.empty() || t.front() == '#') continue;
    const auto arrow = t.find("->");
    const auto eq = t.rfind('=');
    if (arrow == std::string::npos || eq == std::string::npos || eq < arrow) {
      throw InputError("delay db: bad line: " + t);
    }
    const EventSymbol from = EventSymbol::parse(std::string_view(t).substr(0, arrow));
    const EventSymbol to = EventSymbol::parse(std::string_view(t).substr(arrow + 2, eq - arrow - 2));
    double v = 0;
    try {
      std::size_t used = 0;
      v = std::stod(t.substr(eq + 1), &used);
      if (used != t.size() - eq - 1) throw std::invalid_argument("trailing");
    } catch (const std::exception&) {
      throw InputError("delay db: bad delay value: " + t);
    }
    if (v < 0) throw InputError("delay db: negative delay: " + t);
    db.observe(from, to, v);
  }
  return db;
}

DelayDb DelayDb::parse(std::string_view text) {
  std::istringstream is{std::string(text)};
  return load(is);
}

LearnedModel learn_sequences(std::span<const EventSequence> sequences, std::size_t n) {
  if (sequences.empty()) throw EmptyTraining();
  LearnedModel model{LookaheadDb(n), DelayDb{}};
  std::vector<EventSymbol> symbols;
  for (const auto& seq : sequences) {
    symbols.clear();
    for (const auto& e : seq.events) symbols.push_back(e.symbol);
    model.lookahead.add_sequence(symbols);
    model.delay.add_sequence(seq.events);
  }
  return model;
}

LearnedModel learn(std::span<const FlowRecord> flows, std::size_t n) {
  if (flows.empty()) throw EmptyTraining();
  std::vector<EventSequence> sequences;
  sequences.reserve(flows.size());
  for (const auto& f : flows) sequences.push_back(build_sequence(f));
  return learn_sequences(sequences, n);
}

std::vector<SaturationPoint> saturation_curve(std::span<const EventSequence> sequences,
                                              std::size_t n) {
  std::vector<SaturationPoint> out;
  LookaheadDb db(n);
  std::vector<EventSymbol> symbols;
  for (std::size_t i = 0; i < sequences.size(); ++i) {
    symbols.clear();
    for (const auto& e : sequences[i].events) symbols.push_back(e.symbol);
    db.add_sequence(symbols);
    out.push_back({i + 1, db.size()});
  }
  return out;
}

}  // namespace h2slow
