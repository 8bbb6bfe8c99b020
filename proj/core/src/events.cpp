#include "h2slow/events.hpp"

#include <array>
#include <charconv>

#include "h2slow/errors.hpp"

namespace h2slow {

namespace {

struct Spelling {
  EventKind kind;
  std::string_view text;
};

constexpr std::array<Spelling, 19> kSpellings = {{
    {EventKind::kStart, "Start"},
    {EventKind::kPref, "Pref"},
    {EventKind::kDataNoEs, "Data_frame_!ES"},
    {EventKind::kDataEs, "Data_frame_ES"},
    {EventKind::kHdrNoEsNoEh, "Hdr_frame_!(ESEH)"},
    {EventKind::kHdrNoEsEh, "Hdr_frame_!ES_EH"},
    {EventKind::kHdrEsEh, "Hdr_frame_(ESEH)"},
    {EventKind::kSettingsAck, "Settings_ACK"},
    {EventKind::kSettingsUnack, "Settings_UNACK"},
    {EventKind::kIniWinSizeZero, "Ini_Win_Size=0"},
    {EventKind::kIniWinSizeNonZero, "Ini_Win_Size!0"},
    {EventKind::kMaxConStrmNonZero, "Max_Con_Strm!0"},
    {EventKind::kMaxConStrmZero, "Max_Con_Strm=0"},
    {EventKind::kWinSizeIncrNonZero, "win_size_incr!0"},
    {EventKind::kWinSizeIncrZero, "win_size_incr=0"},
    {EventKind::kGoAway, "GOAWAY"},
    {EventKind::kContinuation, "CONTINUATION"},
    {EventKind::kEnd, "End"},
    {EventKind::kStar, "*"},
}};

const std::array<EventSymbol, 19> kBaseAlphabet = [] {
  std::array<EventSymbol, 19> a{};
  for (std::size_t i = 0; i < kSpellings.size(); ++i) a[i] = EventSymbol(kSpellings[i].kind);
  return a;
}();

void translate_settings(const SettingsBody& s, std::vector<EventSymbol>& out) {
  if (s.ack) {
    out.push_back(EventKind::kSettingsAck);
    return;
  }
  for (const auto& p : s.params) {
    if (p.id == settings_id::kInitialWindowSize) {
      out.push_back(p.value == 0 ? EventKind::kIniWinSizeZero : EventKind::kIniWinSizeNonZero);
    } else if (p.id == settings_id::kMaxConcurrentStreams) {
      out.push_back(p.value == 0 ? EventKind::kMaxConStrmZero : EventKind::kMaxConStrmNonZero);
    }
  }
  if (out.empty()) out.push_back(EventKind::kSettingsUnack);
}

}  // namespace

std::string EventSymbol::to_string() const {
  if (kind_ == EventKind::kTimeout) return "TO_" + std::to_string(index_);
  for (const auto& s : kSpellings) {
    if (s.kind == kind_) return std::string(s.text);
  }
  return "?";
}

EventSymbol EventSymbol::parse(std::string_view text) {
  for (const auto& s : kSpellings) {
    if (s.text == text) return EventSymbol(s.kind);
  }
  if (text.starts_with("TO_")) {
    std::uint32_t index = 0;
    const auto digits = text.substr(3);
    auto [ptr, ec] = std::from_chars(digits.data(), digits.data() + digits.size(), index);
    if (ec == std::errc{} && ptr == digits.data() + digits.size() && index >= 1) {
      return timeout(index);
    }
  }
  throw InputError("unknown event symbol '" + std::string(text) + "'");
}

std::span<const EventSymbol> base_alphabet() { return kBaseAlphabet; }

std::vector<EventSymbol> EventSequence::symbols() const {
  std::vector<EventSymbol> out;
  out.reserve(events.size());
  for (const auto& e : events) out.push_back(e.symbol);
  return out;
}

std::vector<EventSymbol> translate_frame(const FlowContent& content) {
  std::vector<EventSymbol> out;
  if (std::holds_alternative<PrefaceMarker>(content)) {
    out.push_back(EventKind::kPref);
    return out;
  }
  const Frame& f = std::get<Frame>(content);
  std::visit(
      [&](const auto& b) {
        using T = std::decay_t<decltype(b)>;
        if constexpr (std::is_same_v<T, DataBody>) {
          out.push_back(b.end_stream ? EventKind::kDataEs : EventKind::kDataNoEs);
        } else if constexpr (std::is_same_v<T, HeadersBody>) {
          if (b.end_stream && b.end_headers) {
            out.push_back(EventKind::kHdrEsEh);
          } else if (!b.end_stream && b.end_headers) {
            out.push_back(EventKind::kHdrNoEsEh);
          } else {
            out.push_back(EventKind::kHdrNoEsNoEh);
          }
        } else if constexpr (std::is_same_v<T, ContinuationBody>) {
          out.push_back(EventKind::kContinuation);
        } else if constexpr (std::is_same_v<T, SettingsBody>) {
          translate_settings(b, out);
        } else if constexpr (std::is_same_v<T, WindowUpdateBody>) {
          out.push_back(b.increment == 0 ? EventKind::kWinSizeIncrZero
                                         : EventKind::kWinSizeIncrNonZero);
        } else if constexpr (std::is_same_v<T, GoAwayBody>) {
          out.push_back(EventKind::kGoAway);
        }
      },
      f.body);
  return out;
}

EventSequence build_sequence(const FlowRecord& flow) {
  EventSequence seq;
  seq.flow = flow.key;
  seq.events.push_back({EventKind::kStart, flow.established_at});
  seq.events.push_back({EventKind::kStar, flow.established_at});
  for (const auto& item : flow.items) {
    const auto group = translate_frame(item.content);
    if (group.empty()) continue;
    for (const auto& s : group) seq.events.push_back({s, item.t});
    seq.events.push_back({EventKind::kStar, item.t});
  }
  if (flow.close_kind != CloseKind::kCaptureEnd && flow.closed_at) {
    seq.events.push_back({EventKind::kEnd, *flow.closed_at});
  }
  return seq;
}

std::optional<std::size_t> last_non_star(std::span<const TimedEvent> events) {
  for (std::size_t i = events.size(); i-- > 0;) {
    if (!events[i].symbol.is_star()) return i;
  }
  return std::nullopt;
}

std::optional<EventSymbol> inject_timeout(EventSequence& seq, double now, double max_delay) {
  const auto last = last_non_star(seq.events);
  if (!last) return std::nullopt;
  const TimedEvent& anchor = seq.events[*last];
  if (anchor.symbol.kind() == EventKind::kEnd) return std::nullopt;
  if (!(now - anchor.t > max_delay)) return std::nullopt;
  const std::uint32_t index = anchor.symbol.is_timeout() ? anchor.symbol.timeout_index() + 1 : 1;
  const EventSymbol to = EventSymbol::timeout(index);
  seq.events.push_back({to, now});
  seq.events.push_back({EventKind::kStar, now});
  return to;
}

std::string format_sequence(std::span<const EventSymbol> symbols) {
  std::string out;
  for (std::size_t i = 0; i < symbols.size(); ++i) {
    if (i) out += "->";
    out += symbols[i].to_string();
  }
  return out;
}

std::string format_sequence(const EventSequence& seq) {
  const auto symbols = seq.symbols();
  return format_sequence(symbols);
}

std::vector<EventSymbol> parse_sequence(std::string_view line) {
  std::vector<EventSymbol> out;
  while (!line.empty() && (line.back() == '\n' || line.back() == '\r' || line.back() == ' ')) {
    line.remove_suffix(1);
  }
  if (line.empty()) return out;
  std::size_t pos = 0;
  while (true) {
    const auto arrow = line.find("->", pos);
    std::string_view token = line.substr(pos, arrow == std::string_view::npos ? line.npos : arrow - pos);
    while (!token.empty() && token.front() == ' ') token.remove_prefix(1);
    while (!token.empty() && token.back() == ' ') token.remove_suffix(1);
    out.push_back(EventSymbol::parse(token));
    if (arrow == std::string_view::npos) break;
    pos = arrow + 2;
  }
  return out;
}

}  // namespace h2slow
