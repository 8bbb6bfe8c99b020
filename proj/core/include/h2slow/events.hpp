#pragma once

// Frame-to-event translation and per-flow event sequences.
//
//   3-way handshake                      Start
//   connection preface                   Pref
//   DATA, END_STREAM clear / set         Data_frame_!ES / Data_frame_ES
//   HEADERS, ES and EH clear             Hdr_frame_!(ESEH)
//   HEADERS, ES clear, EH set            Hdr_frame_!ES_EH
//   HEADERS, ES and EH set               Hdr_frame_(ESEH)
//   SETTINGS ack                         Settings_ACK
//   SETTINGS, no recognized parameter    Settings_UNACK
//   SETTINGS INITIAL_WINDOW_SIZE         Ini_Win_Size=0 / Ini_Win_Size!0
//   SETTINGS MAX_CONCURRENT_STREAMS      Max_Con_Strm=0 / Max_Con_Strm!0
//   WINDOW_UPDATE                        win_size_incr=0 / win_size_incr!0
//   GOAWAY                               GOAWAY
//   CONTINUATION                         CONTINUATION
//   connection termination (FIN/RST)     End
//   end of one frame's event group       *
//   detector timeout                     TO_i
//
// HEADERS with ES set but EH clear also maps to Hdr_frame_!(ESEH).

#include <compare>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "h2slow/flow.hpp"

namespace h2slow {

enum class EventKind : std::uint8_t {
  kStart,
  kPref,
  kDataNoEs,
  kDataEs,
  kHdrNoEsNoEh,
  kHdrNoEsEh,
  kHdrEsEh,
  kSettingsAck,
  kSettingsUnack,
  kIniWinSizeZero,
  kIniWinSizeNonZero,
  kMaxConStrmNonZero,
  kMaxConStrmZero,
  kWinSizeIncrNonZero,
  kWinSizeIncrZero,
  kGoAway,
  kContinuation,
  kEnd,
  kStar,
  kTimeout,
};

// One symbol of the closed event alphabet. Timeouts carry a 1-based index.
class EventSymbol {
 public:
  constexpr EventSymbol() = default;
  constexpr EventSymbol(EventKind kind) : kind_(kind) {}  // NOLINT: implicit by design of the alphabet
  static constexpr EventSymbol timeout(std::uint32_t index) {
    EventSymbol s(EventKind::kTimeout);
    s.index_ = index;
    return s;
  }

  constexpr EventKind kind() const { return kind_; }
  constexpr std::uint32_t timeout_index() const { return index_; }
  constexpr bool is_star() const { return kind_ == EventKind::kStar; }
  constexpr bool is_timeout() const { return kind_ == EventKind::kTimeout; }

  // Dense integer code, unique per symbol; used for hashing.
  constexpr std::uint32_t code() const {
    return static_cast<std::uint32_t>(kind_) | (index_ << 8);
  }

  std::string to_string() const;
  // Throws InputError for text outside the alphabet.
  static EventSymbol parse(std::string_view text);

  constexpr auto operator<=>(const EventSymbol&) const = default;

 private:
  EventKind kind_ = EventKind::kStart;
  std::uint32_t index_ = 0;
};

// Every non-timeout symbol, in declaration order.
std::span<const EventSymbol> base_alphabet();

struct TimedEvent {
  EventSymbol symbol;
  double t = 0.0;
  bool operator==(const TimedEvent&) const = default;
};

struct EventSequence {
  FlowKey flow;
  std::vector<TimedEvent> events;

  std::vector<EventSymbol> symbols() const;
  std::size_t size() const { return events.size(); }
};

// Event group for one frame or preface, without the trailing Star. Frames
// without a table row (PING, PRIORITY, RST_STREAM, PUSH_PROMISE, unknown)
// yield an empty group.
std::vector<EventSymbol> translate_frame(const FlowContent& content);

// Start, *, then one group + * per item, then End unless the capture ended.
EventSequence build_sequence(const FlowRecord& flow);

// Appends TO_i and * when more than `max_delay` has passed since the last
// non-Star event. i continues a run of immediately preceding timeouts.
std::optional<EventSymbol> inject_timeout(EventSequence& seq, double now, double max_delay);

// Index of the last non-Star event, if any.
std::optional<std::size_t> last_non_star(std::span<const TimedEvent> events);

// "Start->*->Pref->*->End"
std::string format_sequence(std::span<const EventSymbol> symbols);
std::string format_sequence(const EventSequence& seq);
std::vector<EventSymbol> parse_sequence(std::string_view line);

}  // namespace h2slow
