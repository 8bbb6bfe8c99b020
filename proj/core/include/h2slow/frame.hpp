#pragma once

// HTTP/2 framing (RFC 7540 section 4.1) and the client connection preface.
//
// Header blocks are carried as opaque bytes; HPACK is never decoded. Padding
// and priority sub-fields are preserved so that encode(decode(b)) reproduces
// the original bytes.

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "h2slow/bytes.hpp"

namespace h2slow {

enum class FrameType : std::uint8_t {
  kData = 0x0,
  kHeaders = 0x1,
  kPriority = 0x2,
  kRstStream = 0x3,
  kSettings = 0x4,
  kPushPromise = 0x5,
  kPing = 0x6,
  kGoAway = 0x7,
  kWindowUpdate = 0x8,
  kContinuation = 0x9,
};

namespace frame_flags {
inline constexpr std::uint8_t kEndStream = 0x01;
inline constexpr std::uint8_t kAck = 0x01;
inline constexpr std::uint8_t kEndHeaders = 0x04;
inline constexpr std::uint8_t kPadded = 0x08;
inline constexpr std::uint8_t kPriority = 0x20;
}  // namespace frame_flags

namespace settings_id {
inline constexpr std::uint16_t kHeaderTableSize = 0x1;
inline constexpr std::uint16_t kEnablePush = 0x2;
inline constexpr std::uint16_t kMaxConcurrentStreams = 0x3;
inline constexpr std::uint16_t kInitialWindowSize = 0x4;
inline constexpr std::uint16_t kMaxFrameSize = 0x5;
inline constexpr std::uint16_t kMaxHeaderListSize = 0x6;
}  // namespace settings_id

inline constexpr std::size_t kFrameHeaderSize = 9;
inline constexpr std::uint32_t kMaxFrameLength = (1u << 24) - 1;
inline constexpr std::uint32_t kStreamIdMask = 0x7fffffffu;

inline constexpr std::array<std::uint8_t, 24> kConnectionPreface = {
    0x50, 0x52, 0x49, 0x20, 0x2a, 0x20, 0x48, 0x54, 0x54, 0x50, 0x2f, 0x32,
    0x2e, 0x30, 0x0d, 0x0a, 0x0d, 0x0a, 0x53, 0x4d, 0x0d, 0x0a, 0x0d, 0x0a};

struct FrameHeader {
  std::uint32_t length = 0;
  std::uint8_t type = 0;
  std::uint8_t flags = 0;
  std::uint32_t stream_id = 0;

  bool operator==(const FrameHeader&) const = default;
};

// Present only when the PADDED flag is set. `bytes` are the trailing pad
// octets (normally zero, kept verbatim).
struct Padding {
  Bytes bytes;
  bool operator==(const Padding&) const = default;
};

struct DataBody {
  bool end_stream = false;
  Bytes payload;
  std::optional<Padding> padding;
  bool operator==(const DataBody&) const = default;
};

struct HeadersBody {
  bool end_stream = false;
  bool end_headers = false;
  Bytes block;
  std::optional<std::array<std::uint8_t, 5>> priority;
  std::optional<Padding> padding;
  bool operator==(const HeadersBody&) const = default;
};

struct ContinuationBody {
  bool end_headers = false;
  Bytes block;
  bool operator==(const ContinuationBody&) const = default;
};

struct SettingsParam {
  std::uint16_t id = 0;
  std::uint32_t value = 0;
  bool operator==(const SettingsParam&) const = default;
};

struct SettingsBody {
  bool ack = false;
  std::vector<SettingsParam> params;
  bool operator==(const SettingsBody&) const = default;
};

struct WindowUpdateBody {
  std::uint32_t increment = 0;  // 31 bits; zero is representable
  bool operator==(const WindowUpdateBody&) const = default;
};

struct GoAwayBody {
  std::uint32_t last_stream_id = 0;
  std::uint32_t error_code = 0;
  Bytes debug_data;
  bool operator==(const GoAwayBody&) const = default;
};

// PRIORITY, RST_STREAM, PUSH_PROMISE, PING and unknown types.
struct OtherBody {
  Bytes raw;
  bool operator==(const OtherBody&) const = default;
};

using FrameBody = std::variant<DataBody, HeadersBody, ContinuationBody, SettingsBody,
                               WindowUpdateBody, GoAwayBody, OtherBody>;

struct Frame {
  FrameHeader header;
  FrameBody body;

  bool operator==(const Frame&) const = default;

  // Builders used by the traffic generators; header.length is filled in.
  static Frame data(std::uint32_t stream, Bytes payload, bool end_stream);
  static Frame headers(std::uint32_t stream, Bytes block, bool end_stream, bool end_headers);
  static Frame continuation(std::uint32_t stream, Bytes block, bool end_headers);
  static Frame settings(std::vector<SettingsParam> params);
  static Frame settings_ack();
  static Frame window_update(std::uint32_t stream, std::uint32_t increment);
  static Frame goaway(std::uint32_t last_stream_id, std::uint32_t error_code);
  static Frame ping(std::array<std::uint8_t, 8> opaque, bool ack);
  static Frame other(std::uint8_t type, std::uint8_t flags, std::uint32_t stream, Bytes raw);
};

std::string frame_type_name(std::uint8_t type);

struct Decoded {
  Frame frame;
  std::size_t consumed = 0;
};

// More bytes are required; `needed` is the count beyond what was supplied.
struct Truncated {
  std::size_t needed = 0;
};

struct Malformed {
  std::string reason;
};

using DecodeResult = std::variant<Decoded, Truncated, Malformed>;

// Decodes the first complete frame in `buf`. Never reads past the declared
// frame length.
DecodeResult decode_frame(ByteView buf);

// Serializes `frame`; the header length and body-owned flag bits are derived
// from the body. Throws OversizedPayload beyond 2^24-1 payload octets.
Bytes encode_frame(const Frame& frame);

// Appends the encoding of `frame` to `out`.
void encode_frame_into(const Frame& frame, Bytes& out);

// Recomputes header.length and the body-owned flag bits of header.flags so
// the header agrees with the body. Other flag bits are left untouched.
void sync_header(Frame& frame);

struct PrefaceSplit {
  bool preface_present = false;
  ByteView rest;
};

PrefaceSplit strip_preface(ByteView buf);

}  // namespace h2slow
