#include "h2slow/frame.hpp"

#include <algorithm>
#include <cctype>
#include <cstdio>

#include "h2slow/errors.hpp"

namespace h2slow {

namespace {

constexpr std::uint32_t kUint31Mask = 0x7fffffffu;

std::uint8_t body_flag_mask(std::uint8_t type) {
  switch (static_cast<FrameType>(type)) {
    case FrameType::kData:
      return frame_flags::kEndStream | frame_flags::kPadded;
    case FrameType::kHeaders:
      return frame_flags::kEndStream | frame_flags::kEndHeaders | frame_flags::kPadded |
             frame_flags::kPriority;
    case FrameType::kContinuation:
      return frame_flags::kEndHeaders;
    case FrameType::kSettings:
      return frame_flags::kAck;
    default:
      return 0;
  }
}

struct BodyEncoding {
  std::uint8_t flags = 0;
  Bytes payload;
};

void put_padding_prefix(const std::optional<Padding>& padding, BodyEncoding& enc) {
  if (!padding) return;
  if (padding->bytes.size() > 0xff) {
    throw OversizedPayload("padding longer than 255 octets");
  }
  enc.flags |= frame_flags::kPadded;
  enc.payload.push_back(static_cast<std::uint8_t>(padding->bytes.size()));
}

void put_padding_suffix(const std::optional<Padding>& padding, BodyEncoding& enc) {
  if (padding) append(enc.payload, padding->bytes);
}

BodyEncoding encode_body(const FrameBody& body) {
  BodyEncoding enc;
  std::visit(
      [&](const auto& b) {
        using T = std::decay_t<decltype(b)>;
        if constexpr (std::is_same_v<T, DataBody>) {
          if (b.end_stream) enc.flags |= frame_flags::kEndStream;
          put_padding_prefix(b.padding, enc);
          append(enc.payload, b.payload);
          put_padding_suffix(b.padding, enc);
        } else if constexpr (std::is_same_v<T, HeadersBody>) {
          if (b.end_stream) enc.flags |= frame_flags::kEndStream;
          if (b.end_headers) enc.flags |= frame_flags::kEndHeaders;
          put_padding_prefix(b.padding, enc);
          if (b.priority) {
            enc.flags |= frame_flags::kPriority;
            append(enc.payload, *b.priority);
          }
          append(enc.payload, b.block);
          put_padding_suffix(b.padding, enc);
        } else if constexpr (std::is_same_v<T, ContinuationBody>) {
          if (b.end_headers) enc.flags |= frame_flags::kEndHeaders;
          append(enc.payload, b.block);
        } else if constexpr (std::is_same_v<T, SettingsBody>) {
          if (b.ack) enc.flags |= frame_flags::kAck;
          for (const auto& p : b.params) {
            put_be16(enc.payload, p.id);
            put_be32(enc.payload, p.value);
          }
        } else if constexpr (std::is_same_v<T, WindowUpdateBody>) {
          put_be32(enc.payload, b.increment & kUint31Mask);
        } else if constexpr (std::is_same_v<T, GoAwayBody>) {
          put_be32(enc.payload, b.last_stream_id & kUint31Mask);
          put_be32(enc.payload, b.error_code);
          append(enc.payload, b.debug_data);
        } else {
          append(enc.payload, b.raw);
        }
      },
      body);
  return enc;
}

std::uint8_t natural_type(const FrameBody& body, std::uint8_t fallback) {
  switch (body.index()) {
    case 0: return static_cast<std::uint8_t>(FrameType::kData);
    case 1: return static_cast<std::uint8_t>(FrameType::kHeaders);
    case 2: return static_cast<std::uint8_t>(FrameType::kContinuation);
    case 3: return static_cast<std::uint8_t>(FrameType::kSettings);
    case 4: return static_cast<std::uint8_t>(FrameType::kWindowUpdate);
    case 5: return static_cast<std::uint8_t>(FrameType::kGoAway);
    default: return fallback;
  }
}

// Splits off the PADDED prefix/suffix. Returns false when the pad length
// exceeds what the payload can hold.
bool unpad(ByteView& payload, std::optional<Padding>& padding, bool padded) {
  if (!padded) return true;
  if (payload.empty()) return false;
  const std::size_t pad_len = payload[0];
  payload = payload.subspan(1);
  if (pad_len > payload.size()) return false;
  padding = Padding{Bytes(payload.end() - static_cast<std::ptrdiff_t>(pad_len), payload.end())};
  payload = payload.first(payload.size() - pad_len);
  return true;
}

Frame finish(std::uint8_t type, std::uint8_t extra_flags, std::uint32_t stream, FrameBody body) {
  Frame f;
  f.header.type = type;
  f.header.flags = extra_flags;
  f.header.stream_id = stream & kStreamIdMask;
  f.body = std::move(body);
  sync_header(f);
  return f;
}

}  // namespace

std::string frame_type_name(std::uint8_t type) {
  switch (static_cast<FrameType>(type)) {
    case FrameType::kData: return "DATA";
    case FrameType::kHeaders: return "HEADERS";
    case FrameType::kPriority: return "PRIORITY";
    case FrameType::kRstStream: return "RST_STREAM";
    case FrameType::kSettings: return "SETTINGS";
    case FrameType::kPushPromise: return "PUSH_PROMISE";
    case FrameType::kPing: return "PING";
    case FrameType::kGoAway: return "GOAWAY";
    case FrameType::kWindowUpdate: return "WINDOW_UPDATE";
    case FrameType::kContinuation: return "CONTINUATION";
  }
  char buf[24];
  std::snprintf(buf, sizeof buf, "UNKNOWN(0x%02x)", type);
  return buf;
}

void sync_header(Frame& frame) {
  frame.header.type = natural_type(frame.body, frame.header.type);
  BodyEncoding enc = encode_body(frame.body);
  const std::uint8_t mask = body_flag_mask(frame.header.type);
  frame.header.flags = static_cast<std::uint8_t>((frame.header.flags & ~mask) | enc.flags);
  frame.header.length = static_cast<std::uint32_t>(enc.payload.size());
  frame.header.stream_id &= kStreamIdMask;
}

void encode_frame_into(const Frame& frame, Bytes& out) {
  BodyEncoding enc = encode_body(frame.body);
  if (enc.payload.size() > kMaxFrameLength) {
    throw OversizedPayload("frame payload of " + std::to_string(enc.payload.size()) +
                           " octets exceeds 24-bit length");
  }
  const std::uint8_t type = natural_type(frame.body, frame.header.type);
  const std::uint8_t mask = body_flag_mask(type);
  const auto flags = static_cast<std::uint8_t>((frame.header.flags & ~mask) | enc.flags);
  out.reserve(out.size() + kFrameHeaderSize + enc.payload.size());
  put_be24(out, static_cast<std::uint32_t>(enc.payload.size()));
  out.push_back(type);
  out.push_back(flags);
  put_be32(out, frame.header.stream_id & kStreamIdMask);
  append(out, enc.payload);
}

Bytes encode_frame(const Frame& frame) {
  Bytes out;
  encode_frame_into(frame, out);
  return out;
}

DecodeResult decode_frame(ByteView buf) {
  if (buf.size() < kFrameHeaderSize) return Truncated{kFrameHeaderSize - buf.size()};

  FrameHeader h;
  h.length = load_be24(buf.data());
  h.type = buf[3];
  h.flags = buf[4];
  h.stream_id = load_be32(buf.data() + 5) & kStreamIdMask;

  const std::size_t total = kFrameHeaderSize + h.length;
  if (buf.size() < total) return Truncated{total - buf.size()};

  ByteView payload = buf.subspan(kFrameHeaderSize, h.length);
  Frame f;
  f.header = h;

  switch (static_cast<FrameType>(h.type)) {
    case FrameType::kData: {
      DataBody b;
      b.end_stream = (h.flags & frame_flags::kEndStream) != 0;
      if (!unpad(payload, b.padding, (h.flags & frame_flags::kPadded) != 0)) {
        return Malformed{"DATA padding exceeds payload"};
      }
      b.payload.assign(payload.begin(), payload.end());
      f.body = std::move(b);
      break;
    }
    case FrameType::kHeaders: {
      HeadersBody b;
      b.end_stream = (h.flags & frame_flags::kEndStream) != 0;
      b.end_headers = (h.flags & frame_flags::kEndHeaders) != 0;
      if (!unpad(payload, b.padding, (h.flags & frame_flags::kPadded) != 0)) {
        return Malformed{"HEADERS padding exceeds payload"};
      }
      if (h.flags & frame_flags::kPriority) {
        if (payload.size() < 5) return Malformed{"HEADERS priority fields truncated"};
        std::array<std::uint8_t, 5> prio{};
        std::copy_n(payload.begin(), 5, prio.begin());
        b.priority = prio;
        payload = payload.subspan(5);
      }
      b.block.assign(payload.begin(), payload.end());
      f.body = std::move(b);
      break;
    }
    case FrameType::kContinuation: {
      ContinuationBody b;
      b.end_headers = (h.flags & frame_flags::kEndHeaders) != 0;
      b.block.assign(payload.begin(), payload.end());
      f.body = std::move(b);
      break;
    }
    case FrameType::kSettings: {
      SettingsBody b;
      b.ack = (h.flags & frame_flags::kAck) != 0;
      if (h.length % 6 != 0) return Malformed{"SETTINGS length not a multiple of 6"};
      if (b.ack && h.length != 0) return Malformed{"SETTINGS ack with non-empty payload"};
      for (std::size_t off = 0; off < payload.size(); off += 6) {
        b.params.push_back({load_be16(payload.data() + off), load_be32(payload.data() + off + 2)});
      }
      f.body = std::move(b);
      break;
    }
    case FrameType::kWindowUpdate: {
      if (h.length != 4) return Malformed{"WINDOW_UPDATE length must be 4"};
      f.body = WindowUpdateBody{load_be32(payload.data()) & kUint31Mask};
      break;
    }
    case FrameType::kGoAway: {
      if (h.length < 8) return Malformed{"GOAWAY shorter than 8 octets"};
      GoAwayBody b;
      b.last_stream_id = load_be32(payload.data()) & kUint31Mask;
      b.error_code = load_be32(payload.data() + 4);
      b.debug_data.assign(payload.begin() + 8, payload.end());
      f.body = std::move(b);
      break;
    }
    default:
      f.body = OtherBody{Bytes(payload.begin(), payload.end())};
      break;
  }
  return Decoded{std::move(f), total};
}

PrefaceSplit strip_preface(ByteView buf) {
  if (buf.size() >= kConnectionPreface.size() &&
      std::equal(kConnectionPreface.begin(), kConnectionPreface.end(), buf.begin())) {
    return {true, buf.subspan(kConnectionPreface.size())};
  }
  return {false, buf};
}

Frame Frame::data(std::uint32_t stream, Bytes payload, bool end_stream) {
  return finish(0x0, 0, stream, DataBody{end_stream, std::move(payload), std::nullopt});
}

Frame Frame::headers(std::uint32_t stream, Bytes block, bool end_stream, bool end_headers) {
  return finish(0x1, 0, stream,
                HeadersBody{end_stream, end_headers, std::move(block), std::nullopt, std::nullopt});
}

Frame Frame::continuation(std::uint32_t stream, Bytes block, bool end_headers) {
  return finish(0x9, 0, stream, ContinuationBody{end_headers, std::move(block)});
}

Frame Frame::settings(std::vector<SettingsParam> params) {
  return finish(0x4, 0, 0, SettingsBody{false, std::move(params)});
}

Frame Frame::settings_ack() { return finish(0x4, 0, 0, SettingsBody{true, {}}); }

Frame Frame::window_update(std::uint32_t stream, std::uint32_t increment) {
  return finish(0x8, 0, stream, WindowUpdateBody{increment & kUint31Mask});
}

Frame Frame::goaway(std::uint32_t last_stream_id, std::uint32_t error_code) {
  return finish(0x7, 0, 0, GoAwayBody{last_stream_id & kUint31Mask, error_code, {}});
}

Frame Frame::ping(std::array<std::uint8_t, 8> opaque, bool ack) {
  return finish(0x6, ack ? frame_flags::kAck : 0, 0, OtherBody{Bytes(opaque.begin(), opaque.end())});
}

Frame Frame::other(std::uint8_t type, std::uint8_t flags, std::uint32_t stream, Bytes raw) {
  return finish(type, flags, stream, OtherBody{std::move(raw)});
}

std::string to_hex(ByteView bytes) {
  static constexpr char kDigits[] = "0123456789abcdef";
  std::string out;
  out.reserve(bytes.size() * 3);
  for (std::size_t i = 0; i < bytes.size(); ++i) {
    if (i) out.push_back(' ');
    out.push_back(kDigits[bytes[i] >> 4]);
    out.push_back(kDigits[bytes[i] & 0xf]);
  }
  return out;
}

Bytes from_hex(std::string_view text) {
  Bytes out;
  int pending = -1;
  for (char c : text) {
    if (std::isspace(static_cast<unsigned char>(c))) continue;
    int v;
    if (c >= '0' && c <= '9') v = c - '0';
    else if (c >= 'a' && c <= 'f') v = c - 'a' + 10;
    else if (c >= 'A' && c <= 'F') v = c - 'A' + 10;
    else throw InputError(std::string("bad hex digit '") + c + "'");
    if (pending < 0) {
      pending = v;
    } else {
      out.push_back(static_cast<std::uint8_t>((pending << 4) | v));
      pending = -1;
    }
  }
  if (pending >= 0) throw InputError("odd number of hex digits");
  return out;
}

}  // namespace h2slow
