#include "h2slow/pcap.hpp"

#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

#include "h2slow/errors.hpp"

namespace h2slow {

namespace {

constexpr std::uint32_t kMagicMicros = 0xa1b2c3d4u;
constexpr std::uint32_t kMagicNanos = 0xa1b23c4du;
constexpr std::uint32_t kSnapLen = 262144;
// Records larger than this are rejected as corrupt.
constexpr std::uint32_t kMaxRecord = 16u << 20;

std::uint32_t bswap32(std::uint32_t v) {
  return (v >> 24) | ((v >> 8) & 0xff00u) | ((v << 8) & 0xff0000u) | (v << 24);
}

std::uint32_t load_le32(const std::uint8_t* p) {
  return std::uint32_t{p[0]} | (std::uint32_t{p[1]} << 8) | (std::uint32_t{p[2]} << 16) |
         (std::uint32_t{p[3]} << 24);
}

void put_le32(std::ostream& out, std::uint32_t v) {
  const char b[4] = {static_cast<char>(v), static_cast<char>(v >> 8), static_cast<char>(v >> 16),
                     static_cast<char>(v >> 24)};
  out.write(b, 4);
}

void put_le16(std::ostream& out, std::uint16_t v) {
  const char b[2] = {static_cast<char>(v), static_cast<char>(v >> 8)};
  out.write(b, 2);
}

}  // namespace

PcapReader::PcapReader(std::istream& in) : in_(in) {
  std::uint8_t hdr[24];
  if (!in_.read(reinterpret_cast<char*>(hdr), sizeof hdr)) {
    throw UnreadableInput("pcap: file shorter than global header");
  }
  const std::uint32_t magic = load_le32(hdr);
  if (magic == kMagicMicros || magic == kMagicNanos) {
    swapped_ = false;
  } else if (bswap32(magic) == kMagicMicros || bswap32(magic) == kMagicNanos) {
    swapped_ = true;
  } else {
    throw UnreadableInput("pcap: unrecognized magic number");
  }
  const std::uint32_t native = swapped_ ? bswap32(magic) : magic;
  nanos_ = native == kMagicNanos;
  std::uint32_t link = load_le32(hdr + 20);
  if (swapped_) link = bswap32(link);
  switch (link) {
    case 1: link_ = LinkType::kEthernet; break;
    case 101: link_ = LinkType::kRaw; break;
    case 113: link_ = LinkType::kLinuxSll; break;
    default: throw UnreadableInput("pcap: unsupported link type " + std::to_string(link));
  }
}

std::optional<RawPacket> PcapReader::next() {
  std::uint8_t rec[16];
  if (!in_.read(reinterpret_cast<char*>(rec), sizeof rec)) return std::nullopt;
  auto field = [&](int i) {
    const std::uint32_t v = load_le32(rec + 4 * i);
    return swapped_ ? bswap32(v) : v;
  };
  const std::uint32_t sec = field(0);
  const std::uint32_t frac = field(1);
  const std::uint32_t incl = field(2);
  if (incl > kMaxRecord) throw UnreadableInput("pcap: implausible record length");
  RawPacket p;
  p.ts = static_cast<Micros>(sec) * 1000000 + (nanos_ ? frac / 1000 : frac);
  p.data.resize(incl);
  if (!in_.read(reinterpret_cast<char*>(p.data.data()), incl)) return std::nullopt;
  return p;
}

PcapWriter::PcapWriter(std::ostream& out, LinkType link) : out_(out) {
  put_le32(out_, kMagicMicros);
  put_le16(out_, 2);
  put_le16(out_, 4);
  put_le32(out_, 0);
  put_le32(out_, 0);
  put_le32(out_, kSnapLen);
  put_le32(out_, static_cast<std::uint32_t>(link));
}

void PcapWriter::write(const RawPacket& packet) {
  put_le32(out_, static_cast<std::uint32_t>(packet.ts / 1000000));
  put_le32(out_, static_cast<std::uint32_t>(packet.ts % 1000000));
  put_le32(out_, static_cast<std::uint32_t>(packet.data.size()));
  put_le32(out_, static_cast<std::uint32_t>(packet.data.size()));
  out_.write(reinterpret_cast<const char*>(packet.data.data()),
             static_cast<std::streamsize>(packet.data.size()));
}

Capture read_pcap(std::istream& in) {
  PcapReader reader(in);
  Capture cap;
  cap.link = reader.link();
  while (auto p = reader.next()) cap.packets.push_back(std::move(*p));
  return cap;
}

Capture read_pcap_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw UnreadableInput("cannot open " + path);
  return read_pcap(in);
}

void write_pcap(std::ostream& out, const Capture& capture) {
  PcapWriter w(out, capture.link);
  for (const auto& p : capture.packets) w.write(p);
}

Bytes serialize_pcap(const Capture& capture) {
  std::ostringstream os(std::ios::binary);
  write_pcap(os, capture);
  const std::string s = os.str();
  return Bytes(s.begin(), s.end());
}

Bytes encode_feed_record(const RawPacket& packet) {
  Bytes out;
  out.reserve(12 + packet.data.size());
  put_be32(out, static_cast<std::uint32_t>(8 + packet.data.size()));
  put_be32(out, static_cast<std::uint32_t>(packet.ts / 1000000));
  put_be32(out, static_cast<std::uint32_t>(packet.ts % 1000000));
  append(out, packet.data);
  return out;
}

void FeedDecoder::push(ByteView chunk) {
  if (offset_ > 0 && offset_ == buffer_.size()) {
    buffer_.clear();
    offset_ = 0;
  }
  append(buffer_, chunk);
}

std::optional<RawPacket> FeedDecoder::pop() {
  const std::size_t avail = buffer_.size() - offset_;
  if (avail < 4) return std::nullopt;
  const std::uint32_t len = load_be32(buffer_.data() + offset_);
  if (len < 8 || len > kMaxRecord) throw InputError("feed: bad record length");
  if (avail < 4 + std::size_t{len}) return std::nullopt;
  const std::uint8_t* p = buffer_.data() + offset_ + 4;
  RawPacket pkt;
  pkt.ts = static_cast<Micros>(load_be32(p)) * 1000000 + load_be32(p + 4);
  pkt.data.assign(p + 8, p + len);
  offset_ += 4 + len;
  if (offset_ > (1u << 20) && offset_ * 2 > buffer_.size()) {
    buffer_.erase(buffer_.begin(), buffer_.begin() + static_cast<std::ptrdiff_t>(offset_));
    offset_ = 0;
  }
  return pkt;
}

}  // namespace h2slow
