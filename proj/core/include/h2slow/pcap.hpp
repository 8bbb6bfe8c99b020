#pragma once

// libpcap capture files and the length-prefixed live packet feed.

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "h2slow/bytes.hpp"
#include "h2slow/packet.hpp"

namespace h2slow {

// Microseconds since the epoch (or since simulation start).
using Micros = std::int64_t;

inline double to_seconds(Micros us) { return static_cast<double>(us) / 1e6; }

struct RawPacket {
  Micros ts = 0;
  Bytes data;
};

struct Capture {
  LinkType link = LinkType::kEthernet;
  std::vector<RawPacket> packets;
};

// Reads classic pcap (magic a1b2c3d4 / d4c3b2a1, and the nanosecond
// variants a1b23c4d / 4d3cb2a1). Throws UnreadableInput on a bad header.
class PcapReader {
 public:
  explicit PcapReader(std::istream& in);

  LinkType link() const { return link_; }
  // Next record, or nullopt at end of file. A truncated final record is
  // treated as end of file.
  std::optional<RawPacket> next();

 private:
  std::istream& in_;
  bool swapped_ = false;
  bool nanos_ = false;
  LinkType link_ = LinkType::kEthernet;
};

class PcapWriter {
 public:
  PcapWriter(std::ostream& out, LinkType link = LinkType::kEthernet);
  void write(const RawPacket& packet);

 private:
  std::ostream& out_;
};

Capture read_pcap_file(const std::string& path);
Capture read_pcap(std::istream& in);
void write_pcap(std::ostream& out, const Capture& capture);
Bytes serialize_pcap(const Capture& capture);

// Live feed framing. Each record is
//   u32 be  length of what follows (8 + packet bytes)
//   u32 be  timestamp seconds
//   u32 be  timestamp microseconds
//   packet bytes (Ethernet)
Bytes encode_feed_record(const RawPacket& packet);

// Incremental decoder for the feed; push arbitrary chunks, pop records.
class FeedDecoder {
 public:
  void push(ByteView chunk);
  std::optional<RawPacket> pop();
  std::size_t buffered() const { return buffer_.size() - offset_; }

 private:
  Bytes buffer_;
  std::size_t offset_ = 0;
};

}  // namespace h2slow
