#pragma once

// Link/IP/TCP layer parsing and construction for captured packets.

#include <array>
#include <compare>
#include <cstdint>
#include <optional>
#include <string>

#include "h2slow/bytes.hpp"

namespace h2slow {

class IpAddress {
 public:
  IpAddress() = default;
  static IpAddress v4(std::uint32_t host_order);
  static IpAddress v4(std::uint8_t a, std::uint8_t b, std::uint8_t c, std::uint8_t d);
  static IpAddress v6(const std::array<std::uint8_t, 16>& bytes);
  // Accepts dotted quad or a colon-separated IPv6 literal. Throws InputError.
  static IpAddress parse(std::string_view text);

  bool is_v6() const { return v6_; }
  std::uint32_t v4_value() const;
  const std::array<std::uint8_t, 16>& bytes() const { return bytes_; }
  std::string to_string() const;

  auto operator<=>(const IpAddress&) const = default;

 private:
  bool v6_ = false;
  std::array<std::uint8_t, 16> bytes_{};  // v4 stored in the first 4 octets
};

namespace tcp_flags {
inline constexpr std::uint8_t kFin = 0x01;
inline constexpr std::uint8_t kSyn = 0x02;
inline constexpr std::uint8_t kRst = 0x04;
inline constexpr std::uint8_t kPsh = 0x08;
inline constexpr std::uint8_t kAck = 0x10;
}  // namespace tcp_flags

// pcap LINKTYPE values understood by the parser.
enum class LinkType : std::uint32_t {
  kEthernet = 1,
  kRaw = 101,
  kLinuxSll = 113,
};

struct TcpSegment {
  IpAddress src_ip;
  IpAddress dst_ip;
  std::uint16_t src_port = 0;
  std::uint16_t dst_port = 0;
  std::uint32_t seq = 0;
  std::uint32_t ack = 0;
  std::uint8_t flags = 0;
  std::uint16_t window = 0;
  ByteView payload;  // view into the packet buffer

  bool has(std::uint8_t f) const { return (flags & f) != 0; }
};

// Parses a captured frame down to TCP. Returns nullopt for anything that is
// not TCP over IPv4/IPv6 (ARP, UDP, truncated headers, IP fragments).
std::optional<TcpSegment> parse_tcp_packet(ByteView packet, LinkType link);

struct TcpSegmentSpec {
  IpAddress src_ip;
  IpAddress dst_ip;
  std::uint16_t src_port = 0;
  std::uint16_t dst_port = 0;
  std::uint32_t seq = 0;
  std::uint32_t ack = 0;
  std::uint8_t flags = 0;
  std::uint16_t window = 65535;
  ByteView payload;
};

// Builds Ethernet + IPv4 (or IPv6) + TCP with valid checksums.
Bytes build_tcp_packet(const TcpSegmentSpec& spec);

}  // namespace h2slow
