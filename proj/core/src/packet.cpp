#include "h2slow/packet.hpp"

#include <arpa/inet.h>

#include <algorithm>
#include <cstring>

#include "h2slow/errors.hpp"

namespace h2slow {

namespace {

constexpr std::uint16_t kEtherTypeIpv4 = 0x0800;
constexpr std::uint16_t kEtherTypeIpv6 = 0x86dd;
constexpr std::uint16_t kEtherTypeVlan = 0x8100;
constexpr std::uint8_t kProtoTcp = 6;

std::uint32_t checksum_add(std::uint32_t sum, ByteView data) {
  std::size_t i = 0;
  for (; i + 1 < data.size(); i += 2) sum += load_be16(data.data() + i);
  if (i < data.size()) sum += static_cast<std::uint32_t>(data[i]) << 8;
  return sum;
}

std::uint16_t checksum_fold(std::uint32_t sum) {
  while (sum >> 16) sum = (sum & 0xffff) + (sum >> 16);
  return static_cast<std::uint16_t>(~sum);
}

std::optional<TcpSegment> parse_tcp(ByteView l4, const IpAddress& src, const IpAddress& dst) {
  if (l4.size() < 20) return std::nullopt;
  const std::size_t data_offset = static_cast<std::size_t>(l4[12] >> 4) * 4;
  if (data_offset < 20 || data_offset > l4.size()) return std::nullopt;
  TcpSegment seg;
  seg.src_ip = src;
  seg.dst_ip = dst;
  seg.src_port = load_be16(l4.data());
  seg.dst_port = load_be16(l4.data() + 2);
  seg.seq = load_be32(l4.data() + 4);
  seg.ack = load_be32(l4.data() + 8);
  seg.flags = l4[13];
  seg.window = load_be16(l4.data() + 14);
  seg.payload = l4.subspan(data_offset);
  return seg;
}

std::optional<TcpSegment> parse_ipv4(ByteView ip) {
  if (ip.size() < 20 || (ip[0] >> 4) != 4) return std::nullopt;
  const std::size_t ihl = static_cast<std::size_t>(ip[0] & 0x0f) * 4;
  const std::size_t total = load_be16(ip.data() + 2);
  if (ihl < 20 || total < ihl || ip.size() < ihl) return std::nullopt;
  const std::uint16_t frag = load_be16(ip.data() + 6);
  if ((frag & 0x1fff) != 0 || (frag & 0x2000) != 0) return std::nullopt;  // fragments
  if (ip[9] != kProtoTcp) return std::nullopt;
  // Ethernet minimum-size padding may extend past total length.
  const std::size_t end = total <= ip.size() ? total : ip.size();
  return parse_tcp(ip.subspan(ihl, end - ihl), IpAddress::v4(load_be32(ip.data() + 12)),
                   IpAddress::v4(load_be32(ip.data() + 16)));
}

std::optional<TcpSegment> parse_ipv6(ByteView ip) {
  if (ip.size() < 40 || (ip[0] >> 4) != 6) return std::nullopt;
  std::array<std::uint8_t, 16> s{}, d{};
  std::memcpy(s.data(), ip.data() + 8, 16);
  std::memcpy(d.data(), ip.data() + 24, 16);
  std::uint8_t next = ip[6];
  std::size_t off = 40;
  const std::size_t end = std::min<std::size_t>(ip.size(), 40 + load_be16(ip.data() + 4));
  // Skip hop-by-hop, routing and destination-options headers.
  while (next == 0 || next == 43 || next == 60) {
    if (off + 8 > end) return std::nullopt;
    const std::uint8_t nh = ip[off];
    const std::size_t len = (static_cast<std::size_t>(ip[off + 1]) + 1) * 8;
    off += len;
    next = nh;
  }
  if (next != kProtoTcp || off > end) return std::nullopt;
  return parse_tcp(ip.subspan(off, end - off), IpAddress::v6(s), IpAddress::v6(d));
}

std::optional<TcpSegment> parse_ip(ByteView ip) {
  if (ip.empty()) return std::nullopt;
  switch (ip[0] >> 4) {
    case 4: return parse_ipv4(ip);
    case 6: return parse_ipv6(ip);
    default: return std::nullopt;
  }
}

std::optional<TcpSegment> parse_ethertype(std::uint16_t type, ByteView rest) {
  while (type == kEtherTypeVlan) {
    if (rest.size() < 4) return std::nullopt;
    type = load_be16(rest.data() + 2);
    rest = rest.subspan(4);
  }
  if (type == kEtherTypeIpv4 || type == kEtherTypeIpv6) return parse_ip(rest);
  return std::nullopt;
}

}  // namespace

IpAddress IpAddress::v4(std::uint32_t host_order) {
  IpAddress a;
  a.bytes_[0] = static_cast<std::uint8_t>(host_order >> 24);
  a.bytes_[1] = static_cast<std::uint8_t>(host_order >> 16);
  a.bytes_[2] = static_cast<std::uint8_t>(host_order >> 8);
  a.bytes_[3] = static_cast<std::uint8_t>(host_order);
  return a;
}

IpAddress IpAddress::v4(std::uint8_t a, std::uint8_t b, std::uint8_t c, std::uint8_t d) {
  return v4((std::uint32_t{a} << 24) | (std::uint32_t{b} << 16) | (std::uint32_t{c} << 8) | d);
}

IpAddress IpAddress::v6(const std::array<std::uint8_t, 16>& bytes) {
  IpAddress a;
  a.v6_ = true;
  a.bytes_ = bytes;
  return a;
}

IpAddress IpAddress::parse(std::string_view text) {
  const std::string s(text);
  in_addr a4{};
  if (inet_pton(AF_INET, s.c_str(), &a4) == 1) return v4(ntohl(a4.s_addr));
  in6_addr a6{};
  if (inet_pton(AF_INET6, s.c_str(), &a6) == 1) {
    std::array<std::uint8_t, 16> b{};
    std::memcpy(b.data(), &a6, 16);
    return v6(b);
  }
  throw InputError("invalid IP address: " + s);
}

std::uint32_t IpAddress::v4_value() const { return load_be32(bytes_.data()); }

std::string IpAddress::to_string() const {
  char buf[INET6_ADDRSTRLEN] = {};
  if (v6_) {
    inet_ntop(AF_INET6, bytes_.data(), buf, sizeof buf);
  } else {
    inet_ntop(AF_INET, bytes_.data(), buf, sizeof buf);
  }
  return buf;
}

std::optional<TcpSegment> parse_tcp_packet(ByteView packet, LinkType link) {
  switch (link) {
    case LinkType::kEthernet:
      if (packet.size() < 14) return std::nullopt;
      return parse_ethertype(load_be16(packet.data() + 12), packet.subspan(14));
    case LinkType::kLinuxSll:
      if (packet.size() < 16) return std::nullopt;
      return parse_ethertype(load_be16(packet.data() + 14), packet.subspan(16));
    case LinkType::kRaw:
      return parse_ip(packet);
  }
  return std::nullopt;
}

Bytes build_tcp_packet(const TcpSegmentSpec& spec) {
  const bool v6 = spec.src_ip.is_v6();
  Bytes tcp;
  tcp.reserve(20 + spec.payload.size());
  put_be16(tcp, spec.src_port);
  put_be16(tcp, spec.dst_port);
  put_be32(tcp, spec.seq);
  put_be32(tcp, spec.ack);
  tcp.push_back(5 << 4);
  tcp.push_back(spec.flags);
  put_be16(tcp, spec.window);
  put_be16(tcp, 0);  // checksum
  put_be16(tcp, 0);  // urgent pointer
  append(tcp, spec.payload);

  // Pseudo-header checksum.
  std::uint32_t sum = 0;
  if (v6) {
    sum = checksum_add(sum, spec.src_ip.bytes());
    sum = checksum_add(sum, spec.dst_ip.bytes());
    sum += static_cast<std::uint32_t>(tcp.size() >> 16);
    sum += static_cast<std::uint32_t>(tcp.size() & 0xffff);
    sum += kProtoTcp;
  } else {
    sum = checksum_add(sum, ByteView(spec.src_ip.bytes().data(), 4));
    sum = checksum_add(sum, ByteView(spec.dst_ip.bytes().data(), 4));
    sum += kProtoTcp;
    sum += static_cast<std::uint32_t>(tcp.size());
  }
  sum = checksum_add(sum, tcp);
  const std::uint16_t csum = checksum_fold(sum);
  tcp[16] = static_cast<std::uint8_t>(csum >> 8);
  tcp[17] = static_cast<std::uint8_t>(csum);

  Bytes out;
  out.reserve(14 + 40 + tcp.size());
  // Locally administered MACs; the analysis never looks at them.
  const std::uint8_t dst_mac[6] = {0x02, 0x00, 0x00, 0x00, 0x00, 0x02};
  const std::uint8_t src_mac[6] = {0x02, 0x00, 0x00, 0x00, 0x00, 0x01};
  out.insert(out.end(), dst_mac, dst_mac + 6);
  out.insert(out.end(), src_mac, src_mac + 6);
  put_be16(out, v6 ? kEtherTypeIpv6 : kEtherTypeIpv4);

  if (v6) {
    put_be32(out, 0x60000000u);
    put_be16(out, static_cast<std::uint16_t>(tcp.size()));
    out.push_back(kProtoTcp);
    out.push_back(64);
    append(out, spec.src_ip.bytes());
    append(out, spec.dst_ip.bytes());
  } else {
    const std::size_t ip_start = out.size();
    out.push_back(0x45);
    out.push_back(0);
    put_be16(out, static_cast<std::uint16_t>(20 + tcp.size()));
    put_be16(out, 0);       // identification
    put_be16(out, 0x4000);  // don't fragment
    out.push_back(64);
    out.push_back(kProtoTcp);
    put_be16(out, 0);
    append(out, ByteView(spec.src_ip.bytes().data(), 4));
    append(out, ByteView(spec.dst_ip.bytes().data(), 4));
    const std::uint16_t ip_csum =
        checksum_fold(checksum_add(0, ByteView(out.data() + ip_start, 20)));
    out[ip_start + 10] = static_cast<std::uint8_t>(ip_csum >> 8);
    out[ip_start + 11] = static_cast<std::uint8_t>(ip_csum);
  }
  append(out, tcp);
  return out;
}

}  // namespace h2slow
