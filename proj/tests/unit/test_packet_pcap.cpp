#include <gtest/gtest.h>

#include <sstream>

#include "h2slow/errors.hpp"
#include "h2slow/packet.hpp"
#include "h2slow/pcap.hpp"
#include "oracles.hpp"

using namespace h2slow;

TEST(IpAddress, ParseAndPrint) {
  EXPECT_EQ(IpAddress::parse("10.2.0.7").to_string(), "10.2.0.7");
  EXPECT_EQ(IpAddress::parse("10.2.0.7"), IpAddress::v4(10, 2, 0, 7));
  EXPECT_TRUE(IpAddress::parse("2001:db8::1").is_v6());
  EXPECT_THROW(IpAddress::parse("10.2.0"), InputError);
  EXPECT_THROW(IpAddress::parse("300.1.1.1"), InputError);
}

TEST(Packet, BuildParseRoundTrip) {
  const Bytes payload{1, 2, 3, 4, 5};
  TcpSegmentSpec s;
  s.src_ip = IpAddress::v4(10, 0, 0, 1);
  s.dst_ip = IpAddress::v4(10, 1, 0, 1);
  s.src_port = 40000;
  s.dst_port = 8080;
  s.seq = 123456;
  s.ack = 99;
  s.flags = tcp_flags::kPsh | tcp_flags::kAck;
  s.payload = payload;
  const Bytes pkt = build_tcp_packet(s);
  const auto seg = parse_tcp_packet(pkt, LinkType::kEthernet);
  ASSERT_TRUE(seg);
  EXPECT_EQ(seg->src_ip, s.src_ip);
  EXPECT_EQ(seg->dst_ip, s.dst_ip);
  EXPECT_EQ(seg->src_port, 40000);
  EXPECT_EQ(seg->dst_port, 8080);
  EXPECT_EQ(seg->seq, 123456u);
  EXPECT_EQ(seg->ack, 99u);
  EXPECT_TRUE(seg->has(tcp_flags::kPsh));
  EXPECT_EQ(Bytes(seg->payload.begin(), seg->payload.end()), payload);
}

TEST(Packet, Ipv6RoundTrip) {
  TcpSegmentSpec s;
  s.src_ip = IpAddress::parse("2001:db8::1");
  s.dst_ip = IpAddress::parse("2001:db8::2");
  s.src_port = 1;
  s.dst_port = 2;
  s.flags = tcp_flags::kSyn;
  const auto seg = parse_tcp_packet(build_tcp_packet(s), LinkType::kEthernet);
  ASSERT_TRUE(seg);
  EXPECT_EQ(seg->src_ip, s.src_ip);
  EXPECT_TRUE(seg->has(tcp_flags::kSyn));
}

TEST(Packet, NonTcpRejected) {
  Bytes arp(42, 0);
  arp[12] = 0x08;
  arp[13] = 0x06;
  EXPECT_FALSE(parse_tcp_packet(arp, LinkType::kEthernet));
  EXPECT_FALSE(parse_tcp_packet(Bytes(10, 0), LinkType::kEthernet));
}

TEST(Pcap, WriteReadRoundTrip) {
  oracle::ConversationBuilder cb("10.0.0.1", 40000);
  cb.handshake(1.0).preface(1.1).client_frame(1.2, Frame::settings_ack()).client_fin(2.5);
  Capture cap;
  cap.packets = cb.packets();
  const Bytes bytes = serialize_pcap(cap);
  std::istringstream in(std::string(bytes.begin(), bytes.end()));
  const Capture back = read_pcap(in);
  ASSERT_EQ(back.packets.size(), cap.packets.size());
  for (std::size_t i = 0; i < cap.packets.size(); ++i) {
    EXPECT_EQ(back.packets[i].ts, cap.packets[i].ts);
    EXPECT_EQ(back.packets[i].data, cap.packets[i].data);
  }
  EXPECT_EQ(back.link, LinkType::kEthernet);
}

TEST(Pcap, BadMagicIsUnreadable) {
  std::istringstream in(std::string(24, 'x'));
  EXPECT_THROW(read_pcap(in), UnreadableInput);
}

TEST(Pcap, MissingFileIsUnreadable) { EXPECT_THROW(read_pcap_file("/nonexistent/x.pcap"), UnreadableInput); }

TEST(Pcap, TruncatedTailIsEndOfFile) {
  oracle::ConversationBuilder cb("10.0.0.1", 40000);
  cb.handshake(1.0).preface(1.1);
  Capture cap;
  cap.packets = cb.packets();
  Bytes bytes = serialize_pcap(cap);
  bytes.resize(bytes.size() - 5);
  std::istringstream in(std::string(bytes.begin(), bytes.end()));
  EXPECT_EQ(read_pcap(in).packets.size(), cap.packets.size() - 1);
}

TEST(Feed, ArbitraryChunkingDecodesEveryRecord) {
  oracle::ConversationBuilder cb("10.0.0.1", 40000);
  cb.handshake(3.25).preface(3.5).client_frame(3.75, Frame::window_update(0, 5)).client_fin(4.0);
  Bytes stream;
  for (const auto& p : cb.packets()) {
    const Bytes r = encode_feed_record(p);
    stream.insert(stream.end(), r.begin(), r.end());
  }
  Rng rng(3);
  FeedDecoder dec;
  std::vector<RawPacket> out;
  std::size_t off = 0;
  while (off < stream.size()) {
    const std::size_t n = std::min<std::size_t>(stream.size() - off, rng.uniform_int(1, 40));
    dec.push(ByteView(stream).subspan(off, n));
    off += n;
    while (auto p = dec.pop()) out.push_back(*p);
  }
  ASSERT_EQ(out.size(), cb.packets().size());
  for (std::size_t i = 0; i < out.size(); ++i) {
    EXPECT_EQ(out[i].ts, cb.packets()[i].ts);
    EXPECT_EQ(out[i].data, cb.packets()[i].data);
  }
  EXPECT_EQ(dec.buffered(), 0u);
}
