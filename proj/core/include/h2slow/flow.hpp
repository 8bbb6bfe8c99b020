#pragma once

// Per-connection reconstruction of HTTP/2 frame streams from TCP packets.

#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <variant>
#include <vector>

#include "h2slow/frame.hpp"
#include "h2slow/packet.hpp"
#include "h2slow/pcap.hpp"

namespace h2slow {

// Oriented client -> server (the SYN sender is the client).
struct FlowKey {
  IpAddress src_ip;
  std::uint16_t src_port = 0;
  IpAddress dst_ip;
  std::uint16_t dst_port = 0;

  auto operator<=>(const FlowKey&) const = default;

  // "10.0.0.1:5000->10.1.0.1:8080"; IPv6 hosts are bracketed.
  std::string to_string() const;
  static FlowKey parse(std::string_view text);
};

struct FlowKeyHash {
  std::size_t operator()(const FlowKey& k) const noexcept;
};

enum class Direction : std::uint8_t { kClientToServer, kServerToClient };

struct PrefaceMarker {
  bool operator==(const PrefaceMarker&) const = default;
};

using FlowContent = std::variant<Frame, PrefaceMarker>;

struct FlowItem {
  double t = 0.0;
  Direction dir = Direction::kClientToServer;
  FlowContent content;
};

enum class CloseKind : std::uint8_t { kFin, kRst, kCaptureEnd };

std::string to_string(CloseKind kind);

struct FlowRecord {
  FlowKey key;
  double established_at = 0.0;
  std::optional<double> closed_at;
  std::vector<FlowItem> items;
  CloseKind close_kind = CloseKind::kCaptureEnd;
  bool handshake_seen = true;
  bool reassembly_gap = false;
};

// Receives lifecycle callbacks in capture order. For a given key the order is
// always established, items..., closed.
class FlowSink {
 public:
  virtual ~FlowSink() = default;
  virtual void on_established(const FlowKey& key, double t, bool handshake_seen) = 0;
  virtual void on_item(const FlowKey& key, const FlowItem& item) = 0;
  // CaptureEnd is reported from finish(); t is then the last packet time.
  virtual void on_closed(const FlowKey& key, double t, CloseKind kind, bool reassembly_gap) = 0;
};

struct AssemblerStats {
  std::size_t packets = 0;
  std::size_t non_tcp = 0;
  std::size_t flows = 0;
  std::size_t refused = 0;  // SYN seen, never established
  std::size_t reassembly_gaps = 0;
  std::size_t malformed_streams = 0;
  std::size_t duplicate_segments = 0;
  std::size_t post_close_payloads = 0;
};

// Single-writer state machine over one packet source.
class FlowAssembler {
 public:
  explicit FlowAssembler(FlowSink& sink, LinkType link = LinkType::kEthernet);
  ~FlowAssembler();
  FlowAssembler(const FlowAssembler&) = delete;
  FlowAssembler& operator=(const FlowAssembler&) = delete;

  void feed(const RawPacket& packet);
  // Flushes still-open connections as capture-end.
  void finish();

  const AssemblerStats& stats() const { return stats_; }
  double last_packet_time() const { return last_t_; }

 private:
  struct Connection;
  struct TupleHash {
    std::size_t operator()(const FlowKey& k) const noexcept { return FlowKeyHash{}(k); }
  };

  void close(Connection& c, double t, CloseKind kind);
  void deliver(Connection& c, Direction dir, ByteView bytes, double t);

  FlowSink& sink_;
  LinkType link_;
  AssemblerStats stats_;
  double last_t_ = 0.0;
  std::uint64_t next_order_ = 0;
  // Keyed by the canonical (ordered) 4-tuple.
  std::unordered_map<FlowKey, std::unique_ptr<Connection>, TupleHash> conns_;
};

// Collects sink callbacks into FlowRecords, in order of establishment.
class FlowRecordCollector : public FlowSink {
 public:
  void on_established(const FlowKey& key, double t, bool handshake_seen) override;
  void on_item(const FlowKey& key, const FlowItem& item) override;
  void on_closed(const FlowKey& key, double t, CloseKind kind, bool reassembly_gap) override;

  std::vector<FlowRecord> take();

 private:
  std::vector<FlowRecord> records_;
  std::map<FlowKey, std::size_t> open_;
};

std::vector<FlowRecord> assemble(const Capture& capture, AssemblerStats* stats = nullptr);

// closed_at - established_at. Throws StillOpen for flows without closed_at.
double waiting_time(const FlowRecord& flow);

struct CdfPoint {
  double value = 0.0;
  double fraction = 0.0;
};

// Empirical CDF with one point per distinct value. Throws NoClosedFlows.
std::vector<CdfPoint> waiting_time_cdf(std::span<const FlowRecord> flows);

// Shared helper: CDF of arbitrary samples (empty input gives an empty curve).
std::vector<CdfPoint> empirical_cdf(std::vector<double> samples);

std::string cdf_to_csv(std::span<const CdfPoint> cdf, const std::string& value_column);

}  // namespace h2slow
