#pragma once

// Glue: packets -> flow assembler -> event groups -> detector.

#include <functional>
#include <vector>

#include "h2slow/detection.hpp"
#include "h2slow/flow.hpp"
#include "h2slow/pcap.hpp"

namespace h2slow {

// FlowSink that translates items into event groups and drives a Detector.
class DetectionSink : public FlowSink {
 public:
  explicit DetectionSink(Detector& detector) : detector_(detector) {}

  void on_established(const FlowKey& key, double t, bool handshake_seen) override;
  void on_item(const FlowKey& key, const FlowItem& item) override;
  void on_closed(const FlowKey& key, double t, CloseKind kind, bool reassembly_gap) override;

 private:
  Detector& detector_;
};

// Owns the assembler/detector pair for a packet stream (pcap or live feed).
class DetectionPipeline {
 public:
  DetectionPipeline(const DetectorConfig& cfg, Detector::VerdictFn on_verdict,
                    LinkType link = LinkType::kEthernet);

  void feed(const RawPacket& packet);
  // Lets timers fire without traffic (live mode).
  void tick(double now) { detector_.advance_to(now); }
  // Flushes open connections and undecided flows at the last packet time.
  void finish();

  const Detector& detector() const { return detector_; }
  const AssemblerStats& assembler_stats() const { return assembler_.stats(); }

 private:
  Detector detector_;
  DetectionSink sink_;
  FlowAssembler assembler_;
};

std::vector<Verdict> detect_capture(const Capture& capture, const DetectorConfig& cfg,
                                    AssemblerStats* stats = nullptr);

}  // namespace h2slow
