#include "h2slow/pipeline.hpp"

namespace h2slow {

void DetectionSink::on_established(const FlowKey& key, double t, bool) {
  detector_.on_start(key, t);
}

void DetectionSink::on_item(const FlowKey& key, const FlowItem& item) {
  const auto group = translate_frame(item.content);
  if (group.empty()) {
    detector_.advance_to(item.t);
    return;
  }
  detector_.on_group(key, group, item.t);
}

void DetectionSink::on_closed(const FlowKey& key, double t, CloseKind kind, bool) {
  if (kind == CloseKind::kCaptureEnd) {
    detector_.advance_to(t);
    return;
  }
  detector_.on_end(key, t);
}

DetectionPipeline::DetectionPipeline(const DetectorConfig& cfg, Detector::VerdictFn on_verdict,
                                     LinkType link)
    : detector_(cfg, std::move(on_verdict)), sink_(detector_), assembler_(sink_, link) {}

void DetectionPipeline::feed(const RawPacket& packet) {
  detector_.advance_to(to_seconds(packet.ts));
  assembler_.feed(packet);
}

void DetectionPipeline::finish() {
  assembler_.finish();
  const double t = assembler_.last_packet_time();
  detector_.advance_to(t);
  detector_.finish(t);
}

std::vector<Verdict> detect_capture(const Capture& capture, const DetectorConfig& cfg,
                                    AssemblerStats* stats) {
  std::vector<Verdict> out;
  DetectionPipeline pipe(cfg, [&](const Verdict& v) { out.push_back(v); }, capture.link);
  for (const auto& p : capture.packets) pipe.feed(p);
  pipe.finish();
  if (stats) *stats = pipe.assembler_stats();
  return out;
}

}  // namespace h2slow
