#include "h2slow/sim/frame_reader.hpp"

#include <algorithm>

namespace h2slow::sim {

std::optional<FlowContent> FrameReader::next() {
  if (failed_) return std::nullopt;
  const ByteView avail = ByteView(buf_).subspan(off_);
  if (want_preface_) {
    const std::size_t n = std::min(avail.size(), kConnectionPreface.size());
    if (!std::equal(avail.begin(), avail.begin() + static_cast<std::ptrdiff_t>(n), kConnectionPreface.begin())) {
      failed_ = true;
      return std::nullopt;
    }
    if (n < kConnectionPreface.size()) return std::nullopt;
    off_ += n;
    want_preface_ = false;
    return FlowContent{PrefaceMarker{}};
  }
  auto r = decode_frame(avail);
  if (auto* d = std::get_if<Decoded>(&r)) {
    off_ += d->consumed;
    if (off_ > 65536 && off_ * 2 > buf_.size()) {
      buf_.erase(buf_.begin(), buf_.begin() + static_cast<std::ptrdiff_t>(off_));
      off_ = 0;
    }
    return FlowContent{std::move(d->frame)};
  }
  if (std::holds_alternative<Malformed>(r)) failed_ = true;
  return std::nullopt;
}

}  // namespace h2slow::sim
