#pragma once

#include <optional>

#include "h2slow/flow.hpp"
#include "h2slow/frame.hpp"

namespace h2slow::sim {

// Incremental frame reader for one direction of an HTTP/2 connection. The
// client-to-server direction starts with the connection preface.
class FrameReader {
 public:
  explicit FrameReader(bool expect_preface) : want_preface_(expect_preface) {}

  void push(ByteView bytes) { append(buf_, bytes); }

  // Next preface marker or frame; nullopt when more bytes are needed or the
  // stream is broken (see failed()).
  std::optional<FlowContent> next();

  bool failed() const { return failed_; }

 private:
  Bytes buf_;
  std::size_t off_ = 0;
  bool want_preface_;
  bool failed_ = false;
};

}  // namespace h2slow::sim
