#include <benchmark/benchmark.h>

#include "h2slow/detection.hpp"
#include "h2slow/frame.hpp"
#include "h2slow/learning.hpp"
#include "h2slow/pipeline.hpp"
#include "h2slow/rng.hpp"
#include "h2slow/sim/scenario.hpp"

using namespace h2slow;

namespace {

std::vector<EventSymbol> random_symbols(std::size_t len, std::uint64_t seed) {
  const auto alphabet = base_alphabet();
  Rng rng(seed);
  std::vector<EventSymbol> out(len);
  for (auto& s : out) s = alphabet[rng.uniform_int(0, alphabet.size() - 1)];
  return out;
}

void BM_ExtractPairs(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const auto seq = random_symbols(static_cast<std::size_t>(state.range(1)), 1);
  for (auto _ : state) benchmark::DoNotOptimize(extract_lookahead_pairs(seq, n));
  state.SetItemsProcessed(state.iterations() * state.range(1));
}
BENCHMARK(BM_ExtractPairs)->ArgsProduct({{3, 5, 7, 9}, {25, 100, 400}});

void BM_FrameDecode(benchmark::State& state) {
  Bytes wire;
  for (int i = 0; i < 64; ++i) {
    encode_frame_into(Frame::headers(static_cast<std::uint32_t>(2 * i + 1), Bytes(40, 0x82), true, true), wire);
    encode_frame_into(Frame::window_update(0, 1000), wire);
    encode_frame_into(Frame::data(static_cast<std::uint32_t>(2 * i + 1), Bytes(512, 0x61), true), wire);
  }
  for (auto _ : state) {
    ByteView rest(wire);
    std::size_t frames = 0;
    while (!rest.empty()) {
      const auto r = decode_frame(rest);
      const auto& d = std::get<Decoded>(r);
      rest = rest.subspan(d.consumed);
      ++frames;
    }
    benchmark::DoNotOptimize(frames);
  }
  state.SetBytesProcessed(state.iterations() * static_cast<std::int64_t>(wire.size()));
}
BENCHMARK(BM_FrameDecode);

struct Fixture {
  Capture eval;
  DetectorConfig cfg;
  Fixture() {
    sim::Scenario train;
    train.seed = 1;
    train.benign = 200;
    const auto model = learn(assemble(sim::run_scenario(train).capture), 5);
    sim::Scenario s;
    s.seed = 2;
    s.benign = 100;
    for (auto k : sim::kAllAttackKinds) s.attacks[k] = 20;
    eval = sim::run_scenario(s).capture;
    cfg.lookahead = std::make_shared<LookaheadDb>(model.lookahead);
    cfg.delay = std::make_shared<DelayDb>(model.delay);
    cfg.record_trace = false;
  }
};

void BM_DetectCapture(benchmark::State& state) {
  static const Fixture fx;
  for (auto _ : state) benchmark::DoNotOptimize(detect_capture(fx.eval, fx.cfg));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(fx.eval.packets.size()));
}
BENCHMARK(BM_DetectCapture)->Unit(benchmark::kMillisecond);

}  // namespace
BENCHMARK_MAIN();
