#pragma once

// Evaluation quantities over labeled verdicts.

#include <condition_variable>
#include <cstdint>
#include <functional>
#include <map>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <thread>
#include <vector>

#include "h2slow/detection.hpp"
#include "h2slow/flow.hpp"

namespace h2slow {

enum class GroundTruth : std::uint8_t { kBenign, kAttack };

std::string to_string(GroundTruth g);

struct LabeledVerdict {
  Verdict verdict;
  GroundTruth truth = GroundTruth::kBenign;
};

struct ConfusionCounts {
  std::uint64_t tp = 0;
  std::uint64_t fp = 0;
  std::uint64_t tn = 0;
  std::uint64_t fn = 0;

  std::uint64_t total() const { return tp + fp + tn + fn; }
  bool operator==(const ConfusionCounts&) const = default;
};

ConfusionCounts confusion(std::span<const LabeledVerdict> verdicts);

// Percentages; nullopt where the denominator is zero.
struct MetricSummary {
  std::optional<double> accuracy;
  std::optional<double> fpr;
  std::optional<double> recall;
  std::optional<double> precision;
};

MetricSummary summarize(const ConfusionCounts& c);

// "12.34" or "NA"
std::string format_percent(std::optional<double> value);

// metric,value rows: tp, fp, tn, fn, accuracy, fpr, recall, precision
std::string metrics_csv(const ConfusionCounts& c, const MetricSummary& s);

// CDF of latency over anomalous verdicts. Throws NoAnomalies.
std::vector<CdfPoint> latency_cdf(std::span<const Verdict> verdicts);

using LabelMap = std::map<FlowKey, GroundTruth>;

// "flowkey,label" with label benign|attack; an optional header line is skipped.
LabelMap parse_labels(std::string_view text);
std::string format_labels(const LabelMap& labels);

// Verdicts without a label are dropped and counted in `unlabeled`.
std::vector<LabeledVerdict> join_labels(std::span<const Verdict> verdicts, const LabelMap& labels,
                                        std::size_t* unlabeled = nullptr);

struct TimingRow {
  std::size_t n = 0;
  std::size_t length = 0;
  double mean_us = 0.0;
};

// Mean wall time of extract_lookahead_pairs on random sequences, per (n, length).
// Each cell takes the fastest of `batches` batch means to damp scheduler noise.
std::vector<TimingRow> extraction_timing(std::span<const std::size_t> ns,
                                         std::span<const std::size_t> lengths,
                                         std::size_t reps = 200, std::size_t batches = 5,
                                         std::uint64_t seed = 1);

std::string timing_csv(std::span<const TimingRow> rows);

// True when, for every length, mean_us does not drop as n grows by more than
// `rel_tolerance` of the smaller value.
bool timing_monotone_in_n(std::span<const TimingRow> rows, double rel_tolerance = 0.0);

// Samples process CPU usage (user+system over wall) every `interval` on a
// background thread.
class CpuSampler {
 public:
  using Callback = std::function<void(double elapsed_s, double cpu_percent)>;

  CpuSampler(double interval_s, Callback cb);
  ~CpuSampler();
  CpuSampler(const CpuSampler&) = delete;
  CpuSampler& operator=(const CpuSampler&) = delete;

  void stop();

 private:
  std::mutex mu_;
  std::condition_variable cv_;
  bool stop_ = false;
  std::thread worker_;
};

double process_cpu_seconds();

}  // namespace h2slow
