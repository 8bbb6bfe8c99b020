#include "h2slow/metrics.hpp"

#include <sys/resource.h>

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <sstream>

#include "h2slow/errors.hpp"
#include "h2slow/rng.hpp"

namespace h2slow {

std::string to_string(GroundTruth g) { return g == GroundTruth::kAttack ? "attack" : "benign"; }

ConfusionCounts confusion(std::span<const LabeledVerdict> verdicts) {
  ConfusionCounts c;
  for (const auto& lv : verdicts) {
    const bool flagged = lv.verdict.label == Label::kAnomalous;
    if (lv.truth == GroundTruth::kAttack) {
      ++(flagged ? c.tp : c.fn);
    } else {
      ++(flagged ? c.fp : c.tn);
    }
  }
  return c;
}

namespace {

std::optional<double> ratio(std::uint64_t num, std::uint64_t den) {
  if (den == 0) return std::nullopt;
  return 100.0 * static_cast<double>(num) / static_cast<double>(den);
}

}  // namespace

MetricSummary summarize(const ConfusionCounts& c) {
  return MetricSummary{ratio(c.tp + c.tn, c.total()), ratio(c.fp, c.fp + c.tn),
                       ratio(c.tp, c.tp + c.fn), ratio(c.tp, c.tp + c.fp)};
}

std::string format_percent(std::optional<double> value) {
  if (!value) return "NA";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", *value);
  return buf;
}

std::string metrics_csv(const ConfusionCounts& c, const MetricSummary& s) {
  std::ostringstream os;
  os << "metric,value\n"
     << "tp," << c.tp << '\n'
     << "fp," << c.fp << '\n'
     << "tn," << c.tn << '\n'
     << "fn," << c.fn << '\n'
     << "accuracy," << format_percent(s.accuracy) << '\n'
     << "fpr," << format_percent(s.fpr) << '\n'
     << "recall," << format_percent(s.recall) << '\n'
     << "precision," << format_percent(s.precision) << '\n';
  return os.str();
}

std::vector<CdfPoint> latency_cdf(std::span<const Verdict> verdicts) {
  std::vector<double> samples;
  for (const auto& v : verdicts) {
    if (v.label == Label::kAnomalous) samples.push_back(v.latency);
  }
  if (samples.empty()) throw NoAnomalies();
  return empirical_cdf(std::move(samples));
}

LabelMap parse_labels(std::string_view text) {
  LabelMap out;
  std::size_t line_no = 0;
  while (!text.empty()) {
    const auto nl = text.find('\n');
    std::string_view line = text.substr(0, nl);
    text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
    ++line_no;
    while (!line.empty() && (line.back() == '\r' || line.back() == ' ')) line.remove_suffix(1);
    if (line.empty()) continue;
    const auto comma = line.rfind(',');
    if (comma == std::string_view::npos) {
      throw InputError("labels line " + std::to_string(line_no) + ": missing comma");
    }
    const auto key_text = line.substr(0, comma);
    const auto label = line.substr(comma + 1);
    if (line_no == 1 && key_text == "flowkey") continue;
    GroundTruth g;
    if (label == "benign") {
      g = GroundTruth::kBenign;
    } else if (label == "attack") {
      g = GroundTruth::kAttack;
    } else {
      throw InputError("labels line " + std::to_string(line_no) + ": unknown label '" +
                       std::string(label) + "'");
    }
    out[FlowKey::parse(key_text)] = g;
  }
  return out;
}

std::string format_labels(const LabelMap& labels) {
  std::string out = "flowkey,label\n";
  for (const auto& [k, g] : labels) out += k.to_string() + "," + to_string(g) + "\n";
  return out;
}

std::vector<LabeledVerdict> join_labels(std::span<const Verdict> verdicts, const LabelMap& labels,
                                        std::size_t* unlabeled) {
  std::vector<LabeledVerdict> out;
  std::size_t missing = 0;
  for (const auto& v : verdicts) {
    auto it = labels.find(v.flow);
    if (it == labels.end()) {
      ++missing;
      continue;
    }
    out.push_back({v, it->second});
  }
  if (unlabeled) *unlabeled = missing;
  return out;
}

std::vector<TimingRow> extraction_timing(std::span<const std::size_t> ns,
                                         std::span<const std::size_t> lengths, std::size_t reps,
                                         std::size_t batches, std::uint64_t seed) {
  using Clock = std::chrono::steady_clock;
  const auto alphabet = base_alphabet();
  Rng rng(seed);
  std::vector<TimingRow> rows;
  reps = std::max<std::size_t>(reps, 1);
  batches = std::max<std::size_t>(batches, 1);
  for (const std::size_t length : lengths) {
    std::vector<std::vector<EventSymbol>> inputs(reps);
    for (auto& seq : inputs) {
      seq.resize(length);
      for (auto& s : seq) s = alphabet[rng.uniform_int(0, alphabet.size() - 1)];
    }
    for (const std::size_t n : ns) {
      double best = -1.0;
      std::size_t sink = 0;
      for (std::size_t b = 0; b < batches; ++b) {
        const auto start = Clock::now();
        for (const auto& seq : inputs) sink += extract_lookahead_pairs(seq, n).size();
        const auto us = std::chrono::duration<double, std::micro>(Clock::now() - start).count();
        const double mean = us / static_cast<double>(reps);
        if (best < 0 || mean < best) best = mean;
      }
      // keep the work observable
      if (sink == static_cast<std::size_t>(-1)) best += 1;
      rows.push_back({n, length, best});
    }
  }
  return rows;
}

std::string timing_csv(std::span<const TimingRow> rows) {
  std::ostringstream os;
  os << "n,length,mean_us\n";
  for (const auto& r : rows) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.3f", r.mean_us);
    os << r.n << ',' << r.length << ',' << buf << '\n';
  }
  return os.str();
}

bool timing_monotone_in_n(std::span<const TimingRow> rows, double rel_tolerance) {
  std::map<std::size_t, std::vector<TimingRow>> by_length;
  for (const auto& r : rows) by_length[r.length].push_back(r);
  for (auto& [len, v] : by_length) {
    std::sort(v.begin(), v.end(), [](const TimingRow& a, const TimingRow& b) { return a.n < b.n; });
    for (std::size_t i = 1; i < v.size(); ++i) {
      if (v[i].mean_us < v[i - 1].mean_us * (1.0 - rel_tolerance)) return false;
    }
  }
  return true;
}

double process_cpu_seconds() {
  rusage ru{};
  getrusage(RUSAGE_SELF, &ru);
  auto secs = [](const timeval& tv) { return static_cast<double>(tv.tv_sec) + tv.tv_usec / 1e6; };
  return secs(ru.ru_utime) + secs(ru.ru_stime);
}

CpuSampler::CpuSampler(double interval_s, Callback cb) {
  worker_ = std::thread([this, interval_s, cb = std::move(cb)] {
    using Clock = std::chrono::steady_clock;
    const auto begin = Clock::now();
    auto prev_wall = begin;
    double prev_cpu = process_cpu_seconds();
    const auto step = std::chrono::duration_cast<Clock::duration>(std::chrono::duration<double>(interval_s));
    std::unique_lock lock(mu_);
    while (!cv_.wait_for(lock, step, [this] { return stop_; })) {
      const auto now = Clock::now();
      const double cpu = process_cpu_seconds();
      const double wall = std::chrono::duration<double>(now - prev_wall).count();
      const double pct = wall > 0 ? 100.0 * (cpu - prev_cpu) / wall : 0.0;
      cb(std::chrono::duration<double>(now - begin).count(), pct);
      prev_wall = now;
      prev_cpu = cpu;
    }
  });
}

CpuSampler::~CpuSampler() { stop(); }

void CpuSampler::stop() {
  {
    std::lock_guard lock(mu_);
    stop_ = true;
  }
  cv_.notify_all();
  if (worker_.joinable()) worker_.join();
}

}  // namespace h2slow
