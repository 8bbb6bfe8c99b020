#include <gtest/gtest.h>

#include "h2slow/errors.hpp"
#include "h2slow/metrics.hpp"

using namespace h2slow;

namespace {

LabeledVerdict lv(GroundTruth g, Label l, double latency = 0.0) {
  LabeledVerdict x;
  x.truth = g;
  x.verdict.label = l;
  x.verdict.latency = latency;
  return x;
}

}  // namespace

TEST(Confusion, Basic) {
  const std::vector<LabeledVerdict> v{
      lv(GroundTruth::kAttack, Label::kAnomalous), lv(GroundTruth::kAttack, Label::kAnomalous),
      lv(GroundTruth::kBenign, Label::kNormal), lv(GroundTruth::kBenign, Label::kNormal)};
  EXPECT_EQ(confusion(v), (ConfusionCounts{2, 0, 2, 0}));
}

TEST(Confusion, AllMissed) {
  const std::vector<LabeledVerdict> v(5, lv(GroundTruth::kAttack, Label::kNormal));
  const auto c = confusion(v);
  EXPECT_EQ(c.fn, c.total());
}

TEST(Confusion, MatchesIndependentTally) {
  std::vector<LabeledVerdict> v;
  std::uint64_t tp = 0, fp = 0, tn = 0, fn = 0;
  for (int i = 0; i < 500; ++i) {
    const bool attack = (i * 7) % 3 == 0;
    const bool flagged = (i * 11) % 5 < 2;
    v.push_back(lv(attack ? GroundTruth::kAttack : GroundTruth::kBenign, flagged ? Label::kAnomalous : Label::kNormal));
    if (attack && flagged) ++tp;
    if (!attack && flagged) ++fp;
    if (!attack && !flagged) ++tn;
    if (attack && !flagged) ++fn;
  }
  EXPECT_EQ(confusion(v), (ConfusionCounts{tp, fp, tn, fn}));
}

TEST(Summarize, HandCounts) {
  const auto s = summarize({9, 1, 89, 1});
  EXPECT_NEAR(*s.accuracy, 98.0, 1e-9);
  EXPECT_NEAR(*s.fpr, 100.0 / 90.0, 1e-9);
  EXPECT_NEAR(*s.recall, 90.0, 1e-9);
  EXPECT_NEAR(*s.precision, 90.0, 1e-9);
  EXPECT_EQ(format_percent(s.fpr), "1.11");
}

TEST(Summarize, UndefinedIsNa) {
  const auto s = summarize({0, 0, 0, 4});
  EXPECT_FALSE(s.precision);
  EXPECT_FALSE(s.fpr);
  EXPECT_EQ(format_percent(s.precision), "NA");
  EXPECT_EQ(*s.recall, 0.0);
  const auto csv = metrics_csv({0, 0, 0, 4}, s);
  EXPECT_NE(csv.find("precision,NA"), std::string::npos);
  EXPECT_EQ(csv.rfind("metric,value\n", 0), 0u);
}

TEST(Summarize, ScaleInvariant) {
  const ConfusionCounts base{3225, 35, 2014, 0};
  const auto a = summarize(base);
  for (std::uint64_t c : {2u, 7u, 1000u}) {
    const auto b = summarize({base.tp * c, base.fp * c, base.tn * c, base.fn * c});
    EXPECT_NEAR(*a.accuracy, *b.accuracy, 1e-9);
    EXPECT_NEAR(*a.fpr, *b.fpr, 1e-9);
    EXPECT_NEAR(*a.recall, *b.recall, 1e-9);
    EXPECT_NEAR(*a.precision, *b.precision, 1e-9);
  }
  EXPECT_EQ(format_percent(a.recall), "100.00");
  EXPECT_EQ(format_percent(a.fpr), "1.71");
}

TEST(LatencyCdf, OverAnomalousOnly) {
  std::vector<Verdict> v(4);
  v[0].label = Label::kAnomalous;
  v[0].latency = 2.0;
  v[1].label = Label::kNormal;
  v[1].latency = 99.0;
  v[2].label = Label::kAnomalous;
  v[2].latency = 1.0;
  v[3].label = Label::kAnomalous;
  v[3].latency = 2.0;
  const auto c = latency_cdf(v);
  ASSERT_EQ(c.size(), 2u);
  EXPECT_DOUBLE_EQ(c[0].value, 1.0);
  EXPECT_NEAR(c[0].fraction, 1.0 / 3.0, 1e-12);
  EXPECT_DOUBLE_EQ(c[1].fraction, 1.0);
  std::vector<Verdict> none(2);
  EXPECT_THROW(latency_cdf(none), NoAnomalies);
}

TEST(Labels, ParseFormatJoin) {
  const std::string text =
      "flowkey,label\n10.0.0.1:1->10.1.0.1:8080,benign\n10.2.0.1:2->10.1.0.1:8080,attack\n";
  const LabelMap m = parse_labels(text);
  ASSERT_EQ(m.size(), 2u);
  EXPECT_EQ(parse_labels(format_labels(m)), m);
  EXPECT_THROW(parse_labels("10.0.0.1:1->10.1.0.1:8080,maybe\n"), InputError);

  std::vector<Verdict> v(3);
  v[0].flow = FlowKey::parse("10.0.0.1:1->10.1.0.1:8080");
  v[1].flow = FlowKey::parse("10.2.0.1:2->10.1.0.1:8080");
  v[2].flow = FlowKey::parse("10.9.9.9:3->10.1.0.1:8080");
  std::size_t unlabeled = 0;
  const auto j = join_labels(v, m, &unlabeled);
  EXPECT_EQ(j.size(), 2u);
  EXPECT_EQ(unlabeled, 1u);
  EXPECT_EQ(j[1].truth, GroundTruth::kAttack);
}

TEST(Timing, MonotoneCheck) {
  const std::vector<TimingRow> up{{3, 100, 1.0}, {5, 100, 2.0}, {3, 10, 0.5}, {5, 10, 0.5}};
  EXPECT_TRUE(timing_monotone_in_n(up));
  const std::vector<TimingRow> down{{3, 100, 2.0}, {5, 100, 1.0}};
  EXPECT_FALSE(timing_monotone_in_n(down));
  EXPECT_TRUE(timing_monotone_in_n(down, 1.5));
  EXPECT_EQ(timing_csv(up).rfind("n,length,mean_us\n", 0), 0u);
}

TEST(Timing, ShortSequencesYieldRows) {
  const std::vector<std::size_t> ns{3, 9};
  const std::vector<std::size_t> lens{2, 200};
  const auto rows = extraction_timing(ns, lens, 20, 2, 1);
  ASSERT_EQ(rows.size(), 4u);
  for (const auto& r : rows) EXPECT_GE(r.mean_us, 0.0);
}

TEST(CpuSampler, Samples) {
  std::atomic<int> calls{0};
  {
    CpuSampler s(0.02, [&](double, double pct) {
      EXPECT_GE(pct, 0.0);
      ++calls;
    });
    std::this_thread::sleep_for(std::chrono::milliseconds(120));
  }
  EXPECT_GE(calls.load(), 2);
  EXPECT_GE(process_cpu_seconds(), 0.0);
}
