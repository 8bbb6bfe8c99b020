#include <gtest/gtest.h>

#include <algorithm>
#include <map>

#include "h2slow/errors.hpp"
#include "h2slow/events.hpp"
#include "h2slow/learning.hpp"
#include "h2slow/sim/scenario.hpp"

using namespace h2slow;
using namespace h2slow::sim;

namespace {

std::multiset<EventSymbol> client_events(const FlowRecord& f) {
  std::multiset<EventSymbol> out;
  for (const auto& it : f.items) {
    if (it.dir != Direction::kClientToServer) continue;
    for (auto s : translate_frame(it.content)) out.insert(s);
  }
  return out;
}

Scenario only(AttackKind k, std::size_t count) {
  Scenario s;
  s.seed = 5;
  s.attacks[k] = count;
  return s;
}

std::size_t count_events(const SimulationResult& r, VictimEvent e) {
  return static_cast<std::size_t>(
      std::count_if(r.victim_log.begin(), r.victim_log.end(), [&](const VictimLogEntry& x) { return x.event == e; }));
}

}  // namespace

TEST(Attacks, ZeroWindowFidelity) {
  const auto r = run_scenario(only(AttackKind::kZeroWindow, 5));
  const auto flows = assemble(r.capture);
  ASSERT_EQ(flows.size(), 5u);
  for (const auto& f : flows) {
    const auto ev = client_events(f);
    EXPECT_TRUE(ev.count(EventKind::kIniWinSizeZero));
    EXPECT_FALSE(ev.count(EventKind::kWinSizeIncrNonZero));
    EXPECT_TRUE(ev.count(EventKind::kPref));
  }
}

TEST(Attacks, IncompleteBodyFidelity) {
  const auto r = run_scenario(only(AttackKind::kIncompleteBody, 5));
  for (const auto& f : assemble(r.capture)) {
    const auto ev = client_events(f);
    EXPECT_TRUE(ev.count(EventKind::kDataNoEs));
    EXPECT_FALSE(ev.count(EventKind::kDataEs));
  }
}

TEST(Attacks, IncompleteHeaderFidelity) {
  const auto r = run_scenario(only(AttackKind::kIncompleteHeader, 5));
  for (const auto& f : assemble(r.capture)) {
    const auto ev = client_events(f);
    EXPECT_TRUE(ev.count(EventKind::kHdrNoEsNoEh) || ev.count(EventKind::kHdrNoEsEh));
    EXPECT_FALSE(ev.count(EventKind::kContinuation));
    EXPECT_FALSE(ev.count(EventKind::kHdrEsEh));
  }
}

TEST(Attacks, PrefaceOnlySendsExactlyThePreface) {
  const auto r = run_scenario(only(AttackKind::kPrefaceOnly, 3));
  for (const auto& f : assemble(r.capture)) {
    const auto ev = client_events(f);
    EXPECT_EQ(ev, (std::multiset<EventSymbol>{EventKind::kPref}));
    std::size_t client_items = 0;
    for (const auto& it : f.items) client_items += it.dir == Direction::kClientToServer;
    EXPECT_EQ(client_items, 1u);
  }
}

TEST(Attacks, UnackedSettingsNeverAcks) {
  const auto r = run_scenario(only(AttackKind::kUnackedSettings, 5));
  for (const auto& f : assemble(r.capture)) {
    const auto ev = client_events(f);
    EXPECT_FALSE(ev.count(EventKind::kSettingsAck));
    EXPECT_TRUE(ev.count(EventKind::kHdrEsEh));
  }
}

TEST(Attacks, AckingKindsAckServerSettings) {
  for (auto k : {AttackKind::kZeroWindow, AttackKind::kIncompleteBody, AttackKind::kIncompleteHeader}) {
    const auto r = run_scenario(only(k, 2));
    for (const auto& f : assemble(r.capture)) EXPECT_TRUE(client_events(f).count(EventKind::kSettingsAck)) << to_string(k);
  }
}

TEST(Attacks, ClosedAtHoldWhenVictimWaitsLonger) {
  Scenario s = only(AttackKind::kPrefaceOnly, 1);
  s.hold = 100.0;
  const auto r = run_scenario(s);
  const auto flows = assemble(r.capture);
  ASSERT_EQ(flows.size(), 1u);
  ASSERT_TRUE(flows[0].closed_at);
  // client FIN reaches the server one latency after hold
  EXPECT_GE(waiting_time(flows[0]), 100.0);
  EXPECT_LT(waiting_time(flows[0]), 100.0 + 2 * s.max_latency);
  EXPECT_EQ(count_events(r, VictimEvent::kExpire), 0u);
}

TEST(Attacks, ParseKind) {
  EXPECT_EQ(parse_attack_kind("3"), AttackKind::kPrefaceOnly);
  EXPECT_EQ(parse_attack_kind("UnackedSettings"), AttackKind::kUnackedSettings);
  EXPECT_THROW(parse_attack_kind("6"), ConfigError);
}

TEST(Victim, QueueExhaustionRejectsBenign) {
  Scenario s;
  s.seed = 3;
  s.attacks[AttackKind::kPrefaceOnly] = 10;
  s.benign = 1;
  s.schedule = Schedule::kAttacksFirst;
  s.victim.queue_capacity = 10;
  s.victim.wait_duration = 5.0;
  s.arrival_interval = 0.1;
  const auto r = run_scenario(s);
  EXPECT_EQ(count_events(r, VictimEvent::kReject), 1u);
  EXPECT_EQ(r.peak_occupancy, 10u);
  const auto& benign = r.reports.back();
  EXPECT_EQ(benign.kind, "benign");
  EXPECT_TRUE(benign.refused);
}

TEST(Victim, PrefaceOnlyExpiresAtWaitDuration) {
  Scenario s = only(AttackKind::kPrefaceOnly, 1);
  s.victim.wait_duration = 360.0;
  s.hold = 1000.0;
  const auto r = run_scenario(s);
  const auto flows = assemble(r.capture);
  ASSERT_EQ(flows.size(), 1u);
  EXPECT_NEAR(waiting_time(flows[0]), 360.0, 1e-6);
  EXPECT_EQ(count_events(r, VictimEvent::kExpire), 1u);
  ASSERT_TRUE(r.reports[0].server_wait);
}

TEST(Victim, HundredPrefaceOnlyCdfStepsAtWait) {
  Scenario s = only(AttackKind::kPrefaceOnly, 100);
  s.hold = 1000.0;
  const auto flows = assemble(run_scenario(s).capture);
  const auto cdf = waiting_time_cdf(flows);
  ASSERT_FALSE(cdf.empty());
  for (const auto& p : cdf) EXPECT_NEAR(p.value, 360.0, 1e-6);
  EXPECT_DOUBLE_EQ(cdf.back().fraction, 1.0);
}

TEST(Victim, BenignCompletesWellBeforeWait) {
  Scenario s;
  s.seed = 9;
  s.benign = 20;
  const auto r = run_scenario(s);
  std::map<std::uint64_t, double> accepted;
  std::map<std::uint64_t, double> first_complete;
  for (const auto& e : r.victim_log) {
    if (e.event == VictimEvent::kAccept) accepted[e.conn] = e.t;
    if (e.event == VictimEvent::kComplete && !first_complete.count(e.conn)) first_complete[e.conn] = e.t;
  }
  EXPECT_EQ(first_complete.size(), 20u);
  for (const auto& [c, t] : first_complete) EXPECT_LT(t - accepted.at(c), 5.0);
  EXPECT_EQ(count_events(r, VictimEvent::kExpire), 0u);
}

TEST(Victim, OccupancyNeverExceedsQueue) {
  Scenario s;
  s.seed = 4;
  s.benign = 60;
  s.attacks[AttackKind::kIncompleteHeader] = 20;
  s.victim.queue_capacity = 15;
  s.victim.wait_duration = 30;
  s.arrival_interval = 0.05;
  const auto r = run_scenario(s);
  EXPECT_LE(r.peak_occupancy, 15u);
  EXPECT_GT(count_events(r, VictimEvent::kReject), 0u);
}

TEST(Benign, DelaysBoundedByProfile) {
  Scenario s;
  s.seed = 12;
  s.benign = 200;
  const auto flows = assemble(run_scenario(s).capture);
  const auto m = learn(flows, 5);
  double worst = 0.0;
  for (const auto& [k, v] : m.delay.entries()) {
    if (!k.second.is_star()) worst = std::max(worst, v);
  }
  // think time may follow a gap (WINDOW_UPDATE or PING first), and the
  // response it reacts to is a server event one round trip earlier
  EXPECT_LE(worst, s.profile.max_gap + s.profile.max_think + 2 * s.max_latency + 1e-6);
  EXPECT_GT(worst, s.profile.min_think);
}

TEST(Benign, PostBodiesEndTheStream) {
  Scenario s;
  s.seed = 13;
  s.benign = 100;
  std::size_t posts = 0;
  for (const auto& f : assemble(run_scenario(s).capture)) {
    const auto seq = build_sequence(f).symbols();
    EXPECT_EQ(seq.back(), EventSymbol(EventKind::kEnd));
    bool open_body = false;
    for (auto sym : seq) {
      if (sym == EventSymbol(EventKind::kHdrNoEsEh)) {
        ++posts;
        open_body = true;
      }
      if (sym == EventSymbol(EventKind::kDataEs)) open_body = false;
    }
    EXPECT_FALSE(open_body);
  }
  EXPECT_GT(posts, 0u);
}

TEST(Scenario, VirtualRunsAreDeterministic) {
  Scenario s;
  s.seed = 21;
  s.benign = 30;
  s.attacks[AttackKind::kZeroWindow] = 3;
  s.attacks[AttackKind::kUnackedSettings] = 3;
  const auto a = run_scenario(s);
  const auto b = run_scenario(s);
  EXPECT_EQ(serialize_pcap(a.capture), serialize_pcap(b.capture));
  EXPECT_EQ(a.labels, b.labels);
  EXPECT_EQ(format_victim_log(a.victim_log), format_victim_log(b.victim_log));
  s.seed = 22;
  EXPECT_NE(serialize_pcap(run_scenario(s).capture), serialize_pcap(a.capture));
}

TEST(Scenario, LabelsCoverEveryConnection) {
  Scenario s;
  s.seed = 2;
  s.benign = 500;
  for (auto k : kAllAttackKinds) s.attacks[k] = 20;
  const auto r = run_scenario(s);
  EXPECT_EQ(r.labels.size(), 600u);
  std::size_t attacks = 0;
  for (const auto& [k, g] : r.labels) attacks += g == GroundTruth::kAttack;
  EXPECT_EQ(attacks, 100u);
  EXPECT_EQ(assemble(r.capture).size(), 600u);
}

TEST(Scenario, RealSocketsSmallRun) {
  Scenario s;
  s.seed = 6;
  s.benign = 2;
  s.attacks[AttackKind::kPrefaceOnly] = 1;
  s.clock = ClockMode::kReal;
  s.hold = 0.6;
  s.arrival_interval = 0.05;
  s.victim.listen_port = 0;
  s.victim.wait_duration = 30;
  s.profile.max_think = 0.3;
  s.profile.min_think = 0.1;
  s.profile.max_gap = 0.05;
  s.profile.max_requests = 2;
  const auto r = run_scenario(s);
  EXPECT_EQ(r.reports.size(), 3u);
  EXPECT_EQ(r.labels.size(), 3u);
  const auto flows = assemble(r.capture);
  EXPECT_EQ(flows.size(), 3u);
  for (const auto& f : flows) {
    EXPECT_TRUE(f.closed_at);
    EXPECT_TRUE(r.labels.count(f.key));
  }
}
