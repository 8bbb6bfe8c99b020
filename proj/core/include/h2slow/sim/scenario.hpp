#pragma once

// Seeded scenario runs: victim + generators on the virtual network (or on
// loopback sockets in real time), producing a capture and ground truth.

#include <cstdint>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "h2slow/metrics.hpp"
#include "h2slow/pcap.hpp"
#include "h2slow/sim/clients.hpp"
#include "h2slow/sim/victim.hpp"

namespace h2slow::sim {

enum class ClockMode : std::uint8_t { kVirtual, kReal };

enum class Schedule : std::uint8_t {
  kShuffled,      // kinds interleaved at random
  kAttacksFirst,  // every attack connection, then the benign ones
};

struct Scenario {
  std::uint64_t seed = 1;
  std::size_t benign = 0;
  std::map<AttackKind, std::size_t> attacks;
  VictimConfig victim{10000, 360.0, 8080};
  BenignProfile profile;
  double hold = 100.0;             // attack connections close this long after establishment
  double arrival_interval = 0.25;  // seconds between connection attempts
  double min_latency = 0.001;      // one-way, seconds
  double max_latency = 0.040;
  ClockMode clock = ClockMode::kVirtual;
  Schedule schedule = Schedule::kShuffled;

  std::size_t total_connections() const;
  void validate() const;  // throws ScenarioInvalid
};

// JSON object; every field optional except that at least one connection is
// requested. Throws ScenarioInvalid.
Scenario parse_scenario(std::string_view json_text);
std::string scenario_to_json(const Scenario& s);

struct SimulationResult {
  Capture capture;
  LabelMap labels;                      // every attempted connection
  std::map<FlowKey, std::string> kinds;  // "benign" or attack name
  std::vector<VictimLogEntry> victim_log;
  std::vector<ConnReport> reports;
  std::size_t peak_occupancy = 0;
};

SimulationResult run_scenario(const Scenario& s);

// Writes capture.pcap, labels.csv, victim.log and summary.csv into `dir`.
void write_simulation(const SimulationResult& r, const std::string& dir);

}  // namespace h2slow::sim
