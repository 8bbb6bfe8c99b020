#include "h2slow/sim/scenario.hpp"

#include <filesystem>
#include <json.hpp>

#include "h2slow/errors.hpp"
#include "h2slow/file_io.hpp"
#include "h2slow/sim/socket_driver.hpp"

namespace h2slow::sim {

using nlohmann::json;

std::size_t Scenario::total_connections() const {
  std::size_t n = benign;
  for (const auto& [k, c] : attacks) n += c;
  return n;
}

void Scenario::validate() const {
  if (total_connections() == 0) throw ScenarioInvalid("scenario requests no connections");
  if (!(arrival_interval >= 0)) throw ScenarioInvalid("arrival_interval must be >= 0");
  if (!(min_latency >= 0) || !(max_latency >= min_latency)) {
    throw ScenarioInvalid("latency bounds must satisfy 0 <= min <= max");
  }
  if (!(hold > 0)) throw ScenarioInvalid("hold must be > 0");
  try {
    victim.validate();
    profile.validate();
  } catch (const ConfigError& e) {
    throw ScenarioInvalid(e.what());
  }
}

namespace {

void check_keys(const json& j, std::initializer_list<const char*> allowed, const std::string& where) {
  for (const auto& [k, v] : j.items()) {
    bool ok = false;
    for (const char* a : allowed) ok = ok || k == a;
    if (!ok) throw ScenarioInvalid("unknown key '" + k + "' in " + where);
  }
}

template <class T>
void take(const json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

}  // namespace

Scenario parse_scenario(std::string_view text) {
  Scenario s;
  try {
    const json j = json::parse(text);
    if (!j.is_object()) throw ScenarioInvalid("scenario must be a JSON object");
    check_keys(j,
               {"seed", "benign", "attacks", "victim", "benign_profile", "hold", "arrival_interval",
                "latency", "clock", "schedule"},
               "scenario");
    take(j, "seed", s.seed);
    take(j, "benign", s.benign);
    take(j, "hold", s.hold);
    take(j, "arrival_interval", s.arrival_interval);
    if (j.contains("attacks")) {
      for (const auto& [name, count] : j.at("attacks").items()) {
        s.attacks[parse_attack_kind(name)] = count.get<std::size_t>();
      }
    }
    if (j.contains("victim")) {
      const auto& v = j.at("victim");
      check_keys(v, {"queue_capacity", "wait_duration", "listen_port"}, "victim");
      take(v, "queue_capacity", s.victim.queue_capacity);
      take(v, "wait_duration", s.victim.wait_duration);
      take(v, "listen_port", s.victim.listen_port);
    }
    if (j.contains("benign_profile")) {
      const auto& p = j.at("benign_profile");
      check_keys(p,
                 {"max_gap", "min_think", "max_think", "min_requests", "max_requests", "post_share",
                  "large_header_share", "ping_share", "window_update_share"},
                 "benign_profile");
      take(p, "max_gap", s.profile.max_gap);
      take(p, "min_think", s.profile.min_think);
      take(p, "max_think", s.profile.max_think);
      take(p, "min_requests", s.profile.min_requests);
      take(p, "max_requests", s.profile.max_requests);
      take(p, "post_share", s.profile.post_share);
      take(p, "large_header_share", s.profile.large_header_share);
      take(p, "ping_share", s.profile.ping_share);
      take(p, "window_update_share", s.profile.window_update_share);
    }
    if (j.contains("latency")) {
      const auto& l = j.at("latency");
      check_keys(l, {"min", "max"}, "latency");
      take(l, "min", s.min_latency);
      take(l, "max", s.max_latency);
    }
    if (j.contains("clock")) {
      const auto c = j.at("clock").get<std::string>();
      if (c == "virtual") {
        s.clock = ClockMode::kVirtual;
      } else if (c == "real") {
        s.clock = ClockMode::kReal;
      } else {
        throw ScenarioInvalid("clock must be 'virtual' or 'real'");
      }
    }
    if (j.contains("schedule")) {
      const auto c = j.at("schedule").get<std::string>();
      if (c == "shuffled") {
        s.schedule = Schedule::kShuffled;
      } else if (c == "attacks_first") {
        s.schedule = Schedule::kAttacksFirst;
      } else {
        throw ScenarioInvalid("schedule must be 'shuffled' or 'attacks_first'");
      }
    }
  } catch (const json::exception& e) {
    throw ScenarioInvalid(std::string("scenario: ") + e.what());
  } catch (const ConfigError& e) {
    throw ScenarioInvalid(e.what());
  }
  s.validate();
  return s;
}

std::string scenario_to_json(const Scenario& s) {
  json attacks = json::object();
  for (const auto& [k, c] : s.attacks) attacks[to_string(k)] = c;
  json j = {
      {"seed", s.seed},
      {"benign", s.benign},
      {"attacks", attacks},
      {"victim",
       {{"queue_capacity", s.victim.queue_capacity},
        {"wait_duration", s.victim.wait_duration},
        {"listen_port", s.victim.listen_port}}},
      {"benign_profile",
       {{"max_gap", s.profile.max_gap},
        {"min_think", s.profile.min_think},
        {"max_think", s.profile.max_think},
        {"min_requests", s.profile.min_requests},
        {"max_requests", s.profile.max_requests},
        {"post_share", s.profile.post_share},
        {"large_header_share", s.profile.large_header_share},
        {"ping_share", s.profile.ping_share},
        {"window_update_share", s.profile.window_update_share}}},
      {"hold", s.hold},
      {"arrival_interval", s.arrival_interval},
      {"latency", {{"min", s.min_latency}, {"max", s.max_latency}}},
      {"clock", s.clock == ClockMode::kVirtual ? "virtual" : "real"},
      {"schedule", s.schedule == Schedule::kShuffled ? "shuffled" : "attacks_first"},
  };
  return j.dump(2) + "\n";
}

namespace {

struct Slot {
  std::optional<AttackKind> attack;  // nullopt = benign
};

std::vector<Slot> plan(const Scenario& s, Rng& rng) {
  std::vector<Slot> slots;
  std::vector<Slot> attacks;
  for (const auto& [k, c] : s.attacks) {
    for (std::size_t i = 0; i < c; ++i) attacks.push_back({k});
  }
  if (s.schedule == Schedule::kAttacksFirst) {
    slots = attacks;
    slots.insert(slots.end(), s.benign, Slot{});
    return slots;
  }
  slots = attacks;
  slots.insert(slots.end(), s.benign, Slot{});
  for (std::size_t i = slots.size(); i > 1; --i) {
    std::swap(slots[i - 1], slots[rng.uniform_int(0, i - 1)]);
  }
  return slots;
}

std::unique_ptr<App> make_client(const Scenario& s, const Slot& slot, Rng rng, std::shared_ptr<ConnReport> r) {
  if (slot.attack) return make_attack_client(*slot.attack, s.hold, rng, std::move(r));
  return make_benign_client(s.profile, rng, std::move(r));
}

void finish(SimulationResult& out, const std::vector<std::shared_ptr<ConnReport>>& reports) {
  for (const auto& r : reports) {
    out.reports.push_back(*r);
    if (!r->key) continue;
    out.labels[*r->key] = r->kind == "benign" ? GroundTruth::kBenign : GroundTruth::kAttack;
    out.kinds[*r->key] = r->kind;
  }
}

SimulationResult run_virtual(const Scenario& s) {
  Rng rng(s.seed);
  const auto slots = plan(s, rng);
  EventLoop loop;
  Victim victim(s.victim);
  Network net(loop, Endpoint{IpAddress::v4(10, 1, 0, 1), s.victim.listen_port}, victim);

  std::vector<std::shared_ptr<ConnReport>> reports;
  std::map<std::uint32_t, std::uint16_t> next_port;
  std::size_t benign_i = 0;
  std::size_t attack_i = 0;
  for (std::size_t i = 0; i < slots.size(); ++i) {
    const Slot& slot = slots[i];
    // benign hosts 10.0.x.y, attackers 10.2.x.y
    const std::size_t host = slot.attack ? attack_i++ % 500 : benign_i++ % 2000;
    const IpAddress ip = IpAddress::v4(10, slot.attack ? 2 : 0, static_cast<std::uint8_t>(host / 250),
                                       static_cast<std::uint8_t>(host % 250 + 1));
    auto& port = next_port[ip.v4_value()];
    if (port == 0) port = static_cast<std::uint16_t>(40000 + rng.uniform_int(0, 9999));
    const std::uint16_t client_port = port++;
    if (port < 40000) port = 40000;

    auto report = std::make_shared<ConnReport>();
    report->kind = slot.attack ? to_string(*slot.attack) : "benign";
    const Micros start = to_micros(static_cast<double>(i) * s.arrival_interval);
    const Micros latency = to_micros(rng.uniform(s.min_latency, s.max_latency));
    report->conn_id = net.connect(Endpoint{ip, client_port}, latency, make_client(s, slot, rng.fork(), report), start);
    report->key = net.key_of(report->conn_id);
    reports.push_back(report);
  }
  loop.run();

  SimulationResult out;
  out.capture = net.take_capture();
  out.victim_log = victim.log();
  out.peak_occupancy = victim.peak_occupancy();
  finish(out, reports);
  return out;
}

SimulationResult run_real(const Scenario& s) {
  Rng rng(s.seed);
  const auto slots = plan(s, rng);
  SocketDriver driver;
  Victim victim(s.victim);
  SimulationResult out;
  driver.set_tap([&](const RawPacket& p) { out.capture.packets.push_back(p); });
  const std::uint16_t port = driver.listen("127.0.0.1", s.victim.listen_port, victim);

  std::vector<std::shared_ptr<ConnReport>> reports;
  for (std::size_t i = 0; i < slots.size(); ++i) {
    auto report = std::make_shared<ConnReport>();
    report->kind = slots[i].attack ? to_string(*slots[i].attack) : "benign";
    const double start = static_cast<double>(i) * s.arrival_interval;
    report->conn_id = driver.connect("127.0.0.1", port, make_client(s, slots[i], rng.fork(), report), start);
    reports.push_back(report);
  }
  driver.run();
  out.victim_log = victim.log();
  out.peak_occupancy = victim.peak_occupancy();
  finish(out, reports);
  return out;
}

}  // namespace

SimulationResult run_scenario(const Scenario& s) {
  s.validate();
  return s.clock == ClockMode::kVirtual ? run_virtual(s) : run_real(s);
}

void write_simulation(const SimulationResult& r, const std::string& dir) {
  std::filesystem::create_directories(dir);
  const std::filesystem::path base(dir);
  write_file_atomic((base / "capture.pcap").string(), serialize_pcap(r.capture));
  write_file_atomic((base / "labels.csv").string(), format_labels(r.labels));
  write_file_atomic((base / "victim.log").string(), format_victim_log(r.victim_log));
  write_file_atomic((base / "summary.csv").string(), format_summary(r.reports));
}

}  // namespace h2slow::sim
