#pragma once

// Victim server: a finite connection queue and a per-connection wait budget.
// Speaks just enough HTTP/2 to tell a complete request from a stalled one.

#include <atomic>
#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "h2slow/sim/network.hpp"

namespace h2slow::sim {

struct VictimConfig {
  std::size_t queue_capacity = 10;  // Q
  double wait_duration = 360.0;     // seconds
  std::uint16_t listen_port = 8080;
  std::uint32_t max_concurrent_streams = 100;
  std::uint32_t initial_window_size = 65535;

  void validate() const;  // throws ConfigError
};

enum class VictimEvent : std::uint8_t { kAccept, kReject, kComplete, kExpire };

std::string to_string(VictimEvent e);

struct VictimLogEntry {
  double t = 0.0;
  std::uint64_t conn = 0;
  VictimEvent event = VictimEvent::kAccept;
};

// t=<s> conn=<id> event=<accept|reject|complete|expire>
std::string format_log_line(const VictimLogEntry& e);
std::string format_victim_log(std::span<const VictimLogEntry> entries);

class Victim : public Acceptor {
 public:
  explicit Victim(VictimConfig cfg);
  ~Victim() override;

  std::unique_ptr<App> on_syn(std::uint64_t conn_id, double now, const FlowKey& key) override;

  std::size_t occupancy() const { return occupancy_.load(); }
  std::size_t peak_occupancy() const { return peak_; }
  const std::vector<VictimLogEntry>& log() const { return log_; }
  const VictimConfig& config() const { return cfg_; }

  // Called for every log entry as it happens.
  void set_log_sink(std::function<void(const VictimLogEntry&)> sink) { sink_ = std::move(sink); }

 private:
  friend class VictimSession;
  void record(double t, std::uint64_t conn, VictimEvent e);
  void release();

  VictimConfig cfg_;
  std::atomic<std::size_t> occupancy_{0};
  std::size_t peak_ = 0;
  std::vector<VictimLogEntry> log_;
  std::function<void(const VictimLogEntry&)> sink_;
};

}  // namespace h2slow::sim
