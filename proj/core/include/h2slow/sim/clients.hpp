#pragma once

// Traffic generators: browser-like benign clients and the five slow-rate
// attack clients.

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "h2slow/rng.hpp"
#include "h2slow/sim/network.hpp"

namespace h2slow::sim {

enum class AttackKind : std::uint8_t {
  kZeroWindow = 1,
  kIncompleteBody = 2,
  kPrefaceOnly = 3,
  kIncompleteHeader = 4,
  kUnackedSettings = 5,
};

inline constexpr AttackKind kAllAttackKinds[] = {AttackKind::kZeroWindow, AttackKind::kIncompleteBody,
                                                 AttackKind::kPrefaceOnly, AttackKind::kIncompleteHeader,
                                                 AttackKind::kUnackedSettings};

std::string to_string(AttackKind k);
// Accepts the names above or 1..5. Throws ConfigError.
AttackKind parse_attack_kind(std::string_view text);

struct BenignProfile {
  double max_gap = 0.4;    // between frames of one burst, seconds
  double min_think = 0.2;  // between a response and the next request
  double max_think = 1.5;
  std::uint32_t min_requests = 1;
  std::uint32_t max_requests = 4;
  double post_share = 0.25;
  double large_header_share = 0.15;
  double ping_share = 0.1;
  double window_update_share = 0.5;  // after a response

  // Longest delay the generator ever inserts between two of its frames.
  double max_delay() const { return max_gap > max_think ? max_gap : max_think; }
  void validate() const;  // throws ConfigError
};

// Client-side record of one connection.
struct ConnReport {
  std::uint64_t conn_id = 0;
  std::string kind;  // "benign" or an attack name
  std::optional<FlowKey> key;
  bool refused = false;
  std::optional<double> established;
  std::optional<double> closed;
  std::optional<double> server_wait;  // set when the server closed first
};

// summary CSV: conn_id,kind,established,closed,server_wait
std::string format_summary(const std::vector<ConnReport>& reports);

std::unique_ptr<App> make_benign_client(const BenignProfile& profile, Rng rng,
                                        std::shared_ptr<ConnReport> report);

// Sends the attack's prefix, then stays silent; closes `hold` seconds after
// establishment unless the server closes first.
std::unique_ptr<App> make_attack_client(AttackKind kind, double hold, Rng rng,
                                        std::shared_ptr<ConnReport> report);

}  // namespace h2slow::sim
