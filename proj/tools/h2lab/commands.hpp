#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace h2lab {

// Where packets come from: a pcap file, or a live feed accepted on host:port.
struct Source {
  std::string pcap;
  std::string listen;     // "host:port"; port 0 picks one
  std::string port_file;  // bound port is written here when listening
};

struct DetectFlags {
  std::size_t n = 5;
  double threshold = 0.02;
  double fallback_delay = 10.0;
};

struct TrainOptions {
  Source source;
  std::size_t n = 5;
  std::string out_dir = ".";
  std::string saturation_csv;
};

struct DetectOptions {
  Source source;
  DetectFlags flags;
  std::string lookahead_db;
  std::string delay_db;
  std::string labels;
  std::string out_dir;
  bool trace = false;
  bool quiet = false;
};

struct SimulateOptions {
  std::string scenario;
  std::string out_dir = ".";
  std::optional<std::uint64_t> seed;
  bool virtual_clock = false;
  bool real_clock = false;
};

struct ReportOptions {
  std::string pcap;
  std::string labels;
  std::string lookahead_db;
  std::string delay_db;
  DetectFlags flags;
  std::vector<double> thresholds{0.01, 0.02, 0.03, 0.04, 0.05};
  std::string out_dir = ".";
};

struct VictimOptions {
  std::string host = "127.0.0.1";
  std::uint16_t port = 8080;
  std::size_t queue = 10;
  double wait = 360.0;
  std::string feed;  // "host:port" of a detector's live input
  std::string pcap_out;
  std::string log_out;
  double duration = 0.0;  // 0 runs until interrupted
};

struct ClientOptions {
  std::string host = "127.0.0.1";
  std::uint16_t port = 8080;
  std::size_t count = 1;
  double interval = 0.25;
  double hold = 100.0;
  std::string kind;  // attack only
  std::uint64_t seed = 1;
  std::string summary_out;
};

struct FeedOptions {
  std::string pcap;
  std::string to;  // "host:port"
  bool realtime = false;
};

struct TimingOptions {
  std::vector<std::size_t> ns{3, 5, 7, 9};
  std::vector<std::size_t> lengths{25, 50, 100, 200, 400};
  std::size_t reps = 200;
  std::uint64_t seed = 1;
  std::string out;
};

struct CdfOptions {
  std::string pcap;
  std::string out;
};

int cmd_train(const TrainOptions& o);
int cmd_detect(const DetectOptions& o);
int cmd_simulate(const SimulateOptions& o);
int cmd_report(const ReportOptions& o);
int cmd_victim(const VictimOptions& o);
int cmd_attack(const ClientOptions& o);
int cmd_benign(const ClientOptions& o);
int cmd_feed(const FeedOptions& o);
int cmd_timing(const TimingOptions& o);
int cmd_cdf(const CdfOptions& o);

}  // namespace h2lab
