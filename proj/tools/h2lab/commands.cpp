#include "commands.hpp"

#include <arpa/inet.h>
#include <netinet/in.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include <chrono>
#include <csignal>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <memory>
#include <sstream>
#include <thread>

#include "h2slow/detection.hpp"
#include "h2slow/errors.hpp"
#include "h2slow/file_io.hpp"
#include "h2slow/learning.hpp"
#include "h2slow/metrics.hpp"
#include "h2slow/pcap.hpp"
#include "h2slow/pipeline.hpp"
#include "h2slow/rng.hpp"
#include "h2slow/sim/clients.hpp"
#include "h2slow/sim/scenario.hpp"
#include "h2slow/sim/socket_driver.hpp"
#include "h2slow/sim/victim.hpp"

namespace h2lab {

using namespace h2slow;

namespace {

volatile std::sig_atomic_t g_stop = 0;

void on_signal(int) { g_stop = 1; }

void install_signals() {
  std::signal(SIGINT, on_signal);
  std::signal(SIGTERM, on_signal);
  std::signal(SIGPIPE, SIG_IGN);
}

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

void check_n(std::size_t n) {
  if (n < 2 || n > 16) throw ConfigError("--n must be in [2, 16]");
}

void check_threshold(double t) {
  if (!(t > 0.0 && t < 1.0)) throw ConfigError("--threshold must be in (0, 1)");
}

std::pair<std::string, std::uint16_t> split_host_port(const std::string& s) {
  const auto colon = s.rfind(':');
  if (colon == std::string::npos) throw ConfigError("expected host:port, got '" + s + "'");
  const std::string port = s.substr(colon + 1);
  unsigned long p = 0;
  try {
    std::size_t used = 0;
    p = std::stoul(port, &used);
    if (used != port.size()) throw std::invalid_argument(port);
  } catch (const std::exception&) {
    throw ConfigError("bad port in '" + s + "'");
  }
  if (p > 65535) throw ConfigError("bad port in '" + s + "'");
  return {s.substr(0, colon), static_cast<std::uint16_t>(p)};
}

sockaddr_in make_addr(const std::string& host, std::uint16_t port) {
  sockaddr_in a{};
  a.sin_family = AF_INET;
  a.sin_port = htons(port);
  if (inet_pton(AF_INET, host.c_str(), &a.sin_addr) != 1) throw ConfigError("bad IPv4 address: " + host);
  return a;
}

class Fd {
 public:
  explicit Fd(int fd = -1) : fd_(fd) {}
  ~Fd() {
    if (fd_ >= 0) ::close(fd_);
  }
  Fd(const Fd&) = delete;
  Fd& operator=(const Fd&) = delete;
  int get() const { return fd_; }

 private:
  int fd_;
};

// Blocking sender of feed records.
class FeedClient {
 public:
  explicit FeedClient(const std::string& host_port) {
    const auto [host, port] = split_host_port(host_port);
    const sockaddr_in a = make_addr(host, port);
    fd_ = ::socket(AF_INET, SOCK_STREAM, 0);
    if (fd_ < 0 || ::connect(fd_, reinterpret_cast<const sockaddr*>(&a), sizeof a) != 0) {
      throw ConnectRefused("cannot connect to feed " + host_port);
    }
  }
  ~FeedClient() {
    if (fd_ >= 0) ::close(fd_);
  }
  FeedClient(const FeedClient&) = delete;
  FeedClient& operator=(const FeedClient&) = delete;

  bool send(const RawPacket& p) {
    if (fd_ < 0) return false;
    const Bytes rec = encode_feed_record(p);
    std::size_t off = 0;
    while (off < rec.size()) {
      const ssize_t w = ::send(fd_, rec.data() + off, rec.size() - off, 0);
      if (w < 0 && errno == EINTR) continue;
      if (w <= 0) {
        ::close(fd_);
        fd_ = -1;
        return false;
      }
      off += static_cast<std::size_t>(w);
    }
    return true;
  }

 private:
  int fd_ = -1;
};

// Accepts one feed connection and decodes records until the sender closes or
// a signal arrives. `on_idle` gets an estimate of capture time while waiting.
void serve_feed(const Source& src, const std::function<void(const RawPacket&)>& on_packet,
                const std::function<void(double)>& on_idle) {
  const auto [host, port] = split_host_port(src.listen);
  const sockaddr_in a = make_addr(host, port);
  Fd lfd(::socket(AF_INET, SOCK_STREAM, 0));
  const int one = 1;
  ::setsockopt(lfd.get(), SOL_SOCKET, SO_REUSEADDR, &one, sizeof one);
  if (::bind(lfd.get(), reinterpret_cast<const sockaddr*>(&a), sizeof a) != 0 || ::listen(lfd.get(), 1) != 0) {
    throw UnreadableInput("cannot listen on " + src.listen);
  }
  sockaddr_in bound{};
  socklen_t len = sizeof bound;
  ::getsockname(lfd.get(), reinterpret_cast<sockaddr*>(&bound), &len);
  const std::uint16_t bound_port = ntohs(bound.sin_port);
  std::cerr << "listening on " << host << ":" << bound_port << "\n";
  if (!src.port_file.empty()) write_file_atomic(src.port_file, std::to_string(bound_port) + "\n");

  int cfd = -1;
  while (!g_stop && cfd < 0) {
    pollfd p{lfd.get(), POLLIN, 0};
    if (::poll(&p, 1, 100) > 0) cfd = ::accept(lfd.get(), nullptr, nullptr);
  }
  if (cfd < 0) return;
  Fd conn(cfd);

  using Clock = std::chrono::steady_clock;
  FeedDecoder dec;
  std::optional<double> last_ts;
  Clock::time_point last_wall = Clock::now();
  std::uint8_t buf[65536];
  while (!g_stop) {
    pollfd p{conn.get(), POLLIN, 0};
    const int r = ::poll(&p, 1, 100);
    if (r < 0 && errno != EINTR) break;
    if (r > 0) {
      const ssize_t got = ::recv(conn.get(), buf, sizeof buf, 0);
      if (got < 0 && errno == EINTR) continue;
      if (got <= 0) break;
      dec.push(ByteView(buf, static_cast<std::size_t>(got)));
      while (auto pkt = dec.pop()) {
        last_ts = to_seconds(pkt->ts);
        last_wall = Clock::now();
        on_packet(*pkt);
      }
    } else if (last_ts) {
      on_idle(*last_ts + std::chrono::duration<double>(Clock::now() - last_wall).count());
    }
  }
}

Capture load_source(const Source& src) {
  if (!src.pcap.empty()) return read_pcap_file(src.pcap);
  if (src.listen.empty()) throw ConfigError("need --pcap or --listen");
  install_signals();
  Capture cap;
  serve_feed(src, [&](const RawPacket& p) { cap.packets.push_back(p); }, [](double) {});
  return cap;
}

std::filesystem::path out_path(const std::string& dir, const char* name) {
  std::filesystem::create_directories(dir);
  return std::filesystem::path(dir) / name;
}

DetectorConfig make_config(const DetectFlags& f, const std::string& la_path, const std::string& delay_path) {
  check_n(f.n);
  check_threshold(f.threshold);
  if (!(f.fallback_delay > 0)) throw ConfigError("--fallback-delay must be > 0");
  if (la_path.empty() || delay_path.empty()) throw ConfigError("need --lookahead and --delay");
  DetectorConfig cfg;
  cfg.n = f.n;
  cfg.threshold = f.threshold;
  cfg.fallback_delay = f.fallback_delay;
  cfg.lookahead = std::make_shared<LookaheadDb>(LookaheadDb::parse(read_text_file(la_path)));
  cfg.delay = std::make_shared<DelayDb>(DelayDb::parse(read_text_file(delay_path)));
  cfg.validate();
  return cfg;
}

void print_summary(std::ostream& os, const ConfusionCounts& c, const MetricSummary& s) {
  os << "tp=" << c.tp << " fp=" << c.fp << " tn=" << c.tn << " fn=" << c.fn
     << " accuracy=" << format_percent(s.accuracy) << " fpr=" << format_percent(s.fpr)
     << " recall=" << format_percent(s.recall) << " precision=" << format_percent(s.precision) << "\n";
}

}  // namespace

int cmd_train(const TrainOptions& o) {
  check_n(o.n);
  const Capture cap = load_source(o.source);
  AssemblerStats st;
  const auto flows = assemble(cap, &st);
  const LearnedModel model = learn(flows, o.n);

  std::vector<EventSequence> seqs;
  seqs.reserve(flows.size());
  for (const auto& f : flows) seqs.push_back(build_sequence(f));
  const auto curve = saturation_curve(seqs, o.n);

  write_file_atomic(out_path(o.out_dir, "lookahead.db").string(), model.lookahead.serialize());
  write_file_atomic(out_path(o.out_dir, "delay.db").string(), model.delay.serialize());

  std::cout << "packets=" << st.packets << " flows=" << flows.size() << " pairs=" << model.lookahead.size()
            << " delay_entries=" << model.delay.size() << "\n";
  // saturation at a few fractions of the training set
  std::cout << "saturation";
  for (int pct : {10, 25, 50, 75, 100}) {
    const std::size_t i = std::max<std::size_t>(1, curve.size() * static_cast<std::size_t>(pct) / 100) - 1;
    std::cout << " " << pct << "%:" << curve[i].unique_pairs;
  }
  std::cout << "\n";
  const std::size_t tail_from = curve.size() * 9 / 10;
  const std::size_t before = tail_from == 0 ? 0 : curve[tail_from - 1].unique_pairs;
  std::cout << "new pairs in last 10% of flows: " << curve.back().unique_pairs - before << "\n";

  if (!o.saturation_csv.empty()) {
    std::ostringstream csv;
    csv << "flows,unique_pairs\n";
    for (const auto& p : curve) csv << p.flows << "," << p.unique_pairs << "\n";
    write_file_atomic(o.saturation_csv, csv.str());
  }
  return 0;
}

int cmd_detect(const DetectOptions& o) {
  const DetectorConfig cfg = make_config(o.flags, o.lookahead_db, o.delay_db);
  std::optional<LabelMap> labels;
  if (!o.labels.empty()) labels = parse_labels(read_text_file(o.labels));

  std::vector<Verdict> verdicts;
  auto on_verdict = [&](const Verdict& v) {
    if (!o.quiet) std::cout << format_verdict(v) << "\n" << std::flush;
    verdicts.push_back(v);
  };

  if (!o.source.pcap.empty()) {
    std::ifstream in(o.source.pcap, std::ios::binary);
    if (!in) throw UnreadableInput("cannot open " + o.source.pcap);
    PcapReader reader(in);
    DetectionPipeline pipe(cfg, on_verdict, reader.link());
    while (auto p = reader.next()) pipe.feed(*p);
    pipe.finish();
  } else if (!o.source.listen.empty()) {
    install_signals();
    DetectionPipeline pipe(cfg, on_verdict);
    serve_feed(o.source, [&](const RawPacket& p) { pipe.feed(p); }, [&](double now) { pipe.tick(now); });
    pipe.finish();
  } else {
    throw ConfigError("need --pcap or --listen");
  }

  std::size_t anomalous = 0;
  for (const auto& v : verdicts) anomalous += v.label == Label::kAnomalous;
  std::cerr << "verdicts=" << verdicts.size() << " anomalous=" << anomalous << "\n";

  if (!o.out_dir.empty()) {
    std::string text;
    for (const auto& v : verdicts) text += format_verdict(v) + "\n";
    write_file_atomic(out_path(o.out_dir, "verdicts.txt").string(), text);
    if (o.trace) {
      std::ostringstream csv;
      csv << "flow,length,score\n";
      for (const auto& v : verdicts) {
        for (const auto& p : v.trace) csv << v.flow.to_string() << "," << p.length << "," << fmt("%.6f", p.score) << "\n";
      }
      write_file_atomic(out_path(o.out_dir, "traces.csv").string(), csv.str());
    }
    if (anomalous > 0) {
      write_file_atomic(out_path(o.out_dir, "latency_cdf.csv").string(),
                        cdf_to_csv(latency_cdf(verdicts), "latency"));
    }
  }

  if (labels) {
    std::size_t unlabeled = 0;
    const auto joined = join_labels(verdicts, *labels, &unlabeled);
    const ConfusionCounts c = confusion(joined);
    const MetricSummary s = summarize(c);
    print_summary(std::cerr, c, s);
    if (unlabeled) std::cerr << "unlabeled verdicts: " << unlabeled << "\n";
    if (!o.out_dir.empty()) write_file_atomic(out_path(o.out_dir, "metrics.csv").string(), metrics_csv(c, s));
  }
  return 0;
}

int cmd_simulate(const SimulateOptions& o) {
  sim::Scenario s = sim::parse_scenario(read_text_file(o.scenario));
  if (o.seed) s.seed = *o.seed;
  if (o.virtual_clock && o.real_clock) throw ConfigError("--virtual-clock and --real-clock are exclusive");
  if (o.virtual_clock) s.clock = sim::ClockMode::kVirtual;
  if (o.real_clock) s.clock = sim::ClockMode::kReal;
  const sim::SimulationResult r = sim::run_scenario(s);
  sim::write_simulation(r, o.out_dir);

  std::size_t rejects = 0;
  std::size_t expires = 0;
  for (const auto& e : r.victim_log) {
    rejects += e.event == sim::VictimEvent::kReject;
    expires += e.event == sim::VictimEvent::kExpire;
  }
  std::cout << "connections=" << r.reports.size() << " labeled=" << r.labels.size()
            << " packets=" << r.capture.packets.size() << " peak_occupancy=" << r.peak_occupancy
            << " rejects=" << rejects << " expires=" << expires << "\n";
  return 0;
}

int cmd_report(const ReportOptions& o) {
  if (o.thresholds.empty()) throw ConfigError("need at least one threshold");
  const Capture cap = read_pcap_file(o.pcap);
  const LabelMap labels = parse_labels(read_text_file(o.labels));
  DetectorConfig cfg = make_config(o.flags, o.lookahead_db, o.delay_db);
  cfg.record_trace = false;

  std::ostringstream csv;
  csv << "threshold,tp,fp,tn,fn,accuracy,fpr,recall,precision\n";
  for (double t : o.thresholds) {
    check_threshold(t);
    cfg.threshold = t;
    const auto verdicts = detect_capture(cap, cfg);
    const ConfusionCounts c = confusion(join_labels(verdicts, labels));
    const MetricSummary s = summarize(c);
    csv << fmt("%.4f", t) << "," << c.tp << "," << c.fp << "," << c.tn << "," << c.fn << ","
        << format_percent(s.accuracy) << "," << format_percent(s.fpr) << "," << format_percent(s.recall) << ","
        << format_percent(s.precision) << "\n";
    std::cout << "threshold=" << fmt("%.4f", t) << " ";
    print_summary(std::cout, c, s);
  }
  write_file_atomic(out_path(o.out_dir, "sweep.csv").string(), csv.str());
  return 0;
}

int cmd_victim(const VictimOptions& o) {
  install_signals();
  sim::VictimConfig vc{o.queue, o.wait, o.port};
  vc.validate();
  sim::Victim victim(vc);
  victim.set_log_sink([](const sim::VictimLogEntry& e) { std::cout << sim::format_log_line(e) << "\n" << std::flush; });

  std::unique_ptr<FeedClient> feed;
  if (!o.feed.empty()) feed = std::make_unique<FeedClient>(o.feed);
  Capture cap;
  const bool keep = !o.pcap_out.empty();

  sim::SocketDriver driver;
  if (feed || keep) {
    driver.set_tap([&](const RawPacket& p) {
      if (feed && !feed->send(p)) {
        std::cerr << "feed connection lost\n";
        feed.reset();
      }
      if (keep) cap.packets.push_back(p);
    });
  }
  const std::uint16_t port = driver.listen(o.host, o.port, victim);
  std::cerr << "victim listening on " << o.host << ":" << port << "\n";
  while (!g_stop && (o.duration <= 0 || driver.now() < o.duration)) driver.run_until(driver.now() + 0.1);

  if (keep) write_file_atomic(o.pcap_out, serialize_pcap(cap));
  if (!o.log_out.empty()) write_file_atomic(o.log_out, sim::format_victim_log(victim.log()));
  return 0;
}

namespace {

int run_clients(const ClientOptions& o, const std::function<std::unique_ptr<sim::App>(Rng, std::shared_ptr<sim::ConnReport>)>& make,
                const std::string& kind) {
  install_signals();
  if (o.count == 0) throw ConfigError("--count must be > 0");
  Rng rng(o.seed);
  sim::SocketDriver driver;
  std::vector<std::shared_ptr<sim::ConnReport>> reports;
  for (std::size_t i = 0; i < o.count; ++i) {
    auto r = std::make_shared<sim::ConnReport>();
    r->kind = kind;
    r->conn_id = driver.connect(o.host, o.port, make(rng.fork(), r), static_cast<double>(i) * o.interval);
    reports.push_back(r);
  }
  while (!g_stop && driver.open_connections() > 0) driver.run_until(driver.now() + 0.1);

  std::vector<sim::ConnReport> flat;
  for (const auto& r : reports) flat.push_back(*r);
  const std::string summary = sim::format_summary(flat);
  if (o.summary_out.empty()) {
    std::cout << summary;
  } else {
    write_file_atomic(o.summary_out, summary);
  }
  return 0;
}

}  // namespace

int cmd_attack(const ClientOptions& o) {
  const sim::AttackKind kind = sim::parse_attack_kind(o.kind);
  if (!(o.hold > 0)) throw ConfigError("--hold must be > 0");
  return run_clients(
      o, [&](Rng rng, std::shared_ptr<sim::ConnReport> r) { return sim::make_attack_client(kind, o.hold, rng, std::move(r)); },
      sim::to_string(kind));
}

int cmd_benign(const ClientOptions& o) {
  const sim::BenignProfile profile;
  return run_clients(
      o, [&](Rng rng, std::shared_ptr<sim::ConnReport> r) { return sim::make_benign_client(profile, rng, std::move(r)); },
      "benign");
}

int cmd_feed(const FeedOptions& o) {
  install_signals();
  std::ifstream in(o.pcap, std::ios::binary);
  if (!in) throw UnreadableInput("cannot open " + o.pcap);
  PcapReader reader(in);
  if (reader.link() != LinkType::kEthernet) throw InputError("feed carries Ethernet frames only");
  FeedClient client(o.to);
  using Clock = std::chrono::steady_clock;
  const Clock::time_point wall0 = Clock::now();
  std::optional<Micros> ts0;
  std::size_t sent = 0;
  while (auto p = reader.next()) {
    if (g_stop) break;
    if (o.realtime) {
      if (!ts0) ts0 = p->ts;
      std::this_thread::sleep_until(wall0 + std::chrono::microseconds(p->ts - *ts0));
    }
    if (!client.send(*p)) throw InputError("feed receiver closed the connection");
    ++sent;
  }
  std::cerr << "sent " << sent << " packets\n";
  return 0;
}

int cmd_timing(const TimingOptions& o) {
  for (auto n : o.ns) check_n(n);
  const auto rows = extraction_timing(o.ns, o.lengths, o.reps, 5, o.seed);
  const std::string csv = timing_csv(rows);
  if (o.out.empty()) {
    std::cout << csv;
  } else {
    write_file_atomic(o.out, csv);
  }
  std::cerr << "monotone in n: " << (timing_monotone_in_n(rows, 0.05) ? "yes" : "no") << "\n";
  return 0;
}

int cmd_cdf(const CdfOptions& o) {
  const auto flows = assemble(read_pcap_file(o.pcap));
  const std::string csv = cdf_to_csv(waiting_time_cdf(flows), "waiting_time");
  if (o.out.empty()) {
    std::cout << csv;
  } else {
    write_file_atomic(o.out, csv);
  }
  return 0;
}

}  // namespace h2lab
