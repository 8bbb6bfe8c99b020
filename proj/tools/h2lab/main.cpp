#include <CLI11.hpp>
#include <iostream>

#include "commands.hpp"
#include "h2slow/errors.hpp"

namespace {

void add_source(CLI::App* cmd, h2lab::Source& s) {
  auto* pcap = cmd->add_option("--pcap", s.pcap, "capture file");
  auto* listen = cmd->add_option("--listen", s.listen, "accept a live feed on host:port");
  pcap->excludes(listen);
  cmd->add_option("--port-file", s.port_file, "write the bound feed port here");
}

void add_detect_flags(CLI::App* cmd, h2lab::DetectFlags& f) {
  cmd->add_option("--n", f.n, "lookahead window")->capture_default_str();
  cmd->add_option("--threshold", f.threshold, "mismatch score threshold")->capture_default_str();
  cmd->add_option("--fallback-delay", f.fallback_delay, "timeout (s) for events with no learned delay")
      ->capture_default_str();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"h2lab: slow HTTP/2 DoS lab and lookahead-pair detector"};
  app.require_subcommand(1);

  h2lab::TrainOptions train;
  auto* c_train = app.add_subcommand("train", "learn lookahead.db and delay.db from benign traffic");
  add_source(c_train, train.source);
  c_train->add_option("--n", train.n, "lookahead window")->capture_default_str();
  c_train->add_option("--out-dir", train.out_dir)->capture_default_str();
  c_train->add_option("--saturation-csv", train.saturation_csv, "unique pairs after each flow");

  h2lab::DetectOptions detect;
  auto* c_detect = app.add_subcommand("detect", "score flows and print verdicts");
  add_source(c_detect, detect.source);
  add_detect_flags(c_detect, detect.flags);
  c_detect->add_option("--lookahead", detect.lookahead_db)->required();
  c_detect->add_option("--delay", detect.delay_db)->required();
  c_detect->add_option("--labels", detect.labels, "flowkey,label ground truth");
  c_detect->add_option("--out-dir", detect.out_dir);
  c_detect->add_flag("--trace", detect.trace, "write per-flow score traces");
  c_detect->add_flag("--quiet", detect.quiet, "no verdict lines on stdout");

  h2lab::SimulateOptions simulate;
  auto* c_sim = app.add_subcommand("simulate", "run a scenario against the victim");
  c_sim->add_option("scenario", simulate.scenario, "scenario JSON")->required();
  c_sim->add_option("--out-dir", simulate.out_dir)->capture_default_str();
  c_sim->add_option("--seed", simulate.seed);
  c_sim->add_flag("--virtual-clock", simulate.virtual_clock);
  c_sim->add_flag("--real-clock", simulate.real_clock);

  h2lab::ReportOptions report;
  auto* c_report = app.add_subcommand("report", "threshold sweep over a labeled capture");
  c_report->add_option("--pcap", report.pcap)->required();
  c_report->add_option("--labels", report.labels)->required();
  c_report->add_option("--lookahead", report.lookahead_db)->required();
  c_report->add_option("--delay", report.delay_db)->required();
  add_detect_flags(c_report, report.flags);
  c_report->add_option("--thresholds", report.thresholds)->delimiter(',')->capture_default_str();
  c_report->add_option("--out-dir", report.out_dir)->capture_default_str();

  h2lab::VictimOptions victim;
  auto* c_victim = app.add_subcommand("victim", "serve the victim on a real socket");
  c_victim->add_option("--host", victim.host)->capture_default_str();
  c_victim->add_option("--port", victim.port)->capture_default_str();
  c_victim->add_option("--queue", victim.queue, "connection queue capacity")->capture_default_str();
  c_victim->add_option("--wait", victim.wait, "per-connection wait budget (s)")->capture_default_str();
  c_victim->add_option("--feed", victim.feed, "mirror packets to a detector at host:port");
  c_victim->add_option("--pcap-out", victim.pcap_out);
  c_victim->add_option("--log-out", victim.log_out);
  c_victim->add_option("--duration", victim.duration, "seconds; 0 runs until interrupted");

  h2lab::ClientOptions attack;
  auto* c_attack = app.add_subcommand("attack", "open slow-rate attack connections");
  c_attack->add_option("--kind", attack.kind, "1..5 or attack name")->required();
  c_attack->add_option("--host", attack.host)->capture_default_str();
  c_attack->add_option("--port", attack.port)->capture_default_str();
  c_attack->add_option("--count", attack.count)->capture_default_str();
  c_attack->add_option("--interval", attack.interval)->capture_default_str();
  c_attack->add_option("--hold", attack.hold)->capture_default_str();
  c_attack->add_option("--seed", attack.seed)->capture_default_str();
  c_attack->add_option("--summary-out", attack.summary_out);

  h2lab::ClientOptions benign;
  auto* c_benign = app.add_subcommand("benign", "open browser-like connections");
  c_benign->add_option("--host", benign.host)->capture_default_str();
  c_benign->add_option("--port", benign.port)->capture_default_str();
  c_benign->add_option("--count", benign.count)->capture_default_str();
  c_benign->add_option("--interval", benign.interval)->capture_default_str();
  c_benign->add_option("--seed", benign.seed)->capture_default_str();
  c_benign->add_option("--summary-out", benign.summary_out);

  h2lab::FeedOptions feed;
  auto* c_feed = app.add_subcommand("feed", "replay a capture into a live detector");
  c_feed->add_option("--pcap", feed.pcap)->required();
  c_feed->add_option("--to", feed.to, "host:port")->required();
  c_feed->add_flag("--realtime", feed.realtime, "pace by capture timestamps");

  h2lab::TimingOptions timing;
  auto* c_timing = app.add_subcommand("timing", "lookahead-pair extraction time per n and length");
  c_timing->add_option("--n", timing.ns)->delimiter(',')->capture_default_str();
  c_timing->add_option("--lengths", timing.lengths)->delimiter(',')->capture_default_str();
  c_timing->add_option("--reps", timing.reps)->capture_default_str();
  c_timing->add_option("--seed", timing.seed)->capture_default_str();
  c_timing->add_option("--out", timing.out);

  h2lab::CdfOptions cdf;
  auto* c_cdf = app.add_subcommand("cdf", "waiting-time CDF of the closed flows in a capture");
  c_cdf->add_option("--pcap", cdf.pcap)->required();
  c_cdf->add_option("--out", cdf.out);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 3;
  }

  try {
    if (*c_train) return h2lab::cmd_train(train);
    if (*c_detect) return h2lab::cmd_detect(detect);
    if (*c_sim) return h2lab::cmd_simulate(simulate);
    if (*c_report) return h2lab::cmd_report(report);
    if (*c_victim) return h2lab::cmd_victim(victim);
    if (*c_attack) return h2lab::cmd_attack(attack);
    if (*c_benign) return h2lab::cmd_benign(benign);
    if (*c_feed) return h2lab::cmd_feed(feed);
    if (*c_timing) return h2lab::cmd_timing(timing);
    if (*c_cdf) return h2lab::cmd_cdf(cdf);
  } catch (const h2slow::InputError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const h2slow::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 1;
}
