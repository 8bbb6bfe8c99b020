#include <gtest/gtest.h>
#include <sys/wait.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "h2slow/file_io.hpp"
#include "h2slow/pcap.hpp"

namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() / ("h2lab_cli_" + std::to_string(::getpid()) + "_" +
                                        ::testing::UnitTest::GetInstance()->current_test_info()->name());
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  std::string operator/(const std::string& name) const { return (path / name).string(); }
};

int run(const std::string& args, const std::string& log) {
  const std::string cmd = std::string(H2LAB_BINARY) + " " + args + " >" + log + " 2>&1";
  const int st = std::system(cmd.c_str());
  return WIFEXITED(st) ? WEXITSTATUS(st) : -1;
}

std::string slurp(const std::string& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

void write(const std::string& p, const std::string& text) { std::ofstream(p, std::ios::binary) << text; }

}  // namespace

TEST(Cli, SimulateTrainDetect) {
  TempDir d;
  write(d / "train.json", R"({"seed": 11, "benign": 150})");
  write(d / "eval.json", R"({"seed": 22, "benign": 40, "attacks": {"1": 4, "2": 4, "3": 4, "4": 4, "5": 4}})");
  ASSERT_EQ(run("simulate " + (d / "train.json") + " --out-dir " + (d / "train"), d / "log"), 0) << slurp(d / "log");
  ASSERT_EQ(run("simulate " + (d / "eval.json") + " --out-dir " + (d / "eval"), d / "log"), 0) << slurp(d / "log");
  for (auto f : {"capture.pcap", "labels.csv", "victim.log", "summary.csv"}) EXPECT_TRUE(fs::exists(d / ("eval/" + std::string(f))));

  ASSERT_EQ(run("train --pcap " + (d / "train/capture.pcap") + " --out-dir " + (d / "db"), d / "log"), 0) << slurp(d / "log");
  const std::string lookahead = slurp(d / "db/lookahead.db");
  EXPECT_EQ(lookahead.rfind("#lookahead n=5\n", 0), 0u);
  EXPECT_EQ(slurp(d / "db/delay.db").rfind("#delay\n", 0), 0u);

  ASSERT_EQ(run("train --pcap " + (d / "train/capture.pcap") + " --out-dir " + (d / "db2"), d / "log"), 0);
  EXPECT_EQ(slurp(d / "db2/lookahead.db"), lookahead);
  EXPECT_EQ(slurp(d / "db2/delay.db"), slurp(d / "db/delay.db"));

  const std::string dbs = " --lookahead " + (d / "db/lookahead.db") + " --delay " + (d / "db/delay.db");
  ASSERT_EQ(run("detect --pcap " + (d / "eval/capture.pcap") + dbs + " --labels " + (d / "eval/labels.csv") +
                    " --out-dir " + (d / "out") + " --trace",
                d / "verdicts"),
            0)
      << slurp(d / "verdicts");
  const std::string out = slurp(d / "verdicts");
  EXPECT_NE(out.find("flow="), std::string::npos);
  EXPECT_NE(out.find("label=anomalous"), std::string::npos);
  const std::string metrics = slurp(d / "out/metrics.csv");
  EXPECT_NE(metrics.find("recall,100.00"), std::string::npos) << metrics;
  EXPECT_TRUE(fs::exists(d / "out/traces.csv"));
  EXPECT_TRUE(fs::exists(d / "out/latency_cdf.csv"));

  ASSERT_EQ(run("report --pcap " + (d / "eval/capture.pcap") + " --labels " + (d / "eval/labels.csv") + dbs +
                    " --out-dir " + (d / "rep"),
                d / "log"),
            0)
      << slurp(d / "log");
  EXPECT_EQ(slurp(d / "rep/sweep.csv").rfind("threshold,tp,fp,tn,fn,accuracy,fpr,recall,precision\n", 0), 0u);

  EXPECT_EQ(run("detect --n 3 --pcap " + (d / "eval/capture.pcap") + dbs, d / "log"), 3);
  EXPECT_EQ(run("detect --n 1 --pcap " + (d / "eval/capture.pcap") + dbs, d / "log"), 3);
  EXPECT_EQ(run("detect --threshold 1.5 --pcap " + (d / "eval/capture.pcap") + dbs, d / "log"), 3);
}

TEST(Cli, InputErrorsExitTwo) {
  TempDir d;
  EXPECT_EQ(run("train --pcap " + (d / "missing.pcap") + " --out-dir " + (d / "db"), d / "log"), 2);
  const auto empty = h2slow::serialize_pcap(h2slow::Capture{});
  write(d / "empty.pcap", std::string(empty.begin(), empty.end()));
  EXPECT_EQ(run("train --pcap " + (d / "empty.pcap") + " --out-dir " + (d / "db"), d / "log"), 2);
  EXPECT_NE(slurp(d / "log").find("error"), std::string::npos);
  write(d / "junk.pcap", "not a capture at all");
  EXPECT_EQ(run("cdf --pcap " + (d / "junk.pcap"), d / "log"), 2);
}

TEST(Cli, ConfigErrorsExitThree) {
  TempDir d;
  write(d / "bad.json", R"({"benign": 1, "surprise": true})");
  EXPECT_EQ(run("simulate " + (d / "bad.json") + " --out-dir " + (d / "x"), d / "log"), 3);
  EXPECT_EQ(run("attack --kind 9 --count 1", d / "log"), 3);
  EXPECT_EQ(run("nonsense", d / "log"), 3);
  EXPECT_EQ(run("--help", d / "log"), 0);
}

TEST(Cli, TimingIsWritten) {
  TempDir d;
  ASSERT_EQ(run("timing --n 3,5 --lengths 25,50 --reps 50 --out " + (d / "t.csv"), d / "log"), 0) << slurp(d / "log");
  EXPECT_EQ(slurp(d / "t.csv").rfind("n,length,mean_us\n", 0), 0u);
}
