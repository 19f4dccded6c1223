#include <gtest/gtest.h>
#include <sys/wait.h>
#include <unistd.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <json.hpp>
#include <sstream>

namespace fs = std::filesystem;

namespace {

struct Result {
  int code;
  std::string out;
};

Result sh(const std::string& args, const std::string& env = "", bool with_stderr = false) {
  std::string cmd = env + " " + HYSMC_BIN + " " + args + (with_stderr ? " 2>&1" : " 2>/dev/null");
  FILE* p = popen(cmd.c_str(), "r");
  if (!p) return {-1, ""};
  std::string out;
  char buf[4096];
  size_t n;
  while ((n = fread(buf, 1, sizeof buf, p)) > 0) out.append(buf, n);
  int status = pclose(p);
  return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, out};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string q(const std::string& s) { return "'" + s + "'"; }

class Cli : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() /
           ("hysmc_cli_" + std::to_string(::getpid()) + "_" +
            ::testing::UnitTest::GetInstance()->current_test_info()->name());
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }
  std::string at(const std::string& name) const { return (dir_ / name).string(); }

  fs::path dir_;
};

const std::string kGoal = "Human.passed_out && (Robot.starting || Robot.moving)";

}  // namespace

TEST_F(Cli, ValidateExitCodes) {
  std::string shipped = std::string(HYSMC_SOURCE_DIR) + "/models/scenario.hynet";
  EXPECT_EQ(sh("validate " + shipped).code, 0);
  EXPECT_EQ(sh("validate scenario-controller").code, 0);
  EXPECT_EQ(sh("validate " + at("missing.hynet")).code, 2);

  std::string text = slurp(shipped);
  auto pos = text.find("emit start_moving;");
  ASSERT_NE(pos, std::string::npos);
  text.replace(pos, 18, "emit ping;");
  std::ofstream(at("bad.hynet")) << text;
  Result r = sh("validate " + at("bad.hynet"));
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.out.find("UNMATCHED_EMIT"), std::string::npos) << r.out;

  std::ofstream(at("syntax.hynet")) << "network n {\n  var x init ;\n}\n";
  r = sh("validate " + at("syntax.hynet"));
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.out.find("2:"), std::string::npos) << r.out;
}

TEST_F(Cli, UsageErrors) {
  EXPECT_EQ(sh("").code, 2);
  EXPECT_EQ(sh("frobnicate").code, 2);
  EXPECT_EQ(sh("simulate scenario --horizon 0 --out " + at("x")).code, 2);
  EXPECT_EQ(sh("simulate scenario --horizon 10 --step 0 --out " + at("x")).code, 2);
  EXPECT_EQ(sh("simulate scenario --horizon ten --out " + at("x")).code, 2);
  EXPECT_EQ(sh("sweep scenario --prop-goal " + q(kGoal) + " --bounds 300:x:300").code, 2);
  EXPECT_EQ(sh("sweep scenario --prop-goal " + q(kGoal) + " --bounds 300:600").code, 2);
  EXPECT_EQ(sh("sweep scenario --prop-goal " + q(kGoal) + " --bounds 600:300:100").code, 2);
  EXPECT_EQ(sh("check scenario --prop " + q("Pr[<=10](<> true)") + " --epsilon 0").code, 2);
  EXPECT_EQ(sh("replay " + at("nothing.json")).code, 2);
  EXPECT_TRUE(fs::is_empty(dir_));
}

TEST_F(Cli, SimulateWritesTraceAndReplays) {
  std::string prefix = at("run");
  ASSERT_EQ(sh("simulate scenario --horizon 7200 --seed 11 --out " + prefix).code, 0);
  std::string trace = slurp(prefix + "_trace.csv");
  std::string events = slurp(prefix + "_events.csv");
  EXPECT_EQ(trace.substr(0, trace.find('\n')),
            "time,V,r,C,F,h,Robot.location,Battery.location,Human.location");
  EXPECT_NE(events.find("start_moving"), std::string::npos);

  auto m = nlohmann::json::parse(slurp(prefix + "_manifest.json"));
  EXPECT_EQ(m["command"], "simulate");
  EXPECT_EQ(m["model"], "scenario");
  EXPECT_EQ(m["seed"], 11u);
  EXPECT_EQ(m["seed_source"], "cli");
  EXPECT_TRUE(m.contains("version"));
  EXPECT_TRUE(m.contains("wall_time_s"));
  EXPECT_EQ(m["options"]["horizon"], 7200.0);

  ASSERT_EQ(sh("simulate scenario --horizon 7200 --seed 11 --out " + at("again")).code, 0);
  EXPECT_EQ(slurp(at("again_trace.csv")), trace);
  EXPECT_EQ(slurp(at("again_events.csv")), events);

  ASSERT_EQ(sh("replay " + prefix + "_manifest.json --out " + at("replayed")).code, 0);
  EXPECT_EQ(slurp(at("replayed_trace.csv")), trace);
  EXPECT_EQ(slurp(at("replayed_events.csv")), events);
}

TEST_F(Cli, EntropySeedIsRecorded) {
  std::string prefix = at("e");
  ASSERT_EQ(sh("simulate scenario --horizon 600 --out " + prefix).code, 0);
  auto m = nlohmann::json::parse(slurp(prefix + "_manifest.json"));
  EXPECT_EQ(m["seed_source"], "entropy");
  ASSERT_EQ(sh("replay " + prefix + "_manifest.json --out " + at("r")).code, 0);
  EXPECT_EQ(slurp(at("r_trace.csv")), slurp(prefix + "_trace.csv"));
  EXPECT_EQ(slurp(at("r_events.csv")), slurp(prefix + "_events.csv"));
}

TEST_F(Cli, FailedSimulationLeavesNoFiles) {
  std::ofstream(at("blowup.hynet"))
      << "network n { var x init 1; automaton A { location s init { d(x) = exp(exp(x * 1000)); } } }\n";
  Result r = sh("simulate " + at("blowup.hynet") + " --horizon 10 --seed 1 --out " + at("out"));
  EXPECT_EQ(r.code, 1);
  for (const auto& e : fs::directory_iterator(dir_)) {
    EXPECT_EQ(e.path().filename().string().rfind("out", 0), std::string::npos) << e.path();
  }
}

TEST_F(Cli, CheckPrintsExactFields) {
  Result r = sh("check scenario --seed 42 --prop " + q("Pr[<=300](<> " + kGoal + ")"));
  ASSERT_EQ(r.code, 0);
  auto j = nlohmann::json::parse(r.out);
  std::vector<std::string> keys;
  for (auto it = j.begin(); it != j.end(); ++it) keys.push_back(it.key());
  std::sort(keys.begin(), keys.end());
  EXPECT_EQ(keys, (std::vector<std::string>{"N", "alpha", "ci_hi", "ci_lo", "epsilon", "k", "p_hat",
                                            "seed", "t_s"}));
  EXPECT_LE(j["p_hat"].get<double>(), 0.05);
  EXPECT_EQ(j["N"], 738);
  EXPECT_EQ(j["seed"], 42);

  r = sh("check scenario --seed 1 --epsilon 0.1 --prop " + q("Pr[<=300](<> true)"));
  ASSERT_EQ(r.code, 0);
  EXPECT_EQ(nlohmann::json::parse(r.out)["p_hat"], 1.0);
}

TEST_F(Cli, MalformedPropertyReportsPosition) {
  Result r =
      sh("check scenario --seed 1 --prop " + q("Pr[<=300](<> Human.passed_out &&)"), "", true);
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.out.find("1:"), std::string::npos) << r.out;
  EXPECT_EQ(sh("check scenario --seed 1 --prop " + q("Pr[<=300](<> Robot.nowhere)")).code, 1);
  EXPECT_EQ(sh("check scenario --seed 1 --prop " + q("Pr[<=0](<> true)")).code, 1);
}

TEST_F(Cli, SingleBoundSweepEqualsCheck) {
  Result c = sh("check scenario --seed 8 --epsilon 0.1 --prop " + q("Pr[<=1800](<> " + kGoal + ")"));
  Result s = sh("sweep scenario --seed 8 --epsilon 0.1 --bounds 1800 --prop-goal " + q(kGoal));
  ASSERT_EQ(c.code, 0);
  ASSERT_EQ(s.code, 0);
  auto j = nlohmann::json::parse(c.out);
  std::istringstream lines(s.out);
  std::string header, row, extra;
  std::getline(lines, header);
  std::getline(lines, row);
  EXPECT_FALSE(std::getline(lines, extra));
  EXPECT_EQ(header, "t_s,p_hat,ci_lo,ci_hi,k,N");
  std::vector<std::string> f;
  std::stringstream rs(row);
  std::string cell;
  while (std::getline(rs, cell, ',')) f.push_back(cell);
  ASSERT_EQ(f.size(), 6u);
  EXPECT_DOUBLE_EQ(std::stod(f[0]), j["t_s"].get<double>());
  EXPECT_NEAR(std::stod(f[1]), j["p_hat"].get<double>(), 1e-8);
  EXPECT_NEAR(std::stod(f[2]), j["ci_lo"].get<double>(), 1e-8);
  EXPECT_NEAR(std::stod(f[3]), j["ci_hi"].get<double>(), 1e-8);
  EXPECT_EQ(std::stoull(f[4]), j["k"].get<std::uint64_t>());
  EXPECT_EQ(std::stoull(f[5]), j["N"].get<std::uint64_t>());
}

TEST_F(Cli, SweepRowsAndThreadIndependence) {
  std::string args = "sweep scenario --seed 3 --epsilon 0.1 --bounds 300:7200:300 --prop-goal " +
                     q(kGoal) + " --out ";
  ASSERT_EQ(sh(args + at("a"), "HYSMC_THREADS=1").code, 0);
  ASSERT_EQ(sh(args + at("b"), "HYSMC_THREADS=4").code, 0);
  std::string csv = slurp(at("a_sweep.csv"));
  EXPECT_EQ(csv, slurp(at("b_sweep.csv")));
  std::istringstream lines(csv);
  std::string line;
  std::getline(lines, line);
  int rows = 0;
  double prev = -1;
  while (std::getline(lines, line)) {
    ++rows;
    double p = std::stod(line.substr(line.find(',') + 1));
    EXPECT_GE(p, prev);
    prev = p;
  }
  EXPECT_EQ(rows, 24);
  ASSERT_EQ(sh("replay " + at("a_manifest.json") + " --out " + at("c")).code, 0);
  EXPECT_EQ(slurp(at("c_sweep.csv")), csv);
}

TEST_F(Cli, DumpModelMatchesShippedFiles) {
  Result r = sh("--dump-model scenario");
  ASSERT_EQ(r.code, 0);
  EXPECT_EQ(r.out, slurp(std::string(HYSMC_SOURCE_DIR) + "/models/scenario.hynet"));
  r = sh("--dump-model scenario-controller");
  ASSERT_EQ(r.code, 0);
  EXPECT_EQ(r.out, slurp(std::string(HYSMC_SOURCE_DIR) + "/models/scenario_controller.hynet"));
  EXPECT_EQ(sh("--dump-model nothing").code, 2);
}
