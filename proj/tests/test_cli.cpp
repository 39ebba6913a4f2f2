#include <gtest/gtest.h>
#include <sys/wait.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "pfsddp/pfsddp.hpp"

using namespace pfsddp;
namespace fs = std::filesystem;

namespace {

class Cli : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() /
           ("pfsddp_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  std::string path(const std::string& name) const { return (dir_ / name).string(); }

  // Runs the CLI, returns its exit code and leaves stdout in `out`.
  int cli(const std::string& args) {
    const std::string cmd = std::string(PFSDDP_CLI_PATH) + " " + args + " >" + path("stdout.txt") + " 2>" +
                            path("stderr.txt");
    const int status = std::system(cmd.c_str());
    out = slurp(path("stdout.txt"));
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  }

  static std::string slurp(const std::string& p) {
    std::ifstream in(p);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
  }

  std::string out;
  fs::path dir_;
};

std::string strip_timing(const std::string& report) {
  auto j = nlohmann::json::parse(report);
  j.erase("wall_time");
  for (auto& it : j["iterations"]) it.erase("wall_time");
  return j.dump();
}

}  // namespace

TEST_F(Cli, GenerateFixtureWithOracle) {
  ASSERT_EQ(cli("generate --fixture toy_infeasible --oracle --out " + path("i.json")), 0);
  EXPECT_NE(out.find("V*=2 C*=50"), std::string::npos) << out;
  const Instance inst = load_instance(slurp(path("i.json")));
  EXPECT_EQ(inst.T, 3);
}

TEST_F(Cli, GenerateWritesSystem) {
  ASSERT_EQ(cli("generate --reservoirs 2 --stages 3 --realizations 2 --seed 4 --out " + path("g.json") +
                " --system-out " + path("sys.json")),
            0);
  const auto sys = hydro::system_from_json(nlohmann::json::parse(slurp(path("sys.json"))));
  EXPECT_EQ(save_instance(hydro::compile(sys)), slurp(path("g.json")));
}

TEST_F(Cli, SolveAndSimulate) {
  ASSERT_EQ(cli("generate --fixture toy_infeasible --out " + path("i.json")), 0);
  ASSERT_EQ(cli("solve --instance " + path("i.json") + " --gap 1e-7 --policy-out " + path("p.json") +
                " --report-out " + path("r.json") + " --log-out " + path("log.txt")),
            0);
  EXPECT_NE(out.find("status=gap_and_feas_stable"), std::string::npos) << out;
  EXPECT_NE(out.find("cost=50"), std::string::npos) << out;
  EXPECT_EQ(slurp(path("log.txt")).rfind("# iteration", 0), 0u);
  ASSERT_EQ(cli("simulate --instance " + path("i.json") + " --policy " + path("p.json")), 0);
  EXPECT_NE(out.find("min_outflow:0"), std::string::npos);
  ASSERT_EQ(cli("simulate --instance " + path("i.json") + " --policy " + path("p.json") + " --out " +
                path("sim.json")),
            0);
  const auto sim = nlohmann::json::parse(slurp(path("sim.json")));
  EXPECT_NEAR(sim["violation_by_label"]["min_outflow:0"].get<double>(), 2.0, 1e-6);
}

TEST_F(Cli, BadInputExitCodes) {
  EXPECT_EQ(cli("solve --instance " + path("missing.json")), 2);
  EXPECT_EQ(cli("solve --bogus-flag"), 2);
  EXPECT_EQ(cli("generate --fixture toy_nothing --out " + path("x.json")), 2);
  ASSERT_EQ(cli("generate --fixture toy_feasible --out " + path("f.json")), 0);
  EXPECT_EQ(cli("simulate --instance " + path("f.json") + " --policy " + path("nope.json")), 2);
  std::ofstream(path("junk.json")) << "{ not json";
  EXPECT_EQ(cli("solve --instance " + path("junk.json")), 2);
}

TEST_F(Cli, TreeTooLargeExitCode) {
  EXPECT_EQ(cli("generate --stages 12 --realizations 3 --oracle --out " + path("big.json")), 3);
}

TEST_F(Cli, MaxItersExitCode) {
  ASSERT_EQ(cli("generate --fixture toy_stochastic --out " + path("s.json")), 0);
  EXPECT_EQ(cli("solve --instance " + path("s.json") + " --max-iters 1 --gap 1e-7"), 4);
  EXPECT_NE(out.find("status=max_iters"), std::string::npos) << out;
}

TEST_F(Cli, StructuralExitCode) {
  hydro::HydroSystem sys = hydro::fixture_systems().at("toy_feasible");
  sys.demand[1] = 100.0;
  std::ofstream(path("bad.json")) << save_instance(hydro::compile(sys));
  EXPECT_EQ(cli("solve --instance " + path("bad.json")), 5);
  EXPECT_NE(slurp(path("stderr.txt")).find("stage 2"), std::string::npos);
}

TEST_F(Cli, CompareReport) {
  ASSERT_EQ(cli("generate --fixture toy_stochastic --out " + path("s.json")), 0);
  ASSERT_EQ(cli("compare --instance " + path("s.json") + " --gap 1e-7 --classic-penalty 1 --table --out " +
                path("c.json")),
            0);
  EXPECT_NE(out.find("operation_cost"), std::string::npos);
  const auto j = nlohmann::json::parse(slurp(path("c.json")));
  EXPECT_EQ(j["format"], "pfsddp-compare-report");
  ASSERT_EQ(j["methods"].size(), 3u);
  for (const auto& m : j["methods"]) {
    if (m["method"] == "classic") EXPECT_NEAR(m["violation_cost"].get<double>(), 1.0, 1e-6);
    if (m["method"] == "penalty_free") EXPECT_NEAR(m["violation_cost"].get<double>(), 0.0, 1e-6);
  }
}

TEST_F(Cli, ReportsIdenticalAcrossRunsAndThreads) {
  ASSERT_EQ(cli("generate --reservoirs 2 --stages 4 --realizations 3 --tightness 0.7 --seed 3 --out " +
                path("g.json")),
            0);
  std::vector<std::string> reports;
  for (const char* threads : {"1", "1", "4"}) {
    const std::string r = path(std::string("r") + std::to_string(reports.size()) + ".json");
    const int code = cli("solve --instance " + path("g.json") + " --threads " + threads + " --report-out " + r);
    ASSERT_TRUE(code == 0 || code == 4);
    reports.push_back(strip_timing(slurp(r)));
  }
  EXPECT_EQ(reports[0], reports[1]);
  EXPECT_EQ(reports[0], reports[2]);
}
