#include "taglok/cli.hpp"

#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

using namespace taglok;
namespace fs = std::filesystem;

namespace {

struct Result {
  int code;
  std::string out;
  std::string err;
};

Result invoke(std::vector<std::string> args) {
  args.insert(args.begin(), "taglok");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = cli::run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

class CliTest : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::path(::testing::TempDir()) /
           ("taglok_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  std::string path(const std::string& name) const { return (dir_ / name).string(); }

  std::string write(const std::string& name, const std::string& content) const {
    std::ofstream(path(name)) << content;
    return path(name);
  }

  static std::string read(const std::string& p) {
    std::ifstream f(p);
    std::stringstream s;
    s << f.rdbuf();
    return s.str();
  }

  fs::path dir_;
};

const char* kSmall = R"([run]
seed = 9
frames = 10
[noise]
position_sigma_at_ref = 0.02
rotation_sigma_at_ref = 0.03
outlier_probability = 0.05
[compare]
variants = ["jbt", "all-noor", "tbs-or"]
[scenario.low]
z = 0.8
[scenario.high]
z = 2.0
)";

}  // namespace

TEST_F(CliTest, HelpExitsZero) {
  EXPECT_EQ(invoke({"--help"}).code, 0);
  EXPECT_EQ(invoke({"run", "--help"}).code, 0);
}

TEST_F(CliTest, UsageErrorsExitOneAndWriteNothing) {
  const std::string out = path("r.csv");
  EXPECT_EQ(invoke({}).code, 1);
  EXPECT_EQ(invoke({"frobnicate"}).code, 1);
  EXPECT_EQ(invoke({"compare", "--out", out}).code, 1);  // no --config
  EXPECT_EQ(invoke({"run", "--config", write("c", kSmall), "--seed", "abc"}).code, 1);
  const std::string noseed = write("noseed.toml", "[run]\nframes = 2\n");
  const Result r = invoke({"compare", "--config", noseed, "--out", out});
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.err.find("seed"), std::string::npos);
  EXPECT_EQ(invoke({"run", "--config", noseed, "--variant", "fastest"}).code, 1);
  EXPECT_FALSE(fs::exists(out));
}

TEST_F(CliTest, RuntimeErrorsExitTwo) {
  const std::string out = path("r.csv");
  EXPECT_EQ(invoke({"run", "--config", path("missing.toml"), "--out", out}).code, 2);
  const Result bad = invoke({"run", "--config", write("bad.toml", "[run]\nseed = x\n"), "--out", out});
  EXPECT_EQ(bad.code, 2);
  EXPECT_NE(bad.err.find("line 2: run.seed"), std::string::npos);
  EXPECT_EQ(invoke({"run", "--config", write("c", kSmall), "--map", path("none.map"), "--out", out}).code, 2);
  EXPECT_FALSE(fs::exists(out));
}

TEST_F(CliTest, CompareMatchesLibraryAndIsStable) {
  const std::string cfg = write("c.toml", kSmall);
  ASSERT_EQ(invoke({"compare", "--config", cfg, "--out", path("a.csv")}).code, 0);
  ASSERT_EQ(invoke({"compare", "--config", cfg, "--out", path("b.csv"), "--threads", "1"}).code, 0);
  const std::string a = read(path("a.csv"));
  EXPECT_EQ(a, read(path("b.csv")));

  const ExperimentConfig c = load_run_config(cfg);
  const TagMap map = make_map(c);
  const std::string lib =
      comparison_csv(compare_matrix(make_run_config(c, map), make_scenarios(c), make_variants(c.variants, c.pipeline), 2));
  EXPECT_EQ(a, lib);
  std::istringstream lines(a);
  std::string line;
  int n = 0;
  while (std::getline(lines, line)) ++n;
  EXPECT_EQ(n, 1 + 2 * 3);
  EXPECT_EQ(a.substr(0, a.find('\n')), "scenario,variant,ep_mnv_cm,ep_std_cm,eo_mnv_deg,eo_std_deg,frames,dropped");
}

TEST_F(CliTest, SeedFlagOverridesConfig) {
  const std::string cfg = write("c.toml", kSmall);
  ASSERT_EQ(invoke({"compare", "--config", cfg, "--out", path("a.csv")}).code, 0);
  ASSERT_EQ(invoke({"compare", "--config", cfg, "--out", path("b.csv"), "--seed", "10"}).code, 0);
  EXPECT_NE(read(path("a.csv")), read(path("b.csv")));
}

TEST_F(CliTest, RunWritesStatsLogAndPlot) {
  const std::string cfg = write("c.toml", "[run]\nseed = 4\n[trajectory]\nkind = t1\n");
  const Result r = invoke({"run", "--config", cfg, "--frames", "30", "--log", path("log.jsonl"), "--plot", path("p.csv")});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("T1,tbs-or-w2-ql2,"), std::string::npos);
  EXPECT_NE(r.out.find("T1:F,"), std::string::npos);
  const std::string log = read(path("log.jsonl"));
  EXPECT_EQ(std::count(log.begin(), log.end(), '\n'), 30);
  const std::string plot = read(path("p.csv"));
  EXPECT_EQ(plot.substr(0, plot.find('\n')), "t,ep_cm,eo_deg,tags_used");
  EXPECT_EQ(std::count(plot.begin(), plot.end(), '\n'), 31);
  const Result v = invoke({"run", "--config", cfg, "--frames", "5", "--variant", "jbt"});
  EXPECT_NE(v.out.find("T1,jbt-or-w2-ql2,"), std::string::npos);
}

TEST_F(CliTest, MapBuild) {
  ASSERT_EQ(invoke({"map-build", "--out", path("m.map"), "--width", "2", "--height", "2"}).code, 0);
  const TagMap m = load_map(path("m.map"));
  EXPECT_EQ(m.size(), 4u * 23u);
  ASSERT_EQ(invoke({"map-build", "--config", write("c.toml", "[map]\nwidth = 3\nheight = 1\n"), "--out", path("n.map")}).code,
            0);
  EXPECT_EQ(load_map(path("n.map")).size(), 3u * 23u);
  EXPECT_EQ(invoke({"map-build"}).code, 1);
}

TEST_F(CliTest, DumpThenReplayReproducesRun) {
  const std::string cfg = write("c.toml", "[run]\nseed = 2\nframes = 12\n[noise]\nposition_sigma_at_ref = 0.02\n");
  ASSERT_EQ(invoke({"dump-detections", "--config", cfg, "--out", path("d.txt")}).code, 0);
  const Result rep = invoke({"replay", "--config", cfg, "--detections", path("d.txt")});
  ASSERT_EQ(rep.code, 0) << rep.err;

  const ExperimentConfig c = load_run_config(cfg);
  const TagMap map = make_map(c);
  const RunResult r = run(make_run_config(c, map));
  std::istringstream lines(rep.out);
  std::string line;
  std::getline(lines, line);
  EXPECT_EQ(line, "frame,t,px,py,pz,qw,qx,qy,qz,tags_used,reason");
  for (const auto& f : r.frames) {
    ASSERT_TRUE(std::getline(lines, line));
    ASSERT_TRUE(f.estimate.pose);
    std::vector<std::string> cells;
    std::stringstream ls(line);
    std::string cell;
    while (std::getline(ls, cell, ',')) cells.push_back(cell);
    ASSERT_GE(cells.size(), 10u);
    EXPECT_EQ(std::stoull(cells[0]), f.index);
    // The dump stores full precision, so the replayed estimate matches to rounding.
    EXPECT_NEAR(std::stod(cells[2]), f.estimate.pose->position.x(), 1e-12);
    EXPECT_NEAR(std::stod(cells[4]), f.estimate.pose->position.z(), 1e-12);
    EXPECT_EQ(std::stoul(cells[9]), f.estimate.tags_used.size());
  }
  EXPECT_EQ(invoke({"replay", "--config", cfg, "--detections", path("nope.txt")}).code, 2);
}
