#include "taglok/config.hpp"
#include "taglok/serialize.hpp"

#include <gtest/gtest.h>

#include <sstream>

using namespace taglok;

namespace {

ExperimentConfig parse(const std::string& text) {
  std::istringstream in(text);
  return parse_config(in);
}

std::string config_error(const std::string& text) {
  try {
    parse(text);
  } catch (const ConfigError& e) {
    return e.what();
  }
  return "";
}

}  // namespace

TEST(Config, EmptyFileGivesDefaults) {
  const ExperimentConfig c = parse("");
  EXPECT_FALSE(c.seed);
  EXPECT_EQ(c.map_extent, (Extent{3, 5}));
  EXPECT_EQ(c.pipeline, PipelineConfig{});
  EXPECT_EQ(c.trajectory.kind, "hover");
  EXPECT_EQ(c.noise, NoiseModel::none());
}

TEST(Config, ParsesEverySection) {
  const ExperimentConfig c = parse(R"(
# comment
[run]
seed = 42
sample_rate = 30
frames = 100

[map]
width = 4
height = 6

[camera]
focal_px = 500
min_apparent_px = 10   # trailing comment

[noise]
position_sigma_at_ref = 0.02
outlier_probability = 0.05

[pipeline]
ths = "jbt"
outlier_removal = false
weights = W1
rot_mean = cl2
fir_length = 3

[trajectory]
kind = t3
waypoints = "wp # not a comment.txt"
speed = 0.5

[compare]
variants = ["jbt", "all-noor", "tbs-or"]

[scenario.XL]
kind = hover
x = 1.5
y = 2.5
z = 2.0
)");
  EXPECT_EQ(c.seed, 42u);
  EXPECT_EQ(c.sample_rate, 30.0);
  EXPECT_EQ(c.frames, 100u);
  EXPECT_EQ(c.map_extent, (Extent{4, 6}));
  EXPECT_EQ(c.camera.focal_px, 500.0);
  EXPECT_EQ(c.camera.min_apparent_px, 10.0);
  EXPECT_EQ(c.noise.position_sigma_at_ref, 0.02);
  EXPECT_EQ(c.pipeline.ths, ThsMode::JBT);
  EXPECT_FALSE(c.pipeline.outlier_removal);
  EXPECT_EQ(c.pipeline.weights, WeightScheme::W1);
  EXPECT_EQ(c.pipeline.rot_mean, RotMeanMethod::CL2);
  EXPECT_EQ(c.pipeline.fir_length, 3);
  EXPECT_EQ(c.trajectory.kind, "t3");
  EXPECT_EQ(c.trajectory.waypoints, "wp # not a comment.txt");
  EXPECT_EQ(c.trajectory.speed, 0.5);
  EXPECT_EQ(c.variants, (std::vector<std::string>{"jbt", "all-noor", "tbs-or"}));
  ASSERT_EQ(c.scenarios.size(), 1u);
  EXPECT_EQ(c.scenarios[0].name, "XL");
  EXPECT_EQ(c.scenarios[0].trajectory.z, 2.0);
}

TEST(Config, ErrorsNameLineAndField) {
  EXPECT_EQ(config_error("[run]\nseed = -1\n"), "line 2: run.seed: must be >= 0");
  EXPECT_EQ(config_error("[pipeline]\nths = best\n"), "line 2: pipeline.ths: expected one of jbt|all|tbs, got 'best'");
  EXPECT_EQ(config_error("[pipeline]\nfir_length = 0\n"), "line 2: pipeline.fir_length: must be >= 1");
  EXPECT_EQ(config_error("[map]\nwidth = wide\n"), "line 2: map.width: expected a number, got 'wide'");
  EXPECT_EQ(config_error("[map]\nwidth = 3\nwidth = 4\n"), "line 3: map.width: duplicate key");
  EXPECT_EQ(config_error("[mapp]\n"), "line 1: unknown section [mapp]");
  EXPECT_EQ(config_error("[run]\n[run]\n"), "line 2: duplicate section [run]");
  EXPECT_EQ(config_error("[run]\nspeed = 1\n"), "line 2: run.speed: unknown key");
  EXPECT_EQ(config_error("seed = 1\n"), "line 1: seed: key outside of any section");
  EXPECT_EQ(config_error("[run]\nseed\n"), "line 2: expected 'key = value'");
  EXPECT_EQ(config_error("[trajectory]\nkind = t9\n"), "line 2: trajectory.kind: expected hover, t1, t2 or t3");
  EXPECT_EQ(config_error("[noise]\noutlier_probability = 2\n"), "line 2: noise.outlier_probability: must be in [0, 1]");
  EXPECT_EQ(config_error("[camera]\nbody_qw = 0\nbody_qx = 0\n"), "line 3: camera.body_q*: zero quaternion");
  EXPECT_NE(config_error("[compare]\nvariants = [\"jbt\", \"fast\"]\n").find("unknown variant token 'fast'"),
            std::string::npos);
}

TEST(Config, SaveParseRoundTrip) {
  ExperimentConfig c;
  c.seed = 123456789012345ULL;
  c.sample_rate = 25;
  c.frames = 17;
  c.map_extent = {2, 4};
  c.map_file = "floor.map";
  c.camera.focal_px = 612.5;
  c.camera.pose_in_body = {Vector3(0.05, -0.01, 0.02), UnitQuaternion(0.1, 0.98, 0.05, -0.03)};
  c.noise = NoiseModel::benchmark();
  c.noise.size_exponent = 1.5;
  c.pipeline.ths = ThsMode::ALL;
  c.pipeline.weights = WeightScheme::UNIFORM;
  c.pipeline.iqr_gain = 1.0 / 3.0;
  c.pipeline.camera_in_body = c.camera.pose_in_body;
  c.trajectory.kind = "t1";
  c.trajectory.speed = 0.1;
  c.trajectory.x = 2.0;
  c.variants = {"jbt", "tbs-or-w1-cl2"};
  c.scenarios = {{"a", {}}, {"b", {}}};
  c.scenarios[1].trajectory.yaw_deg = 33.3;
  const ExperimentConfig back = parse(save_config(c));
  EXPECT_EQ(save_config(back), save_config(c));
  EXPECT_EQ(back, c);
}

TEST(Config, Materialize) {
  ExperimentConfig c = parse("[run]\nseed = 3\nframes = 5\n[trajectory]\nkind = t2\n");
  const TagMap map = make_map(c);
  const RunConfig r = make_run_config(c, map);
  EXPECT_EQ(r.trajectory.label, "T2");
  EXPECT_EQ(r.seed, 3u);
  EXPECT_EQ(frame_count(r), 5u);
  EXPECT_EQ(map.size(), 15u * 23u);
  c.map_file = std::string(TAGLOK_TEST_DATA) + "/two_tags.map";
  EXPECT_EQ(make_map(c).size(), 2u);
  c.trajectory.kind = "t3";
  c.trajectory.waypoints = std::string(TAGLOK_TEST_DATA) + "/t3_waypoints.txt";
  EXPECT_EQ(make_trajectory(c.trajectory).knot_times.size(), 5u);
}

TEST(Config, VariantNames) {
  EXPECT_EQ(variant_name(PipelineConfig{}), "tbs-or-w2-ql2");
  EXPECT_EQ(variant_name(parse_variant("jbt-noor-uniform-cl2", {})), "jbt-noor-uniform-cl2");
  const auto v = make_variants({"jbt", "new"}, PipelineConfig{});
  EXPECT_EQ(v[0].pipeline.ths, ThsMode::JBT);
  EXPECT_EQ(v[1].name, "new");
}

TEST(Serialize, FrameLogJson) {
  ExperimentConfig c = parse("[run]\nseed = 1\nframes = 2\n[noise]\nposition_sigma_at_ref = 0.01\n");
  const TagMap map = make_map(c);
  const RunResult r = run(make_run_config(c, map));
  const std::string jl = frames_jsonl(r);
  std::istringstream in(jl);
  std::string line;
  int n = 0;
  while (std::getline(in, line)) {
    const auto j = nlohmann::json::parse(line);
    EXPECT_EQ(j["frame"].get<int>(), n);
    EXPECT_TRUE(j.contains("trace"));
    EXPECT_EQ(j["pose"]["q"].size(), 4u);
    EXPECT_GT(j["trace"]["selected"].size(), 0u);
    ++n;
  }
  EXPECT_EQ(n, 2);
}
