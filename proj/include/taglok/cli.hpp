#pragma once
/**
 * @file cli.hpp
 * @brief `taglok` command line: map-build, run, compare, replay, dump-detections.
 *
 * Exit codes: 0 success, 1 usage error (nothing written), 2 runtime failure.
 * Output files are produced in memory and written only once the command has
 * succeeded.
 */

#include "taglok/config.hpp"
#include "taglok/harness.hpp"
#include "taglok/serialize.hpp"

#include <CLI11.hpp>

#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace taglok::cli {

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct Options {
  std::string config;
  std::string out;
  std::string map;
  std::string log;
  std::string plot;
  std::string detections;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> frames;
  std::vector<std::string> variants;
  double width = 3.0;
  double height = 5.0;
  unsigned threads = 0;
};

namespace detail {

inline ExperimentConfig load(const Options& o) {
  ExperimentConfig cfg = o.config.empty() ? ExperimentConfig{} : load_run_config(o.config);
  if (o.seed) cfg.seed = *o.seed;
  if (!o.map.empty()) cfg.map_file = o.map;
  if (o.frames) cfg.frames = *o.frames;
  return cfg;
}

inline PipelineConfig apply_variants(const std::vector<std::string>& variants, PipelineConfig p) {
  for (const auto& v : variants) {
    try {
      p = parse_variant(v, p);
    } catch (const std::invalid_argument& e) {
      throw UsageError(std::string("--variant: ") + e.what());
    }
  }
  return p;
}

inline void write_file(const std::string& path, const std::string& content) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open " + path + " for writing");
  f << content;
  if (!f) throw std::runtime_error("write failed for " + path);
}

using Outputs = std::vector<std::pair<std::string, std::string>>;  // path, content

inline Outputs cmd_map_build(const Options& o) {
  ExperimentConfig cfg = o.config.empty() ? ExperimentConfig{} : load_run_config(o.config);
  Extent extent = cfg.map_extent;
  if (o.config.empty()) extent = {o.width, o.height};
  const TagMap map = build_pattern_map(extent, PatternSpec::default_tile());
  return {{o.out, serialize_map(map)}};
}

inline Outputs cmd_run(const Options& o, std::ostream& out) {
  ExperimentConfig cfg = load(o);
  cfg.pipeline = apply_variants(o.variants, cfg.pipeline);
  const TagMap map = make_map(cfg);
  const RunConfig rc = make_run_config(cfg, map);
  const RunResult r = run(rc);

  ComparisonTable t;
  t.scenarios = {rc.trajectory.label};
  t.variants = {variant_name(rc.pipeline)};
  t.cells = {{r.stats}};
  for (const auto& ph : r.per_phase) {
    t.scenarios.push_back(rc.trajectory.label + ":" + ph.phase);
    t.cells.push_back({ph.stats});
  }
  Outputs files;
  if (o.out.empty()) out << comparison_csv(t);
  else files.emplace_back(o.out, comparison_csv(t));
  if (!o.log.empty()) files.emplace_back(o.log, frames_jsonl(r));
  if (!o.plot.empty()) files.emplace_back(o.plot, timeseries_csv(r));
  return files;
}

inline Outputs cmd_compare(const Options& o) {
  ExperimentConfig cfg = load(o);
  if (!cfg.seed) throw UsageError("compare: a seed is required ([run] seed or --seed)");
  std::vector<std::string> names = o.variants.empty() ? cfg.variants : o.variants;
  std::vector<Variant> variants;
  try {
    variants = make_variants(names, cfg.pipeline);
  } catch (const std::invalid_argument& e) {
    throw UsageError(std::string("variant: ") + e.what());
  }
  const TagMap map = make_map(cfg);
  const RunConfig base = make_run_config(cfg, map);
  const ComparisonTable t = compare_matrix(base, make_scenarios(cfg), variants, o.threads);
  return {{o.out, comparison_csv(t)}};
}

inline Outputs cmd_dump(const Options& o, std::ostream& out) {
  const ExperimentConfig cfg = load(o);
  const TagMap map = make_map(cfg);
  const RunConfig rc = make_run_config(cfg, map);
  NoiseModel noise = rc.noise;
  noise.seed = rc.seed;
  std::string s = "# frame t id px py pz qw qx qy qz apparent_px\n";
  const std::size_t n = frame_count(rc);
  for (std::size_t k = 0; k < n; ++k) {
    const double t = static_cast<double>(k) / rc.sample_rate;
    for (const auto& d : detect(map, rc.camera, noise, body_pose(rc.trajectory.sample(t)), k))
      s += format_detection_line(k, t, d) + "\n";
  }
  if (o.out.empty()) {
    out << s;
    return {};
  }
  return {{o.out, s}};
}

inline Outputs cmd_replay(const Options& o, std::ostream& out) {
  ExperimentConfig cfg = load(o);
  cfg.pipeline = apply_variants(o.variants, cfg.pipeline);
  const TagMap map = make_map(cfg);
  cfg.pipeline.validate();
  std::ifstream f(o.detections);
  if (!f) throw std::runtime_error("cannot read detections " + o.detections);
  const auto frames = parse_detection_dump(f, o.detections);

  PipelineConfig p = cfg.pipeline;
  p.camera_in_body = cfg.camera.pose_in_body;
  VisualOdometry vo(p);
  std::string s = "frame,t,px,py,pz,qw,qx,qy,qz,tags_used,reason\n";
  for (const auto& fr : frames) {
    const EstimateOutput e = vo.step(fr.detections, map, fr.t);
    s += std::to_string(fr.frame) + "," + taglok::detail::format_double(fr.t);
    if (e.pose) {
      const UnitQuaternion q = e.pose->orientation.canonical();
      for (double v : {e.pose->position.x(), e.pose->position.y(), e.pose->position.z(), q.w(), q.x(), q.y(), q.z()})
        s += "," + taglok::detail::format_double(v);
    } else {
      s += ",,,,,,,";
    }
    s += "," + std::to_string(e.tags_used.size()) + "," + e.trace.reason + "\n";
  }
  if (o.out.empty()) {
    out << s;
    return {};
  }
  return {{o.out, s}};
}

}  // namespace detail

inline int run_cli(int argc, const char* const* argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  CLI::App app{"taglok: tag-map visual odometry simulator and experiment harness", "taglok"};
  app.require_subcommand(1);
  Options o;

  auto add_common = [&](CLI::App* sub, bool config_required) {
    auto* c = sub->add_option("--config", o.config, "Experiment config file");
    if (config_required) c->required();
    sub->add_option("--seed", o.seed, "Noise seed (overrides [run] seed)");
    sub->add_option("--map", o.map, "Tag map file (overrides the generated map)");
    sub->add_option("--frames", o.frames, "Maximum number of frames");
  };

  auto* map_build = app.add_subcommand("map-build", "Generate the default pattern map");
  map_build->add_option("--config", o.config, "Experiment config file ([map] width/height)");
  map_build->add_option("--out", o.out, "Output map file")->required();
  map_build->add_option("--width", o.width, "Map width [m] when no config is given");
  map_build->add_option("--height", o.height, "Map height [m] when no config is given");

  auto* run_cmd = app.add_subcommand("run", "Run one experiment and report error statistics");
  add_common(run_cmd, true);
  run_cmd->add_option("--out", o.out, "Statistics CSV (stdout when omitted)");
  run_cmd->add_option("--variant", o.variants, "Pipeline overrides: jbt|all|tbs, or|noor, w1|w2|uniform, ql2|cl2");
  run_cmd->add_option("--log", o.log, "Per-frame JSON-lines log");
  run_cmd->add_option("--plot", o.plot, "Time-series CSV t,ep_cm,eo_deg,tags_used");

  auto* compare = app.add_subcommand("compare", "Run the scenario x variant comparison matrix");
  add_common(compare, true);
  compare->add_option("--out", o.out, "Results CSV")->required();
  compare->add_option("--variant", o.variants, "Variants (replace [compare] variants)");
  compare->add_option("--threads", o.threads, "Worker threads (0 = hardware)");

  auto* replay = app.add_subcommand("replay", "Run the estimator over a recorded detection stream");
  add_common(replay, true);
  replay->add_option("--detections", o.detections, "Detection dump file")->required();
  replay->add_option("--out", o.out, "Estimates CSV (stdout when omitted)");
  replay->add_option("--variant", o.variants, "Pipeline overrides");

  auto* dump = app.add_subcommand("dump-detections", "Write the simulated detection stream");
  add_common(dump, true);
  dump->add_option("--out", o.out, "Dump file (stdout when omitted)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    app.exit(e, out, err);
    return 0;
  } catch (const CLI::ParseError& e) {
    app.exit(e, out, err);
    return 1;
  }

  detail::Outputs files;
  try {
    if (*map_build) files = detail::cmd_map_build(o);
    else if (*run_cmd) files = detail::cmd_run(o, out);
    else if (*compare) files = detail::cmd_compare(o);
    else if (*replay) files = detail::cmd_replay(o, out);
    else if (*dump) files = detail::cmd_dump(o, out);
  } catch (const UsageError& e) {
    err << "usage error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 2;
  }
  try {
    for (const auto& [path, content] : files) detail::write_file(path, content);
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}

}  // namespace taglok::cli
