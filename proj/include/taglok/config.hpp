#pragma once
/**
 * @file config.hpp
 * @brief Experiment configuration files.
 *
 * Flat TOML-style text: `key = value` lines grouped under `[section]`
 * headers, `#` comments. Sections: run, map, camera, noise, pipeline,
 * trajectory, compare and any number of `[scenario.NAME]` blocks (same keys
 * as trajectory). Unknown sections and keys are rejected. An empty file gives
 * the default experiment: hover at 0.8 m over the 3 m x 5 m default map,
 * estimated with TBS + OR + W2 + QL2 and a 5-tap FIR.
 */

#include "taglok/harness.hpp"
#include "taglok/tagmap.hpp"

#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

namespace taglok {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct TrajectorySpec {
  std::string kind = "hover";  ///< hover | t1 | t2 | t3
  std::optional<double> x, y, z;
  double yaw_deg = 0.0;
  double duration = 10.0;        ///< hover only [s]
  std::optional<double> speed;   ///< t1 / t3 [m/s]
  std::string waypoints;         ///< t3 waypoint file; empty = built-in set

  bool operator==(const TrajectorySpec&) const = default;
};

struct ScenarioSpec {
  std::string name;
  TrajectorySpec trajectory;

  bool operator==(const ScenarioSpec&) const = default;
};

struct ExperimentConfig {
  std::optional<std::uint64_t> seed;
  double sample_rate = 20.0;
  std::size_t frames = 0;  ///< 0 = whole trajectory
  Extent map_extent{3.0, 5.0};
  std::string map_file;  ///< when set, replaces the generated map
  CameraModel camera;
  NoiseModel noise;
  PipelineConfig pipeline;
  TrajectorySpec trajectory;
  std::vector<std::string> variants;
  std::vector<ScenarioSpec> scenarios;

  bool operator==(const ExperimentConfig&) const = default;
};

namespace detail {

inline std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

inline std::string unquote(std::string s) {
  s = trim(s);
  if (s.size() >= 2 && ((s.front() == '"' && s.back() == '"') || (s.front() == '\'' && s.back() == '\'')))
    return s.substr(1, s.size() - 2);
  return s;
}

/// Strips a trailing `#` comment that is not inside quotes.
inline std::string strip_comment(const std::string& line) {
  char quote = 0;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quote) {
      if (c == quote) quote = 0;
    } else if (c == '"' || c == '\'') {
      quote = c;
    } else if (c == '#') {
      return line.substr(0, i);
    }
  }
  return line;
}

struct ConfigValue {
  std::string text;
  int line = 0;
};

class ValueReader {
 public:
  ValueReader(std::string field, const ConfigValue& v) : field_(std::move(field)), v_(v) {}

  double number() const {
    const std::string s = unquote(v_.text);
    std::size_t used = 0;
    double out = 0.0;
    try {
      out = std::stod(s, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (s.empty() || used != s.size() || !std::isfinite(out)) fail("expected a number, got '" + s + "'");
    return out;
  }

  double positive() const {
    const double d = number();
    if (!(d > 0.0)) fail("must be > 0");
    return d;
  }

  double non_negative() const {
    const double d = number();
    if (!(d >= 0.0)) fail("must be >= 0");
    return d;
  }

  long long integer() const {
    const std::string s = unquote(v_.text);
    std::size_t used = 0;
    long long out = 0;
    try {
      out = std::stoll(s, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (s.empty() || used != s.size()) fail("expected an integer, got '" + s + "'");
    return out;
  }

  std::uint64_t unsigned_integer() const {
    const long long v = integer();
    if (v < 0) fail("must be >= 0");
    return static_cast<std::uint64_t>(v);
  }

  bool boolean() const {
    const std::string s = unquote(v_.text);
    if (s == "true" || s == "on" || s == "yes") return true;
    if (s == "false" || s == "off" || s == "no") return false;
    fail("expected true/false, got '" + s + "'");
  }

  std::string string() const { return unquote(v_.text); }

  std::vector<std::string> list() const {
    std::string s = trim(v_.text);
    if (!s.empty() && s.front() == '[') {
      if (s.back() != ']') fail("unterminated list");
      s = s.substr(1, s.size() - 2);
    }
    std::vector<std::string> out;
    std::string item;
    std::istringstream is(s);
    while (std::getline(is, item, ',')) {
      item = unquote(item);
      if (!item.empty()) out.push_back(item);
    }
    return out;
  }

  [[noreturn]] void fail(const std::string& what) const {
    throw ConfigError("line " + std::to_string(v_.line) + ": " + field_ + ": " + what);
  }

 private:
  std::string field_;
  const ConfigValue& v_;
};

inline void apply_trajectory_key(TrajectorySpec& t, const std::string& key, const ValueReader& r) {
  if (key == "kind") {
    t.kind = r.string();
    if (t.kind != "hover" && t.kind != "t1" && t.kind != "t2" && t.kind != "t3")
      r.fail("expected hover, t1, t2 or t3");
  } else if (key == "x") t.x = r.number();
  else if (key == "y") t.y = r.number();
  else if (key == "z") t.z = r.number();
  else if (key == "yaw_deg") t.yaw_deg = r.number();
  else if (key == "duration") t.duration = r.positive();
  else if (key == "speed") t.speed = r.positive();
  else if (key == "waypoints") t.waypoints = r.string();
  else r.fail("unknown key");
}

template <typename E>
E parse_enum(const ValueReader& r, std::initializer_list<std::pair<const char*, E>> options) {
  std::string s = r.string();
  for (auto& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  for (const auto& [name, value] : options)
    if (s == name) return value;
  std::string names;
  for (const auto& o : options) names += (names.empty() ? "" : "|") + std::string(o.first);
  r.fail("expected one of " + names + ", got '" + s + "'");
}

inline std::string fmt(double v) { return detail::format_double(v); }

}  // namespace detail

inline std::string_view ths_name(ThsMode m) {
  switch (m) {
    case ThsMode::JBT: return "jbt";
    case ThsMode::ALL: return "all";
    case ThsMode::TBS: return "tbs";
  }
  return "?";
}

inline std::string_view weights_name(WeightScheme w) {
  switch (w) {
    case WeightScheme::W1: return "w1";
    case WeightScheme::W2: return "w2";
    case WeightScheme::UNIFORM: return "uniform";
  }
  return "?";
}

inline std::string_view rot_mean_name(RotMeanMethod m) { return m == RotMeanMethod::QL2 ? "ql2" : "cl2"; }

/// Short name such as "tbs-or-w2-ql2".
inline std::string variant_name(const PipelineConfig& p) {
  return std::string(ths_name(p.ths)) + (p.outlier_removal ? "-or-" : "-noor-") + std::string(weights_name(p.weights)) +
         "-" + std::string(rot_mean_name(p.rot_mean));
}

inline ExperimentConfig parse_config(std::istream& in) {
  using detail::ValueReader;
  ExperimentConfig cfg;
  std::string section;
  ScenarioSpec* scenario = nullptr;
  std::set<std::string> seen_sections, seen_keys;
  Vector4 body_q = cfg.camera.pose_in_body.orientation.coeffs();
  int body_q_line = 0;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    line = detail::trim(detail::strip_comment(line));
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']') throw ConfigError("line " + std::to_string(lineno) + ": malformed section header");
      section = detail::trim(line.substr(1, line.size() - 2));
      scenario = nullptr;
      static const std::set<std::string> known = {"run", "map", "camera", "noise", "pipeline", "trajectory", "compare"};
      if (section.rfind("scenario.", 0) == 0) {
        const std::string name = section.substr(9);
        if (name.empty() || name.find(',') != std::string::npos)
          throw ConfigError("line " + std::to_string(lineno) + ": bad scenario name '" + name + "'");
        cfg.scenarios.push_back({name, {}});
        scenario = &cfg.scenarios.back();
      } else if (!known.count(section)) {
        throw ConfigError("line " + std::to_string(lineno) + ": unknown section [" + section + "]");
      }
      if (!seen_sections.insert(section).second)
        throw ConfigError("line " + std::to_string(lineno) + ": duplicate section [" + section + "]");
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError("line " + std::to_string(lineno) + ": expected 'key = value'");
    const std::string key = detail::trim(line.substr(0, eq));
    const detail::ConfigValue value{detail::trim(line.substr(eq + 1)), lineno};
    const std::string field = section.empty() ? key : section + "." + key;
    const ValueReader r(field, value);
    if (section.empty()) r.fail("key outside of any section");
    if (!seen_keys.insert(field).second) r.fail("duplicate key");

    if (scenario) {
      detail::apply_trajectory_key(scenario->trajectory, key, r);
    } else if (section == "run") {
      if (key == "seed") cfg.seed = r.unsigned_integer();
      else if (key == "sample_rate") cfg.sample_rate = r.positive();
      else if (key == "frames") cfg.frames = r.unsigned_integer();
      else r.fail("unknown key");
    } else if (section == "map") {
      if (key == "width") cfg.map_extent.width = r.positive();
      else if (key == "height") cfg.map_extent.height = r.positive();
      else if (key == "file") cfg.map_file = r.string();
      else r.fail("unknown key");
    } else if (section == "camera") {
      auto& c = cfg.camera;
      if (key == "focal_px") c.focal_px = r.positive();
      else if (key == "cx") c.cx = r.number();
      else if (key == "cy") c.cy = r.number();
      else if (key == "width") c.width = static_cast<int>(r.positive());
      else if (key == "height") c.height = static_cast<int>(r.positive());
      else if (key == "frame_rate") c.frame_rate = r.positive();
      else if (key == "min_apparent_px") c.min_apparent_px = r.non_negative();
      else if (key == "body_x") c.pose_in_body.position.x() = r.number();
      else if (key == "body_y") c.pose_in_body.position.y() = r.number();
      else if (key == "body_z") c.pose_in_body.position.z() = r.number();
      else if (key.rfind("body_q", 0) == 0 && key.size() == 7 && std::string("wxyz").find(key[6]) != std::string::npos) {
        body_q[static_cast<Eigen::Index>(std::string("wxyz").find(key[6]))] = r.number();
        body_q_line = lineno;
      } else r.fail("unknown key");
    } else if (section == "noise") {
      auto& n = cfg.noise;
      if (key == "position_sigma_at_ref") n.position_sigma_at_ref = r.non_negative();
      else if (key == "rotation_sigma_at_ref") n.rotation_sigma_at_ref = r.non_negative();
      else if (key == "reference_apparent_size") n.reference_apparent_size = r.positive();
      else if (key == "size_exponent") n.size_exponent = r.number();
      else if (key == "outlier_probability") {
        n.outlier_probability = r.number();
        if (!(n.outlier_probability >= 0.0 && n.outlier_probability <= 1.0)) r.fail("must be in [0, 1]");
      } else if (key == "outlier_position_scale") n.outlier_position_scale = r.non_negative();
      else if (key == "outlier_rotation_scale") n.outlier_rotation_scale = r.non_negative();
      else r.fail("unknown key");
    } else if (section == "pipeline") {
      auto& p = cfg.pipeline;
      if (key == "ths") p.ths = detail::parse_enum<ThsMode>(r, {{"jbt", ThsMode::JBT}, {"all", ThsMode::ALL}, {"tbs", ThsMode::TBS}});
      else if (key == "outlier_removal") p.outlier_removal = r.boolean();
      else if (key == "iqr_gain") p.iqr_gain = r.positive();
      else if (key == "weights")
        p.weights = detail::parse_enum<WeightScheme>(
            r, {{"w1", WeightScheme::W1}, {"w2", WeightScheme::W2}, {"uniform", WeightScheme::UNIFORM}});
      else if (key == "rot_mean")
        p.rot_mean = detail::parse_enum<RotMeanMethod>(r, {{"ql2", RotMeanMethod::QL2}, {"cl2", RotMeanMethod::CL2}});
      else if (key == "fir_length") {
        const long long f = r.integer();
        if (f < 1) r.fail("must be >= 1");
        p.fir_length = static_cast<int>(f);
      } else r.fail("unknown key");
    } else if (section == "trajectory") {
      detail::apply_trajectory_key(cfg.trajectory, key, r);
    } else if (section == "compare") {
      if (key == "variants") {
        cfg.variants = r.list();
        for (const auto& v : cfg.variants) {
          try {
            parse_variant(v, cfg.pipeline);
          } catch (const std::invalid_argument& e) {
            r.fail(e.what());
          }
        }
      } else r.fail("unknown key");
    }
  }
  if (body_q_line) {
    if (!(body_q.norm() > 0.0))
      throw ConfigError("line " + std::to_string(body_q_line) + ": camera.body_q*: zero quaternion");
    cfg.camera.pose_in_body.orientation = UnitQuaternion(body_q);
  }
  cfg.pipeline.camera_in_body = cfg.camera.pose_in_body;
  return cfg;
}

inline ExperimentConfig load_run_config(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("cannot read config " + path);
  try {
    return parse_config(f);
  } catch (const ConfigError& e) {
    throw ConfigError(path + ": " + e.what());
  }
}

namespace detail {

inline void write_trajectory(std::string& out, const TrajectorySpec& t) {
  out += "kind = " + t.kind + "\n";
  if (t.x) out += "x = " + fmt(*t.x) + "\n";
  if (t.y) out += "y = " + fmt(*t.y) + "\n";
  if (t.z) out += "z = " + fmt(*t.z) + "\n";
  out += "yaw_deg = " + fmt(t.yaw_deg) + "\n";
  out += "duration = " + fmt(t.duration) + "\n";
  if (t.speed) out += "speed = " + fmt(*t.speed) + "\n";
  if (!t.waypoints.empty()) out += "waypoints = \"" + t.waypoints + "\"\n";
}

}  // namespace detail

/// Writes every field; parse_config(save_config(c)) == c.
inline std::string save_config(const ExperimentConfig& c) {
  using detail::fmt;
  std::string o = "[run]\n";
  if (c.seed) o += "seed = " + std::to_string(*c.seed) + "\n";
  o += "sample_rate = " + fmt(c.sample_rate) + "\n";
  o += "frames = " + std::to_string(c.frames) + "\n";
  o += "\n[map]\nwidth = " + fmt(c.map_extent.width) + "\nheight = " + fmt(c.map_extent.height) + "\n";
  if (!c.map_file.empty()) o += "file = \"" + c.map_file + "\"\n";
  const auto& cam = c.camera;
  const UnitQuaternion& q = cam.pose_in_body.orientation;
  o += "\n[camera]\nfocal_px = " + fmt(cam.focal_px) + "\ncx = " + fmt(cam.cx) + "\ncy = " + fmt(cam.cy) +
       "\nwidth = " + std::to_string(cam.width) + "\nheight = " + std::to_string(cam.height) +
       "\nframe_rate = " + fmt(cam.frame_rate) + "\nmin_apparent_px = " + fmt(cam.min_apparent_px) +
       "\nbody_x = " + fmt(cam.pose_in_body.position.x()) + "\nbody_y = " + fmt(cam.pose_in_body.position.y()) +
       "\nbody_z = " + fmt(cam.pose_in_body.position.z()) + "\nbody_qw = " + fmt(q.w()) + "\nbody_qx = " + fmt(q.x()) +
       "\nbody_qy = " + fmt(q.y()) + "\nbody_qz = " + fmt(q.z()) + "\n";
  const auto& n = c.noise;
  o += "\n[noise]\nposition_sigma_at_ref = " + fmt(n.position_sigma_at_ref) +
       "\nrotation_sigma_at_ref = " + fmt(n.rotation_sigma_at_ref) +
       "\nreference_apparent_size = " + fmt(n.reference_apparent_size) + "\nsize_exponent = " + fmt(n.size_exponent) +
       "\noutlier_probability = " + fmt(n.outlier_probability) +
       "\noutlier_position_scale = " + fmt(n.outlier_position_scale) +
       "\noutlier_rotation_scale = " + fmt(n.outlier_rotation_scale) + "\n";
  const auto& p = c.pipeline;
  o += "\n[pipeline]\nths = " + std::string(ths_name(p.ths)) +
       "\noutlier_removal = " + (p.outlier_removal ? "true" : "false") + "\niqr_gain = " + fmt(p.iqr_gain) +
       "\nweights = " + std::string(weights_name(p.weights)) + "\nrot_mean = " + std::string(rot_mean_name(p.rot_mean)) +
       "\nfir_length = " + std::to_string(p.fir_length) + "\n";
  o += "\n[trajectory]\n";
  detail::write_trajectory(o, c.trajectory);
  if (!c.variants.empty()) {
    o += "\n[compare]\nvariants = [";
    for (std::size_t i = 0; i < c.variants.size(); ++i) o += (i ? ", \"" : "\"") + c.variants[i] + "\"";
    o += "]\n";
  }
  for (const auto& s : c.scenarios) {
    o += "\n[scenario." + s.name + "]\n";
    detail::write_trajectory(o, s.trajectory);
  }
  return o;
}

// ---------------------------------------------------------------------------
// Materialization

inline Trajectory make_trajectory(const TrajectorySpec& t) {
  const double yaw = deg2rad(t.yaw_deg);
  if (t.kind == "hover")
    return hover_trajectory(Vector3(t.x.value_or(1.5), t.y.value_or(2.5), t.z.value_or(kHoverAltitudes[0])), yaw,
                            t.duration);
  if (t.kind == "t1") {
    SquareParams p;
    if (t.x) p.start.x() = *t.x;
    if (t.y) p.start.y() = *t.y;
    if (t.z) p.start.z() = *t.z;
    if (t.speed) p.speed = *t.speed;
    return square_trajectory_t1(p);
  }
  if (t.kind == "t2") {
    StepsParams p;
    if (t.x) p.x = *t.x;
    if (t.y) p.y = *t.y;
    return steps_trajectory_t2(p);
  }
  if (t.kind == "t3") {
    const auto w = t.waypoints.empty() ? default_t3_waypoints() : load_waypoints(t.waypoints);
    return spline_trajectory_t3(w, t.speed.value_or(0.3));
  }
  throw ConfigError("trajectory.kind: unknown kind '" + t.kind + "'");
}

inline TagMap make_map(const ExperimentConfig& c) {
  if (!c.map_file.empty()) return load_map(c.map_file);
  return build_pattern_map(c.map_extent, PatternSpec::default_tile());
}

/// Builds the runnable configuration; requires a seed (explicit or defaulted by the caller).
inline RunConfig make_run_config(const ExperimentConfig& c, const TagMap& map) {
  c.camera.validate();
  c.noise.validate();
  c.pipeline.validate();
  RunConfig r;
  r.trajectory = make_trajectory(c.trajectory);
  r.map = map;
  r.camera = c.camera;
  r.noise = c.noise;
  r.pipeline = c.pipeline;
  r.pipeline.camera_in_body = c.camera.pose_in_body;
  r.sample_rate = c.sample_rate;
  r.seed = c.seed.value_or(0);
  r.max_frames = c.frames;
  return r;
}

inline std::vector<Scenario> make_scenarios(const ExperimentConfig& c) {
  std::vector<Scenario> out;
  for (const auto& s : c.scenarios) out.push_back({s.name, make_trajectory(s.trajectory)});
  return out;
}

inline std::vector<Variant> make_variants(const std::vector<std::string>& names, const PipelineConfig& base) {
  std::vector<Variant> out;
  for (const auto& n : names) out.push_back({n, parse_variant(n, base)});
  return out;
}

}  // namespace taglok
