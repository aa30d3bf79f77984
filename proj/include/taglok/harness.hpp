#pragma once
/**
 * @file harness.hpp
 * @brief Ground-truth trajectories, run executor and error statistics.
 *
 * Ground truth stands in for motion capture: it is exact. Per frame the
 * harness simulates detections, runs the estimator, and accumulates
 * e_p = |p_est - p_true| [cm] and e_o = angle(R_est R_trueᵀ) [deg]. Frames
 * without an estimate are counted as dropped and excluded from the moments.
 * Statistics over several runs pool the samples.
 */

#include "taglok/camsim.hpp"
#include "taglok/geometry.hpp"
#include "taglok/pipeline.hpp"
#include "taglok/tagmap.hpp"

#include <algorithm>
#include <atomic>
#include <cctype>
#include <cstdio>
#include <fstream>
#include <functional>
#include <sstream>
#include <future>
#include <string>
#include <thread>
#include <vector>

namespace taglok {

struct TrajectorySample {
  Vector3 position = Vector3::Zero();
  double yaw = 0.0;  ///< [rad]
  std::string phase;
};

/// Body pose of a sample: level attitude, heading `yaw` about world z.
inline Pose body_pose(const TrajectorySample& s) {
  return {s.position, UnitQuaternion::from_axis_angle(Vector3::UnitZ(), s.yaw)};
}

struct Trajectory {
  std::string label;
  double duration = 0.0;  ///< [s]
  std::function<TrajectorySample(double)> sample;
  std::vector<double> knot_times;  ///< waypoint times, spline trajectories only
};

/// Hover altitudes of the static tests [m].
inline constexpr std::array<double, 3> kHoverAltitudes = {0.8, 1.4, 2.0};

inline Trajectory hover_trajectory(const Vector3& position, double yaw, double duration) {
  Trajectory t;
  t.label = "hover";
  t.duration = duration;
  t.sample = [position, yaw](double) { return TrajectorySample{position, yaw, ""}; };
  return t;
}

// ---------------------------------------------------------------------------
// T1: planar square

struct SquareParams {
  Vector3 start{2.4, 3.4, 0.8};  ///< first corner; the square extends towards -x and -y
  double side = 1.8;
  double speed = 0.25;  ///< [m/s]
};

/**
 * Closed square at constant altitude. Phases in flight order:
 * F (-y), R (-x), B (+y), L (+x).
 */
inline Trajectory square_trajectory_t1(const SquareParams& p = {}) {
  struct Leg {
    const char* phase;
    Vector3 dir;
  };
  static const std::array<Leg, 4> legs = {Leg{"F", -Vector3::UnitY()}, Leg{"R", -Vector3::UnitX()},
                                          Leg{"B", Vector3::UnitY()}, Leg{"L", Vector3::UnitX()}};
  const double leg_time = p.side / p.speed;
  Trajectory t;
  t.label = "T1";
  t.duration = 4.0 * leg_time;
  t.sample = [p, leg_time](double time) {
    time = std::clamp(time, 0.0, 4.0 * leg_time);
    const int k = std::min(3, static_cast<int>(time / leg_time));
    Vector3 corner = p.start;
    for (int i = 0; i < k; ++i) corner += p.side * legs[static_cast<std::size_t>(i)].dir;
    const double s = time - k * leg_time;
    const Leg& leg = legs[static_cast<std::size_t>(k)];
    return TrajectorySample{corner + p.speed * s * leg.dir, 0.0, leg.phase};
  };
  return t;
}

// ---------------------------------------------------------------------------
// T2: vertical steps

struct StepsParams {
  double x = 1.145;  ///< over an L tag of the default map
  double y = 2.145;
  double takeoff_altitude = 0.4;
  double base_altitude = 0.7;
  double step = 0.3;
  double climb_rate = 0.15;  ///< [m/s]
  double hold = 4.0;         ///< [s] after each transition
};

/**
 * Takeoff S0 to base_altitude, three ascending steps A1..A3, three
 * descending steps D1..D3. Each phase is a constant-rate transition followed
 * by a hold.
 */
inline Trajectory steps_trajectory_t2(const StepsParams& p = {}) {
  struct Phase {
    std::string label;
    double from, to, start, duration;
  };
  std::vector<Phase> phases;
  double clock = 0.0;
  auto add = [&](std::string label, double from, double to) {
    const double d = std::abs(to - from) / p.climb_rate + p.hold;
    phases.push_back({std::move(label), from, to, clock, d});
    clock += d;
  };
  const double b = p.base_altitude, s = p.step;
  add("S0", p.takeoff_altitude, b);
  add("A1", b, b + s);
  add("A2", b + s, b + 2 * s);
  add("A3", b + 2 * s, b + 3 * s);
  add("D1", b + 3 * s, b + 2 * s);
  add("D2", b + 2 * s, b + s);
  add("D3", b + s, b);

  Trajectory t;
  t.label = "T2";
  t.duration = clock;
  t.sample = [p, phases](double time) {
    std::size_t k = 0;
    while (k + 1 < phases.size() && time >= phases[k + 1].start) ++k;
    const Phase& ph = phases[k];
    const double ramp = std::abs(ph.to - ph.from) / p.climb_rate;
    const double u = ramp > 0.0 ? std::clamp((time - ph.start) / ramp, 0.0, 1.0) : 1.0;
    return TrajectorySample{Vector3(p.x, p.y, ph.from + u * (ph.to - ph.from)), 0.0, ph.label};
  };
  return t;
}

// ---------------------------------------------------------------------------
// T3: spline through waypoints

/// Natural cubic spline on strictly increasing knots.
class CubicSpline {
 public:
  CubicSpline(std::vector<double> knots, std::vector<double> values)
      : t_(std::move(knots)), y_(std::move(values)), m_(t_.size(), 0.0) {
    const std::size_t n = t_.size();
    if (n < 2 || y_.size() != n) throw std::invalid_argument("CubicSpline: need >= 2 matching knots");
    for (std::size_t i = 1; i < n; ++i)
      if (!(t_[i] > t_[i - 1])) throw std::invalid_argument("CubicSpline: knots must increase");
    if (n == 2) return;
    // Thomas algorithm on the interior second derivatives (M_0 = M_{n-1} = 0).
    std::vector<double> c(n, 0.0), d(n, 0.0);
    for (std::size_t i = 1; i + 1 < n; ++i) {
      const double h0 = t_[i] - t_[i - 1], h1 = t_[i + 1] - t_[i];
      const double a = h0, bb = 2.0 * (h0 + h1), cc = h1;
      const double rhs = 6.0 * ((y_[i + 1] - y_[i]) / h1 - (y_[i] - y_[i - 1]) / h0);
      const double denom = bb - a * c[i - 1];
      c[i] = cc / denom;
      d[i] = (rhs - a * d[i - 1]) / denom;
    }
    for (std::size_t i = n - 2; i >= 1; --i) {
      m_[i] = d[i] - c[i] * m_[i + 1];
      if (i == 1) break;
    }
  }

  double operator()(double t) const {
    t = std::clamp(t, t_.front(), t_.back());
    const auto it = std::upper_bound(t_.begin(), t_.end(), t);
    std::size_t i = static_cast<std::size_t>(std::max<std::ptrdiff_t>(1, it - t_.begin())) - 1;
    i = std::min(i, t_.size() - 2);
    const double h = t_[i + 1] - t_[i];
    const double a = (t_[i + 1] - t) / h, b = (t - t_[i]) / h;
    return a * y_[i] + b * y_[i + 1] + ((a * a * a - a) * m_[i] + (b * b * b - b) * m_[i + 1]) * h * h / 6.0;
  }

 private:
  std::vector<double> t_, y_, m_;
};

struct Waypoint {
  Vector3 position;
  double yaw = 0.0;  ///< [rad]
};

/**
 * @brief Stand-in 3D spline scenario: 8 waypoints between 0.6 m and 2.0 m
 * altitude over the default 3 m x 5 m map, heading advancing by 360/7 degrees
 * per waypoint (one full turn overall).
 */
inline std::vector<Waypoint> default_t3_waypoints() {
  const double xy[8][3] = {{1.0, 1.2, 0.6}, {2.0, 1.5, 1.0}, {2.2, 2.5, 1.4}, {1.5, 3.2, 2.0},
                           {0.8, 3.8, 1.7}, {1.2, 4.0, 1.2}, {2.0, 3.5, 0.9}, {1.5, 2.5, 0.7}};
  std::vector<Waypoint> w;
  for (int i = 0; i < 8; ++i)
    w.push_back({Vector3(xy[i][0], xy[i][1], xy[i][2]), wrap_angle(deg2rad(360.0 / 7.0 * i))});
  return w;
}

/// `x y z yaw_deg` per line, '#' comments.
inline std::vector<Waypoint> load_waypoints(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("load_waypoints: cannot open " + path);
  std::vector<Waypoint> out;
  std::string line;
  int lineno = 0;
  while (std::getline(f, line)) {
    ++lineno;
    if (const auto h = line.find('#'); h != std::string::npos) line.erase(h);
    std::istringstream ls(line);
    double x, y, z, yaw;
    if (!(ls >> x)) continue;
    if (!(ls >> y >> z >> yaw)) throw ParseError(path + ":" + std::to_string(lineno) + ": expected 'x y z yaw_deg'");
    out.push_back({Vector3(x, y, z), deg2rad(yaw)});
  }
  return out;
}

/**
 * C² natural-spline position through every waypoint, knot times from chord
 * length at `speed`; yaw is interpolated linearly the short way round.
 */
inline Trajectory spline_trajectory_t3(const std::vector<Waypoint>& waypoints, double speed = 0.3) {
  if (waypoints.size() < 4) throw std::invalid_argument("spline_trajectory_t3: need at least 4 waypoints");
  if (!(speed > 0.0)) throw std::invalid_argument("spline_trajectory_t3: speed must be > 0");
  std::vector<double> times{0.0};
  for (std::size_t i = 1; i < waypoints.size(); ++i) {
    const double d = (waypoints[i].position - waypoints[i - 1].position).norm();
    if (!(d > 0.0)) throw std::invalid_argument("spline_trajectory_t3: repeated waypoint");
    times.push_back(times.back() + d / speed);
  }
  std::vector<CubicSpline> axes;
  for (int k = 0; k < 3; ++k) {
    std::vector<double> v;
    for (const auto& w : waypoints) v.push_back(w.position[k]);
    axes.emplace_back(times, v);
  }
  std::vector<double> yaws;
  for (const auto& w : waypoints) yaws.push_back(w.yaw);

  Trajectory t;
  t.label = "T3";
  t.duration = times.back();
  t.knot_times = times;
  t.sample = [axes, yaws, times](double time) {
    TrajectorySample s;
    s.position = Vector3(axes[0](time), axes[1](time), axes[2](time));
    time = std::clamp(time, times.front(), times.back());
    std::size_t i = 0;
    while (i + 2 < times.size() && time >= times[i + 1]) ++i;
    const double u = (time - times[i]) / (times[i + 1] - times[i]);
    s.yaw = wrap_angle(yaws[i] + u * wrap_angle(yaws[i + 1] - yaws[i]));
    return s;
  };
  return t;
}

// ---------------------------------------------------------------------------
// Statistics

struct ErrorStats {
  double ep_mean_cm = 0.0;
  double ep_std_cm = 0.0;
  double eo_mean_deg = 0.0;
  double eo_std_deg = 0.0;
  std::size_t samples = 0;  ///< frames with an estimate
  std::size_t dropped = 0;  ///< frames without one

  std::size_t frames() const { return samples + dropped; }
};

/// Welford accumulator; std is the population standard deviation.
class StatsAccumulator {
 public:
  void add(double ep_cm, double eo_deg) {
    ++n_;
    const double n = static_cast<double>(n_);
    const double dp = ep_cm - mp_, dout = eo_deg - mo_;
    mp_ += dp / n;
    mo_ += dout / n;
    sp_ += dp * (ep_cm - mp_);
    so_ += dout * (eo_deg - mo_);
  }

  void add_dropped() { ++dropped_; }

  ErrorStats stats() const {
    ErrorStats s;
    s.samples = n_;
    s.dropped = dropped_;
    if (n_ > 0) {
      const double n = static_cast<double>(n_);
      s.ep_mean_cm = mp_;
      s.eo_mean_deg = mo_;
      s.ep_std_cm = std::sqrt(std::max(0.0, sp_ / n));
      s.eo_std_deg = std::sqrt(std::max(0.0, so_ / n));
    }
    return s;
  }

 private:
  std::size_t n_ = 0, dropped_ = 0;
  double mp_ = 0.0, mo_ = 0.0, sp_ = 0.0, so_ = 0.0;
};

// ---------------------------------------------------------------------------
// Run

struct RunConfig {
  Trajectory trajectory;
  TagMap map;
  CameraModel camera;
  NoiseModel noise;  ///< its seed is replaced by `seed`
  PipelineConfig pipeline;
  double sample_rate = 20.0;  ///< [Hz]
  std::uint64_t seed = 0;
  std::size_t max_frames = 0;  ///< 0 = whole trajectory
};

struct FrameLog {
  std::uint64_t index = 0;
  double t = 0.0;
  std::string phase;
  Pose truth;
  std::size_t visible = 0;
  EstimateOutput estimate;
  double ep_cm = 0.0;  ///< meaningful only when estimate.pose is set
  double eo_deg = 0.0;
};

struct PhaseStats {
  std::string phase;
  ErrorStats stats;
};

struct RunResult {
  ErrorStats stats;
  std::vector<PhaseStats> per_phase;  ///< in order of first appearance; empty for unlabeled trajectories
  std::vector<FrameLog> frames;
};

inline std::size_t frame_count(const RunConfig& cfg) {
  auto n = static_cast<std::size_t>(std::llround(cfg.trajectory.duration * cfg.sample_rate));
  n = std::max<std::size_t>(n, 1);
  if (cfg.max_frames > 0) n = std::min(n, cfg.max_frames);
  return n;
}

inline RunResult run(const RunConfig& cfg) {
  if (!(cfg.sample_rate > 0.0)) throw std::invalid_argument("run: sample_rate must be > 0");
  cfg.pipeline.validate();
  NoiseModel noise = cfg.noise;
  noise.seed = cfg.seed;

  RunResult out;
  StatsAccumulator total;
  std::vector<std::pair<std::string, StatsAccumulator>> phases;
  PipelineState state(cfg.pipeline.fir_length);

  const std::size_t n = frame_count(cfg);
  out.frames.reserve(n);
  for (std::size_t k = 0; k < n; ++k) {
    FrameLog f;
    f.index = k;
    f.t = static_cast<double>(k) / cfg.sample_rate;
    const TrajectorySample s = cfg.trajectory.sample(f.t);
    f.phase = s.phase;
    f.truth = body_pose(s);
    const auto detections = detect(cfg.map, cfg.camera, noise, f.truth, k);
    f.visible = detections.size();
    f.estimate = step(detections, cfg.map, cfg.pipeline, state, f.t);

    StatsAccumulator* ph = nullptr;
    if (!f.phase.empty()) {
      auto it = std::find_if(phases.begin(), phases.end(), [&](const auto& p) { return p.first == f.phase; });
      if (it == phases.end()) {
        phases.emplace_back(f.phase, StatsAccumulator{});
        it = std::prev(phases.end());
      }
      ph = &it->second;
    }
    if (f.estimate.pose) {
      f.ep_cm = 100.0 * (f.estimate.pose->position - f.truth.position).norm();
      f.eo_deg = rad2deg(riemannian_distance(f.estimate.pose->orientation, f.truth.orientation));
      total.add(f.ep_cm, f.eo_deg);
      if (ph) ph->add(f.ep_cm, f.eo_deg);
    } else {
      total.add_dropped();
      if (ph) ph->add_dropped();
    }
    out.frames.push_back(std::move(f));
  }
  out.stats = total.stats();
  for (const auto& [name, acc] : phases) out.per_phase.push_back({name, acc.stats()});
  return out;
}

// ---------------------------------------------------------------------------
// Comparison matrix

/// Parses a variant name such as "tbs-or-w2-ql2" or "all,noor" on top of `base`.
inline PipelineConfig parse_variant(const std::string& name, PipelineConfig base) {
  std::string token;
  auto apply = [&](std::string tok) {
    for (auto& ch : tok) ch = static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
    if (tok.empty() || tok == "mef") return;
    if (tok == "jbt") base.ths = ThsMode::JBT;
    else if (tok == "all") base.ths = ThsMode::ALL;
    else if (tok == "tbs") base.ths = ThsMode::TBS;
    else if (tok == "or") base.outlier_removal = true;
    else if (tok == "noor" || tok == "notor") base.outlier_removal = false;
    else if (tok == "w1") base.weights = WeightScheme::W1;
    else if (tok == "w2") base.weights = WeightScheme::W2;
    else if (tok == "uniform") base.weights = WeightScheme::UNIFORM;
    else if (tok == "ql2") base.rot_mean = RotMeanMethod::QL2;
    else if (tok == "cl2") base.rot_mean = RotMeanMethod::CL2;
    else if (tok == "new") {
      base.ths = ThsMode::TBS;
      base.outlier_removal = true;
      base.weights = WeightScheme::W2;
      base.rot_mean = RotMeanMethod::QL2;
    } else
      throw std::invalid_argument("unknown variant token '" + tok + "' in '" + name + "'");
  };
  for (char ch : name) {
    if (ch == '-' || ch == ',' || ch == '+' || ch == '(' || ch == ')' || ch == ' ') {
      apply(token);
      token.clear();
    } else {
      token += ch;
    }
  }
  apply(token);
  return base;
}

struct Scenario {
  std::string name;
  Trajectory trajectory;
};

struct Variant {
  std::string name;
  PipelineConfig pipeline;
};

struct ComparisonTable {
  std::vector<std::string> scenarios;
  std::vector<std::string> variants;
  std::vector<std::vector<ErrorStats>> cells;  ///< [scenario][variant]
};

/// Seed of scenario row `row`; every variant of the row shares it.
inline std::uint64_t scenario_seed(std::uint64_t base_seed, std::size_t row) {
  return detail::splitmix64(base_seed ^ (0x5851f42d4c957f2dULL * (row + 1)));
}

/**
 * @brief Runs every (scenario, variant) cell. Empty scenario or variant lists
 * fall back to a single "base" row/column taken from `base`. Cells run in
 * parallel when `threads` > 1; results do not depend on scheduling.
 */
inline ComparisonTable compare_matrix(const RunConfig& base, std::vector<Scenario> scenarios,
                                      std::vector<Variant> variants, unsigned threads = 0) {
  if (scenarios.empty()) scenarios.push_back({"base", base.trajectory});
  if (variants.empty()) variants.push_back({"base", base.pipeline});
  ComparisonTable table;
  for (const auto& s : scenarios) table.scenarios.push_back(s.name);
  for (const auto& v : variants) table.variants.push_back(v.name);
  table.cells.assign(scenarios.size(), std::vector<ErrorStats>(variants.size()));

  auto cell = [&](std::size_t r, std::size_t c) {
    RunConfig cfg = base;
    cfg.trajectory = scenarios[r].trajectory;
    cfg.pipeline = variants[c].pipeline;
    cfg.seed = scenario_seed(base.seed, r);
    table.cells[r][c] = run(cfg).stats;
  };

  const std::size_t total = scenarios.size() * variants.size();
  if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
  if (threads <= 1 || total <= 1) {
    for (std::size_t i = 0; i < total; ++i) cell(i / variants.size(), i % variants.size());
    return table;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::future<void>> workers;
  for (unsigned w = 0; w < std::min<std::size_t>(threads, total); ++w) {
    workers.push_back(std::async(std::launch::async, [&] {
      for (std::size_t i = next++; i < total; i = next++) cell(i / variants.size(), i % variants.size());
    }));
  }
  for (auto& w : workers) w.get();
  return table;
}

inline std::string format_fixed(double v, int digits = 6) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

/// `scenario,variant,ep_mnv_cm,ep_std_cm,eo_mnv_deg,eo_std_deg,frames,dropped`
inline std::string comparison_csv(const ComparisonTable& t) {
  std::string out = "scenario,variant,ep_mnv_cm,ep_std_cm,eo_mnv_deg,eo_std_deg,frames,dropped\n";
  for (std::size_t r = 0; r < t.scenarios.size(); ++r) {
    for (std::size_t c = 0; c < t.variants.size(); ++c) {
      const ErrorStats& s = t.cells[r][c];
      out += t.scenarios[r] + "," + t.variants[c] + "," + format_fixed(s.ep_mean_cm) + "," +
             format_fixed(s.ep_std_cm) + "," + format_fixed(s.eo_mean_deg) + "," + format_fixed(s.eo_std_deg) +
             "," + std::to_string(s.frames()) + "," + std::to_string(s.dropped) + "\n";
    }
  }
  return out;
}

/// `t,ep_cm,eo_deg,tags_used`; error fields are empty on dropped frames.
inline std::string timeseries_csv(const RunResult& r) {
  std::string out = "t,ep_cm,eo_deg,tags_used\n";
  for (const auto& f : r.frames) {
    out += format_fixed(f.t, 4) + ",";
    if (f.estimate.pose) out += format_fixed(f.ep_cm) + "," + format_fixed(f.eo_deg);
    else out += ",";
    out += "," + std::to_string(f.estimate.tags_used.size()) + "\n";
  }
  return out;
}

}  // namespace taglok
