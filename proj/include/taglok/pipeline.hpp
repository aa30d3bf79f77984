#pragma once
/**
 * @file pipeline.hpp
 * @brief Tag-based visual odometry estimator.
 *
 * Per frame: tag hierarchical selection (THS) -> per-tag body pose through
 * the frame chain -> IQR outlier removal (OR) -> multi-tag estimate fusion
 * (MEF: weighted mean position, QL2 or CL2 rotation mean) -> FIR smoothing
 * over the last fir_length fused poses.
 */

#include "taglok/camsim.hpp"
#include "taglok/geometry.hpp"
#include "taglok/tagmap.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <array>
#include <deque>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace taglok {

enum class ThsMode { JBT, ALL, TBS };
enum class WeightScheme { W1, W2, UNIFORM };
enum class RotMeanMethod { QL2, CL2 };

/// 4^h (W1), 2^h (W2) or 1, with h the class index.
inline double class_weight(WeightScheme scheme, SizeClass c) {
  const int h = class_index(c);
  switch (scheme) {
    case WeightScheme::W1: return static_cast<double>(1 << (2 * h));
    case WeightScheme::W2: return static_cast<double>(1 << h);
    case WeightScheme::UNIFORM: return 1.0;
  }
  return 1.0;
}

struct PipelineConfig {
  ThsMode ths = ThsMode::TBS;
  bool outlier_removal = true;
  double iqr_gain = 1.5;
  WeightScheme weights = WeightScheme::W2;
  RotMeanMethod rot_mean = RotMeanMethod::QL2;
  int fir_length = 5;
  Pose camera_in_body = CameraModel{}.pose_in_body;

  void validate() const {
    if (!(iqr_gain > 0.0)) throw std::invalid_argument("pipeline: iqr_gain must be > 0");
    if (fir_length < 1) throw std::invalid_argument("pipeline: fir_length must be >= 1");
  }

  bool operator==(const PipelineConfig&) const = default;
};

struct PerTagEstimate {
  int tag_id = 0;
  Pose body_pose_est;
  double weight = 1.0;
  SizeClass size_class = SizeClass::S;
};

// ---------------------------------------------------------------------------
// THS

/// Maps detections to their map entries, dropping ids the map does not know.
inline std::vector<Detection> drop_unknown(std::span<const Detection> detections, const TagMap& map,
                                           std::size_t* dropped = nullptr) {
  std::vector<Detection> out;
  for (const auto& d : detections)
    if (map.lookup(d.tag_id)) out.push_back(d);
  if (dropped) *dropped = detections.size() - out.size();
  return out;
}

/**
 * @brief Tag hierarchical selection.
 *
 * JBT keeps the single biggest tag (smallest id among equal sizes), ALL keeps
 * everything, TBS keeps the tags of the two largest classes present.
 * Detections must already resolve in `map`. Input order is preserved.
 */
inline std::vector<Detection> select_tags(std::span<const Detection> detections, const TagMap& map, ThsMode mode) {
  if (detections.empty()) return {};
  auto cls = [&](const Detection& d) { return class_index(map.lookup(d.tag_id)->size_class); };
  switch (mode) {
    case ThsMode::ALL: return {detections.begin(), detections.end()};
    case ThsMode::JBT: {
      const Detection* best = &detections.front();
      for (const auto& d : detections) {
        const int c = cls(d), cb = cls(*best);
        if (c > cb || (c == cb && d.tag_id < best->tag_id)) best = &d;
      }
      return {*best};
    }
    case ThsMode::TBS: {
      std::array<bool, 4> present{};
      for (const auto& d : detections) present[static_cast<std::size_t>(cls(d))] = true;
      int taken = 0, threshold = 0;
      for (int h = 3; h >= 0 && taken < 2; --h) {
        if (present[static_cast<std::size_t>(h)]) {
          threshold = h;
          ++taken;
        }
      }
      std::vector<Detection> out;
      for (const auto& d : detections)
        if (cls(d) >= threshold) out.push_back(d);
      return out;
    }
  }
  return {};
}

// ---------------------------------------------------------------------------
// Per-tag body pose

/// T_B^W = T_T^W ∘ (T_T^C)^-1 ∘ (T_C^B)^-1. std::nullopt when the id is unknown.
inline std::optional<PerTagEstimate> estimate_body_pose_per_tag(const Detection& d, const TagMap& map,
                                                                const Pose& camera_in_body,
                                                                WeightScheme scheme = WeightScheme::UNIFORM) {
  const TagEntry* tag = map.lookup(d.tag_id);
  if (!tag) return std::nullopt;
  PerTagEstimate e;
  e.tag_id = d.tag_id;
  e.size_class = tag->size_class;
  e.weight = class_weight(scheme, tag->size_class);
  e.body_pose_est = compose(compose(tag->pose_in_world, inverse(d.pose_tag_in_camera)), inverse(camera_in_body));
  return e;
}

// ---------------------------------------------------------------------------
// OR

struct IqrBounds {
  double q1 = 0.0;
  double q3 = 0.0;
  double lower = 0.0;
  double upper = 0.0;

  double iqr() const { return q3 - q1; }

  /**
   * Strict fences. When the IQR collapses to zero the open interval is empty,
   * so values equal to the common quartile are kept instead (all-equal
   * samples are never outliers).
   */
  bool contains(double v) const {
    if (q3 - q1 == 0.0) return v == q1;
    return lower < v && v < upper;
  }
};

/// Linear-interpolation quantile of an ascending-sorted sample, p in [0, 1].
inline double sorted_quantile(std::span<const double> sorted, double p) {
  const double h = (static_cast<double>(sorted.size()) - 1.0) * p;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

/// Tukey fences (Q1 - gain*IQR, Q3 + gain*IQR); std::nullopt with fewer than three samples.
inline std::optional<IqrBounds> iqr_bounds(std::span<const double> samples, double gain = 1.5) {
  if (samples.size() < 3) return std::nullopt;
  std::vector<double> s(samples.begin(), samples.end());
  std::sort(s.begin(), s.end());
  IqrBounds b;
  b.q1 = sorted_quantile(s, 0.25);
  b.q3 = sorted_quantile(s, 0.75);
  b.lower = b.q1 - gain * b.iqr();
  b.upper = b.q3 + gain * b.iqr();
  return b;
}

struct OutlierSplit {
  std::vector<PerTagEstimate> kept;
  std::vector<PerTagEstimate> rejected;
  std::optional<std::array<IqrBounds, 3>> bounds;  ///< absent when OR was skipped
};

/// Keeps an estimate iff each position component lies inside its axis fences.
inline OutlierSplit remove_outliers(std::span<const PerTagEstimate> estimates, double gain = 1.5) {
  OutlierSplit out;
  if (estimates.size() < 3) {
    out.kept.assign(estimates.begin(), estimates.end());
    return out;
  }
  std::array<IqrBounds, 3> b;
  std::vector<double> axis(estimates.size());
  for (int k = 0; k < 3; ++k) {
    for (std::size_t i = 0; i < estimates.size(); ++i) axis[i] = estimates[i].body_pose_est.position[k];
    b[static_cast<std::size_t>(k)] = *iqr_bounds(axis, gain);
  }
  for (const auto& e : estimates) {
    const Vector3& p = e.body_pose_est.position;
    const bool inside = b[0].contains(p.x()) && b[1].contains(p.y()) && b[2].contains(p.z());
    (inside ? out.kept : out.rejected).push_back(e);
  }
  out.bounds = b;
  return out;
}

// ---------------------------------------------------------------------------
// MEF

/// Weighted mean of the positions; std::nullopt on empty input.
inline std::optional<Vector3> fuse_positions(std::span<const PerTagEstimate> kept) {
  if (kept.empty()) return std::nullopt;
  // Accumulate offsets from the first sample so identical inputs come back bit-exact.
  const Vector3 ref = kept.front().body_pose_est.position;
  Vector3 acc = Vector3::Zero();
  double wsum = 0.0;
  for (const auto& e : kept) {
    acc += e.weight * (e.body_pose_est.position - ref);
    wsum += e.weight;
  }
  return Vector3(ref + acc / wsum);
}

struct RotationFusion {
  UnitQuaternion mean;
  bool dispersion_warning = false;  ///< some pair is >= pi/2 apart (QL2 optimality not guaranteed)
  bool degenerate = false;          ///< no unique mean; `mean` falls back to the reference estimate
};

namespace detail {

/// Largest weight, ties broken by smallest tag id.
inline const PerTagEstimate& reference_estimate(std::span<const PerTagEstimate> v) {
  const PerTagEstimate* ref = &v.front();
  for (const auto& e : v)
    if (e.weight > ref->weight || (e.weight == ref->weight && e.tag_id < ref->tag_id)) ref = &e;
  return *ref;
}

}  // namespace detail

/**
 * @brief Quaternion L2 mean: sign-align every q_i to the reference, return the
 * normalized weighted sum. Minimizes sum w_i d(q_i, q)^2 with
 * d = min(|q_i - q|, |q_i + q|) while all pairs are within pi/2.
 */
inline std::optional<RotationFusion> fuse_rotations_ql2(std::span<const PerTagEstimate> kept) {
  if (kept.empty()) return std::nullopt;
  const UnitQuaternion ref = detail::reference_estimate(kept).body_pose_est.orientation;
  Vector4 sum = Vector4::Zero();
  for (const auto& e : kept) {
    const UnitQuaternion& q = e.body_pose_est.orientation;
    sum += (ref.dot(q) >= 0.0 ? e.weight : -e.weight) * q.coeffs();
  }
  RotationFusion out;
  for (std::size_t i = 0; i < kept.size() && !out.dispersion_warning; ++i)
    for (std::size_t j = i + 1; j < kept.size(); ++j)
      if (riemannian_distance(kept[i].body_pose_est.orientation, kept[j].body_pose_est.orientation) >= kPi / 2) {
        out.dispersion_warning = true;
        break;
      }
  double wsum = 0.0;
  for (const auto& e : kept) wsum += e.weight;
  if (sum.norm() < 1e-12 * wsum) {
    out.degenerate = true;
    out.mean = ref.canonical();
  } else {
    out.mean = UnitQuaternion(sum).canonical();
  }
  return out;
}

/**
 * @brief Chordal L2 mean: unit eigenvector of the largest eigenvalue of
 * Q = sum w_i q_i q_iᵀ. Invariant to the sign of every input.
 */
inline std::optional<RotationFusion> fuse_rotations_cl2(std::span<const PerTagEstimate> kept) {
  if (kept.empty()) return std::nullopt;
  Eigen::Matrix4d q = Eigen::Matrix4d::Zero();
  double wsum = 0.0;
  for (const auto& e : kept) {
    const Vector4& c = e.body_pose_est.orientation.coeffs();
    q += e.weight * c * c.transpose();
    wsum += e.weight;
  }
  const Eigen::SelfAdjointEigenSolver<Eigen::Matrix4d> solver(q);
  const auto& values = solver.eigenvalues();  // ascending
  RotationFusion out;
  if (values[3] - values[2] < 1e-9 * wsum) {
    out.degenerate = true;
    out.mean = detail::reference_estimate(kept).body_pose_est.orientation.canonical();
  } else {
    out.mean = UnitQuaternion(Vector4(solver.eigenvectors().col(3))).canonical();
  }
  return out;
}

// ---------------------------------------------------------------------------
// FIR

/**
 * @brief Moving average over the last `length` poses: arithmetic mean of the
 * positions and uniform QL2 mean of the orientations (sign-aligned to the
 * newest sample). During warm-up the average runs over what is available.
 */
class FirSmoother {
 public:
  explicit FirSmoother(int length = 5) : length_(static_cast<std::size_t>(std::max(1, length))) {}

  Pose push(const Pose& p) {
    history_.push_back(p);
    while (history_.size() > length_) history_.pop_front();
    return current();
  }

  Pose current() const {
    const Pose& newest = history_.back();
    Vector3 acc = Vector3::Zero();
    Vector4 dq = Vector4::Zero();
    for (const auto& h : history_) {
      acc += h.position - newest.position;
      dq += (newest.orientation.dot(h.orientation) >= 0.0 ? 1.0 : -1.0) * h.orientation.coeffs() -
            newest.orientation.coeffs();
    }
    const double n = static_cast<double>(history_.size());
    Pose out;
    out.position = newest.position + acc / n;
    const Vector4 mean = newest.orientation.coeffs() + dq / n;
    if (dq.isZero(0.0) || mean.norm() < 1e-12) out.orientation = newest.orientation;
    else out.orientation = UnitQuaternion(mean);
    return out;
  }

  std::size_t size() const { return history_.size(); }
  std::size_t length() const { return length_; }
  const std::deque<Pose>& history() const { return history_; }
  void reset() { history_.clear(); }

 private:
  std::size_t length_;
  std::deque<Pose> history_;
};

/// Stateless form: smooths `new_pose` against the previous fused poses (oldest first).
inline Pose fir_smooth(std::span<const Pose> history, const Pose& new_pose, int fir_length = 5) {
  FirSmoother f(fir_length);
  for (const auto& p : history) f.push(p);
  return f.push(new_pose);
}

// ---------------------------------------------------------------------------
// Full step

struct StageTrace {
  std::size_t detections_in = 0;
  std::size_t unknown_dropped = 0;
  std::vector<int> selected;         ///< ids surviving THS
  bool or_applied = false;
  std::optional<std::array<IqrBounds, 3>> or_bounds;
  bool dispersion_warning = false;
  bool fusion_degenerate = false;
  std::optional<Pose> fused;         ///< MEF output before the FIR
  std::string reason;                ///< why no pose was produced (empty otherwise)
};

struct EstimateOutput {
  double timestamp = 0.0;
  std::optional<Pose> pose;
  std::vector<int> tags_used;
  std::vector<int> tags_rejected;
  StageTrace trace;
};

/// Carried between frames of one stream: the FIR history only.
struct PipelineState {
  explicit PipelineState(int fir_length = 5) : fir(fir_length) {}
  FirSmoother fir;
};

/**
 * @brief Runs one frame through the estimator.
 *
 * Frames that yield no fused pose return pose = std::nullopt with the reason
 * in the trace and leave the FIR history untouched.
 */
inline EstimateOutput step(std::span<const Detection> detections, const TagMap& map, const PipelineConfig& cfg,
                           PipelineState& state, double timestamp = 0.0) {
  EstimateOutput out;
  out.timestamp = timestamp;
  auto& tr = out.trace;
  tr.detections_in = detections.size();

  std::vector<Detection> known = drop_unknown(detections, map, &tr.unknown_dropped);
  std::stable_sort(known.begin(), known.end(),
                   [](const Detection& a, const Detection& b) { return a.tag_id < b.tag_id; });
  if (known.empty()) {
    tr.reason = detections.empty() ? "no-tags" : "no-known-tags";
    return out;
  }

  const std::vector<Detection> selected = select_tags(known, map, cfg.ths);
  std::vector<PerTagEstimate> estimates;
  estimates.reserve(selected.size());
  for (const auto& d : selected) {
    tr.selected.push_back(d.tag_id);
    if (auto e = estimate_body_pose_per_tag(d, map, cfg.camera_in_body, cfg.weights)) estimates.push_back(*e);
  }

  std::vector<PerTagEstimate> kept;
  if (cfg.outlier_removal) {
    OutlierSplit split = remove_outliers(estimates, cfg.iqr_gain);
    tr.or_applied = split.bounds.has_value();
    tr.or_bounds = split.bounds;
    for (const auto& r : split.rejected) out.tags_rejected.push_back(r.tag_id);
    kept = std::move(split.kept);
  } else {
    kept = std::move(estimates);
  }
  if (kept.empty()) {
    tr.reason = "all-rejected";
    return out;
  }
  for (const auto& k : kept) out.tags_used.push_back(k.tag_id);

  const auto position = fuse_positions(kept);
  const auto rotation = cfg.rot_mean == RotMeanMethod::QL2 ? fuse_rotations_ql2(kept) : fuse_rotations_cl2(kept);
  tr.dispersion_warning = rotation->dispersion_warning;
  tr.fusion_degenerate = rotation->degenerate;
  const Pose fused{*position, rotation->mean};
  tr.fused = fused;
  out.pose = state.fir.push(fused);
  return out;
}

/// Convenience wrapper owning the configuration and the FIR state of one stream.
class VisualOdometry {
 public:
  explicit VisualOdometry(PipelineConfig cfg) : cfg_(std::move(cfg)), state_(cfg_.fir_length) { cfg_.validate(); }

  EstimateOutput step(std::span<const Detection> detections, const TagMap& map, double timestamp = 0.0) {
    return taglok::step(detections, map, cfg_, state_, timestamp);
  }

  const PipelineConfig& config() const { return cfg_; }
  void reset() { state_.fir.reset(); }

 private:
  PipelineConfig cfg_;
  PipelineState state_;
};

}  // namespace taglok
