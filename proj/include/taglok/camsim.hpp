#pragma once
/**
 * @file camsim.hpp
 * @brief Deterministic pinhole camera that turns a ground-truth body pose
 * into per-tag detections (tag id + noisy tag-in-camera pose).
 */

#include "taglok/geometry.hpp"
#include "taglok/tagmap.hpp"

#include <cstdint>
#include <istream>
#include <map>
#include <random>
#include <string>
#include <vector>

namespace taglok {

struct CameraModel {
  double focal_px = 600.0;
  double cx = 640.0;
  double cy = 360.0;
  int width = 1280;
  int height = 720;
  /// Camera 10 cm ahead of the CoM, optical axis pointing at the floor.
  Pose pose_in_body{Vector3(0.1, 0.0, 0.0), UnitQuaternion::from_axis_angle(Vector3::UnitX(), kPi)};
  double frame_rate = 30.0;
  double min_apparent_px = 12.0;

  void validate() const {
    if (!(focal_px > 0.0)) throw std::invalid_argument("camera: focal_px must be > 0");
    if (width <= 0 || height <= 0) throw std::invalid_argument("camera: image size must be > 0");
    if (!(frame_rate > 0.0)) throw std::invalid_argument("camera: frame_rate must be > 0");
    if (!(min_apparent_px >= 0.0)) throw std::invalid_argument("camera: min_apparent_px must be >= 0");
  }

  bool operator==(const CameraModel&) const = default;
};

/**
 * @brief Size-dependent detector noise.
 *
 * sigma = sigma_at_ref * (reference_apparent_size / apparent_side)^size_exponent,
 * independently for position (per camera axis) and rotation. With
 * probability outlier_probability both sigmas are multiplied by the outlier scales.
 */
struct NoiseModel {
  double position_sigma_at_ref = 0.0;  ///< [m]
  double rotation_sigma_at_ref = 0.0;  ///< [rad]
  double reference_apparent_size = 100.0;  ///< [px]
  double size_exponent = 1.0;
  double outlier_probability = 0.0;
  double outlier_position_scale = 10.0;
  double outlier_rotation_scale = 10.0;
  std::uint64_t seed = 0;

  static NoiseModel none() { return {}; }

  /// 2 cm / 2 deg at 100 px, inverse-size scaling, 5% outliers at 10x.
  static NoiseModel benchmark() {
    NoiseModel n;
    n.position_sigma_at_ref = 0.02;
    n.rotation_sigma_at_ref = deg2rad(2.0);
    n.outlier_probability = 0.05;
    return n;
  }

  void validate() const {
    if (!(position_sigma_at_ref >= 0.0) || !(rotation_sigma_at_ref >= 0.0))
      throw std::invalid_argument("noise: sigmas must be >= 0");
    if (!(reference_apparent_size > 0.0)) throw std::invalid_argument("noise: reference_apparent_size must be > 0");
    if (!(outlier_probability >= 0.0 && outlier_probability <= 1.0))
      throw std::invalid_argument("noise: outlier_probability must be in [0, 1]");
    if (!(outlier_position_scale >= 0.0) || !(outlier_rotation_scale >= 0.0))
      throw std::invalid_argument("noise: outlier scales must be >= 0");
  }

  bool operator==(const NoiseModel&) const = default;
};

struct Detection {
  int tag_id = 0;
  Pose pose_tag_in_camera;
  double apparent_side = 0.0;  ///< [px]

  bool operator==(const Detection&) const = default;
};

struct VisibleTag {
  TagEntry entry;
  double apparent_side = 0.0;
  Pose tag_in_camera;  ///< exact, noise-free
};

inline Pose camera_in_world(const CameraModel& cam, const Pose& body_in_world) {
  return compose(body_in_world, cam.pose_in_body);
}

/**
 * @brief Tags whose four corners project inside the image, whose mean
 * projected side is at least cam.min_apparent_px and whose front face is
 * towards the camera. Result follows map order.
 */
inline std::vector<VisibleTag> visible_tags(const TagMap& map, const CameraModel& cam, const Pose& body_pose_true) {
  const Pose world_in_cam = inverse(camera_in_world(cam, body_pose_true));
  std::vector<VisibleTag> out;
  for (const auto& e : map.entries()) {
    const Pose tag_in_cam = compose(world_in_cam, e.pose_in_world);
    const Vector3 normal = tag_in_cam.orientation.rotate(Vector3::UnitZ());
    if (normal.dot(-tag_in_cam.position) <= 0.0) continue;

    const double h = 0.5 * e.side();
    const Vector3 corners[4] = {{-h, -h, 0}, {h, -h, 0}, {h, h, 0}, {-h, h, 0}};
    Eigen::Vector2d px[4];
    bool inside = true;
    for (int k = 0; k < 4 && inside; ++k) {
      const Vector3 c = tag_in_cam.transform(corners[k]);
      if (c.z() <= 0.0) {
        inside = false;
        break;
      }
      px[k] = {cam.focal_px * c.x() / c.z() + cam.cx, cam.focal_px * c.y() / c.z() + cam.cy};
      inside = px[k].x() >= 0.0 && px[k].x() <= cam.width && px[k].y() >= 0.0 && px[k].y() <= cam.height;
    }
    if (!inside) continue;
    double side = 0.0;
    for (int k = 0; k < 4; ++k) side += (px[(k + 1) % 4] - px[k]).norm();
    side /= 4.0;
    if (side < cam.min_apparent_px) continue;
    out.push_back({e, side, tag_in_cam});
  }
  return out;
}

namespace detail {

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Platform-independent draws on top of mt19937_64 (whose output is fixed by the standard).
class NoiseStream {
 public:
  NoiseStream(std::uint64_t seed, std::uint64_t frame, std::int64_t tag_id)
      : rng_(splitmix64(splitmix64(splitmix64(seed) ^ frame) ^ static_cast<std::uint64_t>(tag_id))) {}

  /// Uniform in [0, 1).
  double uniform() { return static_cast<double>(rng_() >> 11) * 0x1.0p-53; }

  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u1 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    spare_ = r * std::sin(2.0 * kPi * u2);
    has_spare_ = true;
    return r * std::cos(2.0 * kPi * u2);
  }

 private:
  std::mt19937_64 rng_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace detail

/**
 * @brief Applies the noise model to an exact tag-in-camera pose.
 *
 * Draw order is fixed: outlier coin, three position normals, three axis
 * normals, one angle normal. The stream depends only on (seed, frame, tag id).
 */
inline Pose perturb(const Pose& exact, double apparent_side, const NoiseModel& noise, std::uint64_t frame_index,
                    int tag_id) {
  detail::NoiseStream rng(noise.seed, frame_index, tag_id);
  const double scale = std::pow(noise.reference_apparent_size / apparent_side, noise.size_exponent);
  double sp = noise.position_sigma_at_ref * scale;
  double sr = noise.rotation_sigma_at_ref * scale;
  if (rng.uniform() < noise.outlier_probability) {
    sp *= noise.outlier_position_scale;
    sr *= noise.outlier_rotation_scale;
  }
  const Vector3 dp(rng.normal(), rng.normal(), rng.normal());
  Vector3 axis(rng.normal(), rng.normal(), rng.normal());
  const double angle = std::abs(rng.normal()) * sr;
  if (axis.norm() == 0.0) axis = Vector3::UnitZ();

  Pose out = exact;
  if (sp != 0.0) out.position += sp * dp;
  if (angle != 0.0) out.orientation = exact.orientation * UnitQuaternion::from_axis_angle(axis, angle);
  return out;
}

inline std::vector<Detection> detect(const TagMap& map, const CameraModel& cam, const NoiseModel& noise,
                                     const Pose& body_pose_true, std::uint64_t frame_index) {
  std::vector<Detection> out;
  for (const auto& v : visible_tags(map, cam, body_pose_true)) {
    Detection d;
    d.tag_id = v.entry.id;
    d.apparent_side = v.apparent_side;
    d.pose_tag_in_camera = perturb(v.tag_in_camera, v.apparent_side, noise, frame_index, v.entry.id);
    out.push_back(d);
  }
  return out;
}

/// Detections of one frame, as stored in a dump file.
struct DetectionFrame {
  std::uint64_t frame = 0;
  double t = 0.0;
  std::vector<Detection> detections;
};

/// `<frame> <t> <id> <px> <py> <pz> <qw> <qx> <qy> <qz> <apparent_px>`, one line per detection.
inline std::string format_detection_line(std::uint64_t frame, double t, const Detection& d) {
  using detail::format_double;
  const Vector3& p = d.pose_tag_in_camera.position;
  const UnitQuaternion q = d.pose_tag_in_camera.orientation.canonical();
  std::string s = std::to_string(frame) + " " + format_double(t) + " " + std::to_string(d.tag_id);
  for (double v : {p.x(), p.y(), p.z(), q.w(), q.x(), q.y(), q.z(), d.apparent_side}) s += " " + format_double(v);
  return s;
}

/// Groups dump lines by frame number (ascending). Comments start with '#'.
inline std::vector<DetectionFrame> parse_detection_dump(std::istream& in, const std::string& source = "<dump>") {
  std::map<std::uint64_t, DetectionFrame> frames;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    std::istringstream ls(line);
    std::uint64_t frame;
    if (!(ls >> frame)) {
      std::string rest;
      if (std::istringstream(line) >> rest) throw ParseError(source + ":" + std::to_string(lineno) + ": field frame: not an integer");
      continue;
    }
    double t, v[8];
    int id;
    if (!(ls >> t)) throw ParseError(source + ":" + std::to_string(lineno) + ": field t: missing or not a number");
    if (!(ls >> id)) throw ParseError(source + ":" + std::to_string(lineno) + ": field id: missing or not an integer");
    for (double& x : v)
      if (!(ls >> x)) throw ParseError(source + ":" + std::to_string(lineno) + ": expected 11 fields");
    Detection d;
    d.tag_id = id;
    d.pose_tag_in_camera.position = Vector3(v[0], v[1], v[2]);
    d.pose_tag_in_camera.orientation = UnitQuaternion(v[3], v[4], v[5], v[6]);
    d.apparent_side = v[7];
    auto& f = frames[frame];
    f.frame = frame;
    f.t = t;
    f.detections.push_back(d);
  }
  std::vector<DetectionFrame> out;
  out.reserve(frames.size());
  for (auto& [k, f] : frames) out.push_back(std::move(f));
  return out;
}

}  // namespace taglok
