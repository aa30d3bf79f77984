#pragma once
/**
 * @file geometry.hpp
 * @brief SO(3) / SE(3) primitives used by every stage of the estimator.
 *
 * Conventions:
 * - quaternions are scalar-first (w, x, y, z) with the Hamilton product;
 * - a Pose maps points of its child frame into its parent frame;
 * - angles are radians everywhere except at reporting boundaries.
 */

#include <Eigen/Core>
#include <Eigen/Geometry>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

namespace taglok {

using Vector3 = Eigen::Vector3d;
using Vector4 = Eigen::Vector4d;
using RotationMatrix = Eigen::Matrix3d;

inline constexpr double kPi = std::numbers::pi;

inline constexpr double deg2rad(double deg) { return deg * kPi / 180.0; }
inline constexpr double rad2deg(double rad) { return rad * 180.0 / kPi; }

/// Wraps an angle into (-pi, pi].
inline double wrap_angle(double a) {
  a = std::remainder(a, 2.0 * kPi);
  if (a <= -kPi) a += 2.0 * kPi;
  return a;
}

/**
 * @brief Unit quaternion, scalar-first.
 *
 * Every constructor normalizes, so a live instance always has unit norm.
 * The sign is kept as given; use canonical() for the w >= 0 representative.
 */
class UnitQuaternion {
 public:
  UnitQuaternion() : c_(1.0, 0.0, 0.0, 0.0) {}

  UnitQuaternion(double w, double x, double y, double z) : c_(w, x, y, z) {
    normalize();
  }

  explicit UnitQuaternion(const Vector4& wxyz) : c_(wxyz) { normalize(); }

  static UnitQuaternion identity() { return {}; }

  /// Rotation of `angle` radians about `axis` (axis need not be unit length).
  static UnitQuaternion from_axis_angle(const Vector3& axis, double angle) {
    const double n = axis.norm();
    if (n == 0.0) return identity();
    const Vector3 u = axis / n;
    const double s = std::sin(0.5 * angle);
    return {std::cos(0.5 * angle), s * u.x(), s * u.y(), s * u.z()};
  }

  double w() const { return c_[0]; }
  double x() const { return c_[1]; }
  double y() const { return c_[2]; }
  double z() const { return c_[3]; }

  const Vector4& coeffs() const { return c_; }
  Vector3 vec() const { return c_.tail<3>(); }

  UnitQuaternion operator-() const { return UnitQuaternion(Raw{}, -c_); }

  UnitQuaternion conjugate() const {
    return UnitQuaternion(Raw{}, Vector4(c_[0], -c_[1], -c_[2], -c_[3]));
  }

  /// Hamilton product.
  UnitQuaternion operator*(const UnitQuaternion& o) const {
    const double w1 = w(), x1 = x(), y1 = y(), z1 = z();
    const double w2 = o.w(), x2 = o.x(), y2 = o.y(), z2 = o.z();
    return {w1 * w2 - x1 * x2 - y1 * y2 - z1 * z2,
            w1 * x2 + x1 * w2 + y1 * z2 - z1 * y2,
            w1 * y2 - x1 * z2 + y1 * w2 + z1 * x2,
            w1 * z2 + x1 * y2 - y1 * x2 + z1 * w2};
  }

  Vector3 rotate(const Vector3& v) const {
    // v' = v + 2w (u x v) + 2 u x (u x v)
    const Vector3 u = vec();
    const Vector3 t = 2.0 * u.cross(v);
    return v + w() * t + u.cross(t);
  }

  /// Representative with w >= 0; on w == 0 the first nonzero component is positive.
  UnitQuaternion canonical() const {
    for (int i = 0; i < 4; ++i) {
      if (c_[i] > 0.0) return *this;
      if (c_[i] < 0.0) return -*this;
    }
    return *this;
  }

  double dot(const UnitQuaternion& o) const { return c_.dot(o.c_); }

  bool operator==(const UnitQuaternion& o) const { return c_ == o.c_; }

 private:
  struct Raw {};
  UnitQuaternion(Raw, const Vector4& c) : c_(c) {}

  void normalize() {
    const double n = c_.norm();
    if (!(n > 0.0) || !std::isfinite(n))
      throw std::invalid_argument("UnitQuaternion: zero or non-finite norm");
    c_ /= n;
  }

  Vector4 c_;
};

inline RotationMatrix quat_to_matrix(const UnitQuaternion& q) {
  const double w = q.w(), x = q.x(), y = q.y(), z = q.z();
  RotationMatrix r;
  r << 1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y),
      2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x),
      2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y);
  return r;
}

/// Max-abs deviation of R^T R from I and of det(R) from 1.
inline double orthonormality_error(const RotationMatrix& r) {
  const double ortho = (r.transpose() * r - RotationMatrix::Identity()).cwiseAbs().maxCoeff();
  return std::max(ortho, std::abs(r.determinant() - 1.0));
}

/**
 * @brief Shepperd-style conversion, branching on the largest of
 * (trace, R00, R11, R22) to stay well conditioned near 180 degrees.
 *
 * Throws std::invalid_argument when R is not in SO(3) within 1e-6.
 * The result is canonical (w >= 0).
 */
inline UnitQuaternion matrix_to_quat(const RotationMatrix& r) {
  if (!r.allFinite() || orthonormality_error(r) > 1e-6)
    throw std::invalid_argument("matrix_to_quat: matrix is not a rotation");

  const double tr = r.trace();
  double w, x, y, z;
  if (tr >= r(0, 0) && tr >= r(1, 1) && tr >= r(2, 2)) {
    const double s = 2.0 * std::sqrt(1.0 + tr);
    w = 0.25 * s;
    x = (r(2, 1) - r(1, 2)) / s;
    y = (r(0, 2) - r(2, 0)) / s;
    z = (r(1, 0) - r(0, 1)) / s;
  } else if (r(0, 0) >= r(1, 1) && r(0, 0) >= r(2, 2)) {
    const double s = 2.0 * std::sqrt(1.0 + r(0, 0) - r(1, 1) - r(2, 2));
    w = (r(2, 1) - r(1, 2)) / s;
    x = 0.25 * s;
    y = (r(0, 1) + r(1, 0)) / s;
    z = (r(0, 2) + r(2, 0)) / s;
  } else if (r(1, 1) >= r(2, 2)) {
    const double s = 2.0 * std::sqrt(1.0 + r(1, 1) - r(0, 0) - r(2, 2));
    w = (r(0, 2) - r(2, 0)) / s;
    x = (r(0, 1) + r(1, 0)) / s;
    y = 0.25 * s;
    z = (r(1, 2) + r(2, 1)) / s;
  } else {
    const double s = 2.0 * std::sqrt(1.0 + r(2, 2) - r(0, 0) - r(1, 1));
    w = (r(1, 0) - r(0, 1)) / s;
    x = (r(0, 2) + r(2, 0)) / s;
    y = (r(1, 2) + r(2, 1)) / s;
    z = 0.25 * s;
  }
  return UnitQuaternion(w, x, y, z).canonical();
}

inline RotationMatrix rot_x(double a) { return quat_to_matrix(UnitQuaternion::from_axis_angle(Vector3::UnitX(), a)); }
inline RotationMatrix rot_y(double a) { return quat_to_matrix(UnitQuaternion::from_axis_angle(Vector3::UnitY(), a)); }
inline RotationMatrix rot_z(double a) { return quat_to_matrix(UnitQuaternion::from_axis_angle(Vector3::UnitZ(), a)); }

/// Rigid transform: position of the child origin and child orientation, both in the parent frame.
struct Pose {
  Vector3 position = Vector3::Zero();
  UnitQuaternion orientation;

  static Pose identity() { return {}; }

  RotationMatrix rotation() const { return quat_to_matrix(orientation); }

  Vector3 transform(const Vector3& p) const { return orientation.rotate(p) + position; }

  Eigen::Matrix4d homogeneous() const {
    Eigen::Matrix4d m = Eigen::Matrix4d::Identity();
    m.topLeftCorner<3, 3>() = rotation();
    m.topRightCorner<3, 1>() = position;
    return m;
  }

  bool operator==(const Pose& o) const {
    return position == o.position && orientation == o.orientation;
  }
};

/// a ∘ b: the pose of b's child frame expressed in a's parent frame.
inline Pose compose(const Pose& a, const Pose& b) {
  return {a.position + a.orientation.rotate(b.position), a.orientation * b.orientation};
}

inline Pose inverse(const Pose& p) {
  const UnitQuaternion qi = p.orientation.conjugate();
  return {-qi.rotate(p.position), qi};
}

inline Pose operator*(const Pose& a, const Pose& b) { return compose(a, b); }

/// Roll/pitch/yaw for R = Rz(yaw) Ry(pitch) Rx(roll).
struct EulerZYX {
  double roll = 0.0;
  double pitch = 0.0;
  double yaw = 0.0;
};

inline RotationMatrix euler_to_matrix(const EulerZYX& e) {
  return rot_z(e.yaw) * rot_y(e.pitch) * rot_x(e.roll);
}

inline EulerZYX matrix_to_euler(const RotationMatrix& r) {
  EulerZYX e;
  e.pitch = std::atan2(-r(2, 0), std::hypot(r(0, 0), r(1, 0)));
  e.yaw = std::atan2(r(1, 0), r(0, 0));
  e.roll = std::atan2(r(2, 1), r(2, 2));
  e.roll = wrap_angle(e.roll);
  e.yaw = wrap_angle(e.yaw);
  return e;
}

/**
 * @brief Rotation angle of a·bᵀ in [0, pi].
 *
 * Uses atan2(|axial part|, (tr - 1) / 2), accurate both near 0 and near pi.
 */
inline double riemannian_distance(const RotationMatrix& a, const RotationMatrix& b) {
  const RotationMatrix m = a * b.transpose();
  const double s = 0.5 * Vector3(m(2, 1) - m(1, 2), m(0, 2) - m(2, 0), m(1, 0) - m(0, 1)).norm();
  const double c = 0.5 * (m.trace() - 1.0);
  return std::atan2(s, c);
}

/// Rotation angle between two quaternions, sign-invariant.
inline double riemannian_distance(const UnitQuaternion& a, const UnitQuaternion& b) {
  const UnitQuaternion d = a.conjugate() * b;
  return 2.0 * std::atan2(d.vec().norm(), std::abs(d.w()));
}

/// min(|a - b|, |a + b|).
inline double quat_l2_distance(const UnitQuaternion& a, const UnitQuaternion& b) {
  return std::min((a.coeffs() - b.coeffs()).norm(), (a.coeffs() + b.coeffs()).norm());
}

/// Frobenius norm of a - b.
inline double chordal_distance(const RotationMatrix& a, const RotationMatrix& b) {
  return (a - b).norm();
}

}  // namespace taglok
