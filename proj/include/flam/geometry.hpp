#pragma once

#include <Eigen/Dense>
#include <Eigen/Geometry>

#include <cmath>
#include <stdexcept>

namespace flam {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Quat = Eigen::Quaterniond;

inline bool finite(const Vec3& v) {
  return std::isfinite(v[0]) && std::isfinite(v[1]) && std::isfinite(v[2]);
}

inline bool finite(const Quat& q) {
  return std::isfinite(q.w()) && std::isfinite(q.x()) && std::isfinite(q.y()) &&
         std::isfinite(q.z());
}

/// Flips the sign so the scalar part is non-negative. Both signs encode the
/// same rotation; distances below assume this canonical form.
inline Quat canonical(const Quat& q) {
  if (q.w() < 0.0) return Quat(-q.w(), -q.x(), -q.y(), -q.z());
  return q;
}

/// Quaternion product, renormalized. All rotation composition goes through
/// here so unit norm survives long chains.
inline Quat qmul(const Quat& a, const Quat& b) { return (a * b).normalized(); }

inline Quat quat_from_axis_angle(const Vec3& axis, double angle) {
  return Quat(Eigen::AngleAxisd(angle, axis));
}

/// Log map: unit quaternion -> rotation vector (axis * angle, angle in [0, pi]
/// for canonical input).
inline Vec3 quat_log(const Quat& q_in) {
  const Quat q = canonical(q_in);
  const Vec3 v(q.x(), q.y(), q.z());
  const double n = v.norm();
  if (n < 1e-12) return 2.0 * v;  // small angle: sin(a/2) ~ a/2
  const double angle = 2.0 * std::atan2(n, q.w());
  return v * (angle / n);
}

/// Exp map: rotation vector -> unit quaternion.
inline Quat quat_exp(const Vec3& v) {
  const double angle = v.norm();
  if (angle < 1e-12) {
    Quat q(1.0, 0.5 * v[0], 0.5 * v[1], 0.5 * v[2]);
    return q.normalized();
  }
  const Vec3 axis = v / angle;
  return quat_from_axis_angle(axis, angle);
}

/// Rotation difference b^-1 * a as a rotation vector.
inline Vec3 rotation_difference(const Quat& a, const Quat& b) {
  return quat_log(qmul(b.conjugate(), a));
}

/// Geodesic distance on SO(3), in radians.
inline double geodesic_distance(const Quat& a, const Quat& b) {
  return rotation_difference(a, b).norm();
}

/// Rotation by `angle` about +y restricted to the x-z plane. Matches the 3D
/// rotation R_y(angle) applied to (x, 0, z).
inline Vec2 rot_xz(double angle, const Vec2& v) {
  const double c = std::cos(angle), s = std::sin(angle);
  return Vec2(c * v[0] + s * v[1], -s * v[0] + c * v[1]);
}

/// Derivative direction of rot_xz with respect to the angle at angle 0,
/// i.e. the planar "omega cross r" map for rotation about +y.
inline Vec2 perp_xz(const Vec2& v) { return Vec2(v[1], -v[0]); }

}  // namespace flam
