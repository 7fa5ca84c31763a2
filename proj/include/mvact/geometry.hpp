// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>

#include <Eigen/Dense>
#include <Eigen/Geometry>

namespace mvact {

using Vec3 = Eigen::Vector3d;
using Quat = Eigen::Quaterniond;
using Box3 = Eigen::AlignedBox3d;

template <typename Scalar>
struct BasicPose {
  Eigen::Matrix<Scalar, 3, 1> position = Eigen::Matrix<Scalar, 3, 1>::Zero();
  Eigen::Quaternion<Scalar> rotation = Eigen::Quaternion<Scalar>::Identity();

  friend bool operator==(const BasicPose& a, const BasicPose& b) {
    return a.position == b.position && a.rotation.coeffs() == b.rotation.coeffs();
  }
};
using Pose = BasicPose<double>;

template <typename Scalar>
constexpr Scalar deg2rad(Scalar deg) {
  return deg * std::numbers::pi_v<Scalar> / Scalar(180);
}

template <typename Scalar>
constexpr Scalar rad2deg(Scalar rad) {
  return rad * Scalar(180) / std::numbers::pi_v<Scalar>;
}

/// Geodesic angle between two unit quaternions, 2*acos(|a.b|), in radians.
template <typename Scalar>
Scalar quaternion_angle(const Eigen::Quaternion<Scalar>& a, const Eigen::Quaternion<Scalar>& b) {
  const Scalar d = std::min(Scalar(1), std::abs(a.dot(b)));
  return Scalar(2) * std::acos(d);
}

/// Wraps an angle in degrees into [0, 360).
template <typename Scalar>
Scalar wrap_degrees(Scalar deg) {
  Scalar a = std::fmod(deg, Scalar(360));
  if (a < 0) a += Scalar(360);
  if (a >= Scalar(360)) a = 0;
  return a;
}

/// Smallest absolute difference between two angles in degrees.
template <typename Scalar>
Scalar angular_distance_degrees(Scalar a, Scalar b) {
  const Scalar d = wrap_degrees(a - b);
  return std::min(d, Scalar(360) - d);
}

/// Pitch within this many degrees of +-90 is treated as gimbal lock.
inline constexpr double kGimbalToleranceDeg = 1e-6;

/// Intrinsic Z-Y-X Euler angles (yaw, pitch, roll) in degrees, each wrapped to
/// [0, 360). Rotation = Rz(yaw) * Ry(pitch) * Rx(roll). At gimbal lock the roll
/// is folded into the yaw and reported as zero.
template <typename Scalar>
Eigen::Matrix<Scalar, 3, 1> euler_zyx_degrees(const Eigen::Quaternion<Scalar>& q) {
  const Eigen::Matrix<Scalar, 3, 3> r = q.normalized().toRotationMatrix();
  const Scalar sp = std::clamp(-r(2, 0), Scalar(-1), Scalar(1));
  const Scalar pitch = std::asin(sp);
  Scalar yaw;
  Scalar roll;
  if (std::abs(std::abs(rad2deg(pitch)) - Scalar(90)) < Scalar(kGimbalToleranceDeg)) {
    roll = 0;
    yaw = std::atan2(-r(0, 1), r(1, 1));
  } else {
    yaw = std::atan2(r(1, 0), r(0, 0));
    roll = std::atan2(r(2, 1), r(2, 2));
  }
  return {wrap_degrees(rad2deg(yaw)), wrap_degrees(rad2deg(pitch)), wrap_degrees(rad2deg(roll))};
}

template <typename Scalar>
Eigen::Quaternion<Scalar> quaternion_from_euler_zyx_degrees(Scalar yaw, Scalar pitch, Scalar roll) {
  using AngleAxis = Eigen::AngleAxis<Scalar>;
  using V3 = Eigen::Matrix<Scalar, 3, 1>;
  Eigen::Quaternion<Scalar> q = AngleAxis(deg2rad(yaw), V3::UnitZ()) *
                                AngleAxis(deg2rad(pitch), V3::UnitY()) *
                                AngleAxis(deg2rad(roll), V3::UnitX());
  return q.normalized();
}

inline Quat yaw_rotation(double yaw_rad) { return Quat(Eigen::AngleAxisd(yaw_rad, Vec3::UnitZ())); }

/// Signed distance from a point to an oriented box, negative inside.
double box_signed_distance(const Vec3& p, const Pose& pose, const Vec3& half_extents);

/// Signed distance to a z-aligned (in its own frame) cylinder with radius
/// half_extents.x() and half height half_extents.z().
double cylinder_signed_distance(const Vec3& p, const Pose& pose, const Vec3& half_extents);

/// Mixes a base seed with a stream tag into an independent 64-bit seed.
std::uint64_t mix_seed(std::uint64_t base, std::uint64_t tag) noexcept;

}  // namespace mvact
