// SPDX-License-Identifier: Apache-2.0
#include "mvact/geometry.hpp"

#include <algorithm>

namespace mvact {

double box_signed_distance(const Vec3& p, const Pose& pose, const Vec3& half_extents) {
  const Vec3 local = pose.rotation.conjugate() * (p - pose.position);
  const Vec3 q = local.cwiseAbs() - half_extents;
  const double outside = q.cwiseMax(0.0).norm();
  const double inside = std::min(q.maxCoeff(), 0.0);
  return outside + inside;
}

double cylinder_signed_distance(const Vec3& p, const Pose& pose, const Vec3& half_extents) {
  const Vec3 local = pose.rotation.conjugate() * (p - pose.position);
  const double radial = std::hypot(local.x(), local.y()) - half_extents.x();
  const double axial = std::abs(local.z()) - half_extents.z();
  const Eigen::Vector2d d(radial, axial);
  return d.cwiseMax(0.0).norm() + std::min(d.maxCoeff(), 0.0);
}

std::uint64_t mix_seed(std::uint64_t base, std::uint64_t tag) noexcept {
  // splitmix64 finalizer over the combined words
  std::uint64_t z = base + 0x9e3779b97f4a7c15ULL * (tag + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

}  // namespace mvact
