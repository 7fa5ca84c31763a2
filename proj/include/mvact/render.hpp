// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>
#include <vector>

#include "mvact/geometry.hpp"
#include "mvact/sim.hpp"

namespace mvact::render {

/// Orthographic camera. `forward` points from the scene toward the camera, so
/// depth grows away from it: depth = near - (p - center) . forward.
struct OrthoView {
  std::string name;
  Vec3 center = Vec3::Zero();
  Vec3 right = Vec3::UnitX();
  Vec3 up = Vec3::UnitY();
  Vec3 forward = Vec3::UnitZ();
  double window = 1.0;  ///< side length of the square metric window
  double near = 0.5;    ///< distance from center to the image plane
  int resolution = 32;

  void validate() const;
};

struct Projection {
  double row = 0.0;
  double col = 0.0;
  double depth = 0.0;
  bool in_bounds = false;
};

/// Continuous pixel coordinates: pixel (i, j) covers [i, i+1) x [j, j+1).
Projection project_point(const OrthoView& view, const Vec3& xyz);

/// Inverse of project_point for a given continuous pixel and depth.
Vec3 unproject(const OrthoView& view, double row, double col, double depth);

/// The five axis-aligned views (top, front, back, left, right) enclosing the
/// workspace as a cube.
std::vector<OrthoView> cube_views(const Box3& bounds, int resolution);

struct VirtualView {
  using Channels = Eigen::Matrix<double, Eigen::Dynamic, 3, Eigen::RowMajor>;

  OrthoView view;
  Channels rgb;                     ///< per pixel, row-major pixel order
  Channels xyz;                     ///< zero where unoccupied
  Eigen::VectorXd depth;            ///< +inf where unoccupied
  std::vector<std::uint8_t> occupancy;
  std::vector<int> point_index;     ///< winning point, -1 where unoccupied

  int resolution() const { return view.resolution; }
};

/// Z-buffered one-pixel splatting. Nearest depth wins; at exactly equal depth
/// the smaller point index wins.
std::vector<VirtualView> render_views(const sim::PointCloud& cloud, const std::vector<OrthoView>& views);

/// Binary PPM (P6) of the color channel.
void write_ppm(const std::string& path, const VirtualView& view);

}  // namespace mvact::render
