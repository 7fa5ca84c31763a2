// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <vector>

#include "mvact/demo_data.hpp"
#include "mvact/policy_output.hpp"
#include "mvact/render.hpp"

namespace mvact::codec {

/// Regular grid of candidate positions over the workspace. Cell (ix, iy, iz)
/// has linear index (ix * G + iy) * G + iz.
struct Grid3D {
  Box3 bounds;
  int cells_per_axis = 64;

  Eigen::Index cell_count() const {
    return static_cast<Eigen::Index>(cells_per_axis) * cells_per_axis * cells_per_axis;
  }
  Vec3 cell_size() const { return (bounds.max() - bounds.min()) / cells_per_axis; }
  Vec3 cell_center(Eigen::Index index) const;
  double half_diagonal() const { return 0.5 * cell_size().norm(); }
  void validate() const;
};

enum class ViewFusion { sum, product };

struct PositionMap {
  Eigen::VectorXd probabilities;  ///< resolution^2, row-major pixels
  bool out_of_bounds = false;     ///< projection missed the view; map is uniform
};

/// Truncated (3 sigma) isotropic Gaussian around each view's projection of
/// xyz, renormalized to sum to one.
std::vector<PositionMap> encode_position(const Vec3& xyz, const std::vector<render::OrthoView>& views,
                                         double sigma_px);

/// Bilinear sample at continuous pixel coordinates; pixel centers sit at
/// half-integers and pixels outside the image read as zero.
double bilinear_sample(const Eigen::Ref<const Eigen::VectorXd>& map, int resolution, double row, double col);

/// Index of the highest-scoring grid cell (lowest index on ties).
Eigen::Index best_cell(const std::vector<Eigen::VectorXd>& maps, const std::vector<render::OrthoView>& views,
                       const Grid3D& grid, ViewFusion fusion = ViewFusion::sum);

Vec3 decode_position(const std::vector<Eigen::VectorXd>& maps, const std::vector<render::OrthoView>& views,
                     const Grid3D& grid, ViewFusion fusion = ViewFusion::sum);

/// Bins of 5 degrees for intrinsic Z-Y-X Euler angles, ordered yaw, pitch, roll.
std::array<int, 3> encode_rotation(const Quat& q);
Quat decode_rotation(const std::array<int, 3>& bins);

struct HeatmapTargets {
  std::vector<RowMatrix> maps;  ///< per view, horizon x resolution^2; invalid rows are zero
  std::vector<std::array<int, 3>> rotation_bins;
  std::vector<std::uint8_t> gripper;
  std::vector<std::uint8_t> collision;
  std::vector<std::uint8_t> valid_mask;

  int horizon() const { return static_cast<int>(valid_mask.size()); }
};

HeatmapTargets encode_targets(const demo::TrainingSample& sample, const std::vector<render::OrthoView>& views,
                              double sigma_px);

/// Spatial softmax per (view, step), back-projection onto the grid, and
/// argmax over the discrete heads.
std::vector<sim::Action8> decode_actions(const PolicyOutput& output, const std::vector<render::OrthoView>& views,
                                         const Grid3D& grid, ViewFusion fusion = ViewFusion::sum);

/// Softmax of a logit vector, numerically stabilized.
Eigen::VectorXd softmax(const Eigen::Ref<const Eigen::VectorXd>& logits);

}  // namespace mvact::codec
