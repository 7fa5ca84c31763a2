// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>
#include <vector>

#include <Eigen/Dense>

namespace mvact {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

inline constexpr int kRotationBins = 72;
inline constexpr double kRotationBinDegrees = 5.0;

struct AttentionMap {
  std::string label;  ///< e.g. "crossview.0.head1"
  RowMatrix weights;  ///< queries x keys
};

/// Raw network outputs for one observation. Binary logits put the "true"
/// class (gripper open, collision allowed) at column 0.
struct PolicyOutput {
  std::vector<RowMatrix> heatmap_logits;  ///< per view, horizon x resolution^2
  RowMatrix rotation_logits;              ///< horizon x (3 * 72), axes yaw|pitch|roll
  RowMatrix gripper_logits;               ///< horizon x 2
  RowMatrix collision_logits;             ///< horizon x 2
  std::vector<AttentionMap> attention_maps;

  int horizon() const { return static_cast<int>(rotation_logits.rows()); }
  int views() const { return static_cast<int>(heatmap_logits.size()); }
};

}  // namespace mvact
