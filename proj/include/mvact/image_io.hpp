// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>
#include <vector>

#include <Eigen/Dense>

namespace mvact {

/// 8-bit RGB raster written as binary PPM.
class Image {
 public:
  Image(int rows, int cols) : rows_(rows), cols_(cols), data_(static_cast<std::size_t>(rows * cols * 3), 0) {}

  int rows() const { return rows_; }
  int cols() const { return cols_; }

  /// Color components in [0, 1]; clamped.
  void set(int row, int col, const Eigen::Vector3d& rgb);

  void write_ppm(const std::string& path) const;

 private:
  int rows_;
  int cols_;
  std::vector<unsigned char> data_;
};

/// Maps a scalar field to a gray-to-red ramp, normalized by its maximum.
Image heat_image(const Eigen::Ref<const Eigen::VectorXd>& values, int rows, int cols);

}  // namespace mvact
