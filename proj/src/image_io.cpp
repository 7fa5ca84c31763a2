// SPDX-License-Identifier: Apache-2.0
#include "mvact/image_io.hpp"

#include <algorithm>
#include <fstream>

#include "mvact/error.hpp"

namespace mvact {

void Image::set(int row, int col, const Eigen::Vector3d& rgb) {
  const auto base = static_cast<std::size_t>((row * cols_ + col) * 3);
  for (int c = 0; c < 3; ++c) {
    const double v = std::clamp(rgb(c), 0.0, 1.0);
    data_[base + static_cast<std::size_t>(c)] = static_cast<unsigned char>(v * 255.0 + 0.5);
  }
}

void Image::write_ppm(const std::string& path) const {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out << "P6\n" << cols_ << " " << rows_ << "\n255\n";
  out.write(reinterpret_cast<const char*>(data_.data()), static_cast<std::streamsize>(data_.size()));
  if (!out) throw Error(Errc::io_failure, "cannot write " + path);
}

Image heat_image(const Eigen::Ref<const Eigen::VectorXd>& values, int rows, int cols) {
  Image img(rows, cols);
  const double peak = values.size() ? values.maxCoeff() : 0.0;
  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c < cols; ++c) {
      const double v = peak > 0.0 ? values(r * cols + c) / peak : 0.0;
      img.set(r, c, Eigen::Vector3d(v, 0.15 + 0.5 * v * (1.0 - v), 0.15 * (1.0 - v)));
    }
  }
  return img;
}

}  // namespace mvact
