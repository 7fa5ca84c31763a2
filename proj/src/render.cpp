// SPDX-License-Identifier: Apache-2.0
#include "mvact/render.hpp"

#include <cmath>
#include <fstream>
#include <limits>

#include "mvact/error.hpp"
#include "mvact/image_io.hpp"

namespace mvact::render {

void OrthoView::validate() const {
  constexpr double tol = 1e-9;
  const bool unit = std::abs(right.norm() - 1) < tol && std::abs(up.norm() - 1) < tol &&
                    std::abs(forward.norm() - 1) < tol;
  const bool orthogonal =
      std::abs(right.dot(up)) < tol && std::abs(right.dot(forward)) < tol && std::abs(up.dot(forward)) < tol;
  if (!unit || !orthogonal) throw Error(Errc::invalid_argument, "view '" + name + "' basis is not orthonormal");
  if (resolution < 8) throw Error(Errc::invalid_argument, "view '" + name + "' resolution must be >= 8");
  if (!(window > 0.0)) throw Error(Errc::invalid_argument, "view '" + name + "' window must be positive");
}

Projection project_point(const OrthoView& view, const Vec3& xyz) {
  const Vec3 d = xyz - view.center;
  const double res = view.resolution;
  Projection p;
  p.col = (d.dot(view.right) / view.window + 0.5) * res;
  p.row = (0.5 - d.dot(view.up) / view.window) * res;
  p.depth = view.near - d.dot(view.forward);
  p.in_bounds = p.row >= 0.0 && p.row < res && p.col >= 0.0 && p.col < res;
  return p;
}

Vec3 unproject(const OrthoView& view, double row, double col, double depth) {
  const double res = view.resolution;
  const double r = (col / res - 0.5) * view.window;
  const double u = (0.5 - row / res) * view.window;
  const double f = view.near - depth;
  return view.center + r * view.right + u * view.up + f * view.forward;
}

std::vector<OrthoView> cube_views(const Box3& bounds, int resolution) {
  const Vec3 c = bounds.center();
  const double window = (bounds.max() - bounds.min()).maxCoeff();
  const auto make = [&](const char* name, const Vec3& right, const Vec3& up, const Vec3& forward) {
    OrthoView v;
    v.name = name;
    v.center = c;
    v.right = right;
    v.up = up;
    v.forward = forward;
    v.window = window;
    v.near = window / 2.0;
    v.resolution = resolution;
    return v;
  };
  const Vec3 x = Vec3::UnitX();
  const Vec3 y = Vec3::UnitY();
  const Vec3 z = Vec3::UnitZ();
  return {
      make("top", x, y, z),
      make("front", x, z, -y),
      make("back", -x, z, y),
      make("left", -y, z, -x),
      make("right", y, z, x),
  };
}

std::vector<VirtualView> render_views(const sim::PointCloud& cloud, const std::vector<OrthoView>& views) {
  if (views.empty()) throw Error(Errc::invalid_argument, "render_views needs at least one view");
  std::vector<VirtualView> out;
  out.reserve(views.size());
  for (const auto& view : views) {
    view.validate();
    const Eigen::Index pixels = static_cast<Eigen::Index>(view.resolution) * view.resolution;
    VirtualView vv;
    vv.view = view;
    vv.rgb = VirtualView::Channels::Zero(pixels, 3);
    vv.xyz = VirtualView::Channels::Zero(pixels, 3);
    vv.depth = Eigen::VectorXd::Constant(pixels, std::numeric_limits<double>::infinity());
    vv.occupancy.assign(static_cast<std::size_t>(pixels), 0);
    vv.point_index.assign(static_cast<std::size_t>(pixels), -1);

    for (Eigen::Index i = 0; i < cloud.size(); ++i) {
      const Vec3 p = cloud.xyz.row(i).transpose().cast<double>();
      const Projection pr = project_point(view, p);
      if (!pr.in_bounds) continue;
      const auto px = static_cast<Eigen::Index>(std::floor(pr.row)) * view.resolution +
                      static_cast<Eigen::Index>(std::floor(pr.col));
      if (pr.depth < vv.depth(px)) {
        vv.depth(px) = pr.depth;
        vv.point_index[static_cast<std::size_t>(px)] = static_cast<int>(i);
      }
    }
    for (Eigen::Index px = 0; px < pixels; ++px) {
      const int idx = vv.point_index[static_cast<std::size_t>(px)];
      if (idx < 0) continue;
      vv.occupancy[static_cast<std::size_t>(px)] = 1;
      vv.rgb.row(px) = cloud.rgb.row(idx).cast<double>();
      vv.xyz.row(px) = cloud.xyz.row(idx).cast<double>();
    }
    out.push_back(std::move(vv));
  }
  return out;
}

void write_ppm(const std::string& path, const VirtualView& view) {
  const int res = view.resolution();
  Image img(res, res);
  for (int px = 0; px < res * res; ++px) {
    img.set(px / res, px % res, view.rgb.row(px).transpose());
  }
  img.write_ppm(path);
}

}  // namespace mvact::render
