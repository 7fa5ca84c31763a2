// SPDX-License-Identifier: Apache-2.0
#include "mvact/codec.hpp"

#include <algorithm>
#include <cmath>

#include "mvact/error.hpp"

namespace mvact::codec {

Vec3 Grid3D::cell_center(Eigen::Index index) const {
  const Eigen::Index g = cells_per_axis;
  const Eigen::Index iz = index % g;
  const Eigen::Index iy = (index / g) % g;
  const Eigen::Index ix = index / (g * g);
  const Vec3 size = cell_size();
  return bounds.min() + Vec3((ix + 0.5) * size.x(), (iy + 0.5) * size.y(), (iz + 0.5) * size.z());
}

void Grid3D::validate() const {
  if (cells_per_axis < 2) throw Error(Errc::invalid_argument, "grid needs at least 2 cells per axis");
}

std::vector<PositionMap> encode_position(const Vec3& xyz, const std::vector<render::OrthoView>& views,
                                         double sigma_px) {
  if (!(sigma_px > 0.0)) throw Error(Errc::invalid_argument, "sigma_px must be positive");
  std::vector<PositionMap> out;
  out.reserve(views.size());
  for (const auto& view : views) {
    const int res = view.resolution;
    PositionMap m;
    m.probabilities = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(res) * res);
    const render::Projection p = render::project_point(view, xyz);
    if (!p.in_bounds) {
      m.probabilities.setConstant(1.0 / m.probabilities.size());
      m.out_of_bounds = true;
      out.push_back(std::move(m));
      continue;
    }
    const double cutoff = 3.0 * sigma_px;
    const int r0 = std::max(0, static_cast<int>(std::floor(p.row - cutoff - 1.0)));
    const int r1 = std::min(res - 1, static_cast<int>(std::ceil(p.row + cutoff + 1.0)));
    const int c0 = std::max(0, static_cast<int>(std::floor(p.col - cutoff - 1.0)));
    const int c1 = std::min(res - 1, static_cast<int>(std::ceil(p.col + cutoff + 1.0)));
    double total = 0.0;
    for (int r = r0; r <= r1; ++r) {
      for (int c = c0; c <= c1; ++c) {
        const double dr = r + 0.5 - p.row;
        const double dc = c + 0.5 - p.col;
        const double d2 = dr * dr + dc * dc;
        if (d2 > cutoff * cutoff) continue;
        const double w = std::exp(-d2 / (2.0 * sigma_px * sigma_px));
        m.probabilities(r * res + c) = w;
        total += w;
      }
    }
    if (total > 0.0) {
      m.probabilities /= total;
    } else {
      // Delta limit: everything collapses onto the containing pixel.
      m.probabilities.setZero();
      m.probabilities(static_cast<int>(std::floor(p.row)) * res + static_cast<int>(std::floor(p.col))) = 1.0;
    }
    out.push_back(std::move(m));
  }
  return out;
}

double bilinear_sample(const Eigen::Ref<const Eigen::VectorXd>& map, int resolution, double row, double col) {
  const double v = row - 0.5;
  const double u = col - 0.5;
  const double fv = std::floor(v);
  const double fu = std::floor(u);
  const int i0 = static_cast<int>(fv);
  const int j0 = static_cast<int>(fu);
  const double tv = v - fv;
  const double tu = u - fu;
  const auto at = [&](int i, int j) {
    if (i < 0 || j < 0 || i >= resolution || j >= resolution) return 0.0;
    return map(i * resolution + j);
  };
  return (1.0 - tv) * ((1.0 - tu) * at(i0, j0) + tu * at(i0, j0 + 1)) +
         tv * ((1.0 - tu) * at(i0 + 1, j0) + tu * at(i0 + 1, j0 + 1));
}

Eigen::Index best_cell(const std::vector<Eigen::VectorXd>& maps, const std::vector<render::OrthoView>& views,
                       const Grid3D& grid, ViewFusion fusion) {
  grid.validate();
  if (maps.size() != views.size()) {
    throw Error(Errc::shape_mismatch, "decode_position: " + std::to_string(maps.size()) + " maps for " +
                                          std::to_string(views.size()) + " views");
  }
  bool any_mass = false;
  for (std::size_t v = 0; v < maps.size(); ++v) {
    const int res = views[v].resolution;
    if (maps[v].size() != static_cast<Eigen::Index>(res) * res) {
      throw Error(Errc::shape_mismatch, "decode_position: map size does not match view resolution");
    }
    if ((maps[v].array() < 0.0).any()) throw Error(Errc::invalid_argument, "heatmaps must be nonnegative");
    any_mass = any_mass || (maps[v].array() > 0.0).any();
  }
  if (!any_mass) throw Error(Errc::degenerate_input, "all heatmaps are zero");

  Eigen::Index best = 0;
  double best_score = -1.0;
  const Eigen::Index cells = grid.cell_count();
  for (Eigen::Index i = 0; i < cells; ++i) {
    const Vec3 c = grid.cell_center(i);
    double score = fusion == ViewFusion::sum ? 0.0 : 1.0;
    for (std::size_t v = 0; v < views.size(); ++v) {
      const render::Projection p = render::project_point(views[v], c);
      const double s = p.in_bounds ? bilinear_sample(maps[v], views[v].resolution, p.row, p.col) : 0.0;
      if (fusion == ViewFusion::sum) {
        score += s;
      } else {
        score *= s;
      }
    }
    if (score > best_score) {
      best_score = score;
      best = i;
    }
  }
  return best;
}

Vec3 decode_position(const std::vector<Eigen::VectorXd>& maps, const std::vector<render::OrthoView>& views,
                     const Grid3D& grid, ViewFusion fusion) {
  return grid.cell_center(best_cell(maps, views, grid, fusion));
}

std::array<int, 3> encode_rotation(const Quat& q) {
  if (std::abs(q.norm() - 1.0) > 1e-6) throw Error(Errc::non_unit_quaternion, "rotation must be a unit quaternion");
  const Vec3 e = euler_zyx_degrees(q);
  std::array<int, 3> bins{};
  for (int a = 0; a < 3; ++a) {
    bins[static_cast<std::size_t>(a)] =
        std::min(kRotationBins - 1, static_cast<int>(std::floor(e(a) / kRotationBinDegrees)));
  }
  // Pitch lives in [0, 90] u [270, 360); exactly +90 would otherwise land in a
  // bin whose center is past the pole.
  if (bins[1] == 90 / static_cast<int>(kRotationBinDegrees)) bins[1] -= 1;
  return bins;
}

Quat decode_rotation(const std::array<int, 3>& bins) {
  for (int b : bins) {
    if (b < 0 || b >= kRotationBins) throw Error(Errc::invalid_argument, "rotation bin out of range");
  }
  const auto center = [](int b) { return (b + 0.5) * kRotationBinDegrees; };
  return quaternion_from_euler_zyx_degrees(center(bins[0]), center(bins[1]), center(bins[2]));
}

HeatmapTargets encode_targets(const demo::TrainingSample& sample, const std::vector<render::OrthoView>& views,
                              double sigma_px) {
  const int h = sample.horizon();
  if (h < 1 || sample.targets.size() > static_cast<std::size_t>(h)) {
    throw Error(Errc::shape_mismatch, "sample targets exceed its horizon");
  }
  HeatmapTargets t;
  t.valid_mask = sample.valid_mask;
  t.rotation_bins.assign(static_cast<std::size_t>(h), {0, 0, 0});
  t.gripper.assign(static_cast<std::size_t>(h), 0);
  t.collision.assign(static_cast<std::size_t>(h), 0);
  for (const auto& view : views) {
    t.maps.push_back(RowMatrix::Zero(h, static_cast<Eigen::Index>(view.resolution) * view.resolution));
  }
  for (int k = 0; k < h; ++k) {
    const auto ku = static_cast<std::size_t>(k);
    if (!sample.valid_mask[ku]) continue;
    if (ku >= sample.targets.size()) throw Error(Errc::shape_mismatch, "valid_mask is not a prefix mask");
    const sim::Action8 a = sample.targets[ku].cast<double>();
    const auto maps = encode_position(a.position, views, sigma_px);
    for (std::size_t v = 0; v < views.size(); ++v) t.maps[v].row(k) = maps[v].probabilities.transpose();
    t.rotation_bins[ku] = encode_rotation(a.rotation.normalized());
    t.gripper[ku] = a.gripper_open ? 1 : 0;
    t.collision[ku] = a.collision_allowed ? 1 : 0;
  }
  return t;
}

Eigen::VectorXd softmax(const Eigen::Ref<const Eigen::VectorXd>& logits) {
  const double m = logits.maxCoeff();
  Eigen::VectorXd e = (logits.array() - m).exp().matrix();
  return e / e.sum();
}

std::vector<sim::Action8> decode_actions(const PolicyOutput& output, const std::vector<render::OrthoView>& views,
                                         const Grid3D& grid, ViewFusion fusion) {
  const int h = output.horizon();
  if (output.views() != static_cast<int>(views.size()) || output.rotation_logits.cols() != 3 * kRotationBins ||
      output.gripper_logits.rows() != h || output.gripper_logits.cols() != 2 ||
      output.collision_logits.rows() != h || output.collision_logits.cols() != 2) {
    throw Error(Errc::shape_mismatch, "policy output shapes do not match the decoder");
  }
  for (std::size_t v = 0; v < views.size(); ++v) {
    const auto& m = output.heatmap_logits[v];
    if (m.rows() != h || m.cols() != static_cast<Eigen::Index>(views[v].resolution) * views[v].resolution) {
      throw Error(Errc::shape_mismatch, "heatmap logits for view " + views[v].name + " have the wrong shape");
    }
  }
  std::vector<sim::Action8> actions(static_cast<std::size_t>(h));
  for (int k = 0; k < h; ++k) {
    std::vector<Eigen::VectorXd> maps;
    maps.reserve(views.size());
    for (const auto& m : output.heatmap_logits) maps.push_back(softmax(m.row(k).transpose()));
    auto& a = actions[static_cast<std::size_t>(k)];
    a.position = decode_position(maps, views, grid, fusion);
    std::array<int, 3> bins{};
    for (int axis = 0; axis < 3; ++axis) {
      Eigen::Index arg = 0;
      output.rotation_logits.row(k).segment(axis * kRotationBins, kRotationBins).maxCoeff(&arg);
      bins[static_cast<std::size_t>(axis)] = static_cast<int>(arg);
    }
    a.rotation = decode_rotation(bins);
    a.gripper_open = output.gripper_logits(k, 0) >= output.gripper_logits(k, 1);
    a.collision_allowed = output.collision_logits(k, 0) >= output.collision_logits(k, 1);
  }
  return actions;
}

}  // namespace mvact::codec
