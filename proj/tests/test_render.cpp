// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <random>

#include "mvact/render.hpp"
#include "oracles.hpp"

using namespace mvact;

namespace {

const sim::EnvContract kContract = sim::EnvContract::defaults();

void check_same(const std::vector<render::VirtualView>& a, const std::vector<render::VirtualView>& b) {
  REQUIRE(a.size() == b.size());
  for (std::size_t v = 0; v < a.size(); ++v) {
    CHECK(a[v].point_index == b[v].point_index);
    CHECK(a[v].occupancy == b[v].occupancy);
    CHECK(a[v].rgb == b[v].rgb);
    CHECK(a[v].xyz == b[v].xyz);
    CHECK(a[v].depth == b[v].depth);
  }
}

}  // namespace

TEST_CASE("cube views are orthonormal and named") {
  const auto views = render::cube_views(kContract.workspace_bounds, 32);
  REQUIRE(views.size() == 5);
  const std::vector<std::string> names{"top", "front", "back", "left", "right"};
  for (std::size_t i = 0; i < views.size(); ++i) {
    CHECK(views[i].name == names[i]);
    CHECK_NOTHROW(views[i].validate());
    CHECK(views[i].right.cross(views[i].up).dot(views[i].forward) == doctest::Approx(1.0));
  }
}

TEST_CASE("project_point basics") {
  const auto views = render::cube_views(kContract.workspace_bounds, 32);
  const auto c = render::project_point(views[0], kContract.workspace_bounds.center());
  CHECK(std::abs(c.row - 16.0) <= 0.5);
  CHECK(std::abs(c.col - 16.0) <= 0.5);
  CHECK(c.in_bounds);
  CHECK_FALSE(render::project_point(views[0], Vec3(3.0, 0.0, 0.2)).in_bounds);
}

TEST_CASE("project then unproject recovers the point") {
  const auto views = render::cube_views(kContract.workspace_bounds, 32);
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(-0.3, 0.3);
  double worst = 0.0;
  for (int i = 0; i < 1000; ++i) {
    const Vec3 p(u(rng), u(rng), u(rng) + 0.25);
    for (const auto& v : views) {
      const auto pr = render::project_point(v, p);
      worst = std::max(worst, (render::unproject(v, pr.row, pr.col, pr.depth) - p).norm());
    }
  }
  CHECK(worst < 1e-6);
}

TEST_CASE("z-buffer keeps the nearest point") {
  const auto views = render::cube_views(kContract.workspace_bounds, 32);
  sim::PointCloud cloud;
  cloud.xyz.resize(3, 3);
  cloud.rgb.resize(3, 3);
  // top view looks down -z, so larger z is nearer
  cloud.xyz << 0.0f, 0.0f, 0.05f, 0.0f, 0.0f, 0.35f, 0.0f, 0.0f, 0.35f;
  cloud.rgb << 1, 0, 0, 0, 1, 0, 0, 0, 1;
  const auto out = render::render_views(cloud, {views[0]});
  const auto pr = render::project_point(views[0], Vec3(0, 0, 0.35));
  const int px = static_cast<int>(pr.row) * 32 + static_cast<int>(pr.col);
  CHECK(out[0].point_index[px] == 1);  // tie with index 2 goes to the smaller index
  CHECK(out[0].rgb.row(px) == Eigen::RowVector3d(0, 1, 0));
  CHECK(out[0].depth(px) == doctest::Approx(0.3 - 0.1));
}

TEST_CASE("empty cloud renders unoccupied views") {
  const auto views = render::cube_views(kContract.workspace_bounds, 16);
  const auto out = render::render_views(sim::PointCloud{}, views);
  for (const auto& v : out) {
    CHECK(std::count(v.occupancy.begin(), v.occupancy.end(), 1) == 0);
    CHECK(std::isinf(v.depth(0)));
    CHECK(v.xyz.isZero());
  }
}

TEST_CASE("occupied pixels hold points that project into them") {
  const auto views = render::cube_views(kContract.workspace_bounds, 32);
  const auto s = sim::make_scene(kContract, 1, 4);
  const auto out = render::render_views(sim::sample_pointcloud(kContract, s, 300, 1), views);
  for (const auto& v : out) {
    for (int px = 0; px < 32 * 32; ++px) {
      if (!v.occupancy[px]) continue;
      const auto pr = render::project_point(v.view, v.xyz.row(px).transpose());
      CHECK(static_cast<int>(pr.row) * 32 + static_cast<int>(pr.col) == px);
    }
  }
}

TEST_CASE("render_views equals the reference on dense cube and scene clouds") {
  const auto views = render::cube_views(kContract.workspace_bounds, 32);
  sim::SceneState cube;
  sim::SceneObject o;
  o.half_extents = Vec3(0.1, 0.1, 0.1);
  o.pose.position = Vec3(0, 0, 0.1);
  cube.objects.push_back(o);
  const auto cloud = sim::sample_pointcloud(kContract, cube, 3000, 1);
  check_same(render::render_views(cloud, views), oracle::render(cloud, views));
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const auto s = sim::make_scene(kContract, static_cast<int>(seed % 3), seed);
    const auto c = sim::sample_pointcloud(kContract, s, 200, seed, {.table_points = 400});
    check_same(render::render_views(c, views), oracle::render(c, views));
  }
}

TEST_CASE("moving cloud and views together leaves images unchanged") {
  auto views = render::cube_views(kContract.workspace_bounds, 32);
  const auto s = sim::make_scene(kContract, 0, 9);
  auto cloud = sim::sample_pointcloud(kContract, s, 200, 2);
  // snap to a 2^-10 lattice so the shifted coordinates stay exact
  cloud.xyz = (cloud.xyz * 1024.0f).array().round().matrix() / 1024.0f;
  const auto before = render::render_views(cloud, views);
  const Vec3 shift(0.5, -0.25, 1.0);
  for (Eigen::Index i = 0; i < cloud.size(); ++i) cloud.xyz.row(i) += shift.cast<float>().transpose();
  for (auto& v : views) v.center += shift;
  const auto after = render::render_views(cloud, views);
  for (std::size_t v = 0; v < views.size(); ++v) {
    CHECK(before[v].point_index == after[v].point_index);
    CHECK(before[v].rgb == after[v].rgb);
  }
}
