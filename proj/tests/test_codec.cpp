// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <random>

#include "mvact/codec.hpp"
#include "mvact/error.hpp"
#include "oracles.hpp"

using namespace mvact;

namespace {

const sim::EnvContract kContract = sim::EnvContract::defaults();

std::vector<Eigen::VectorXd> probabilities(const std::vector<codec::PositionMap>& maps) {
  std::vector<Eigen::VectorXd> out;
  for (const auto& m : maps) out.push_back(m.probabilities);
  return out;
}

Vec3 random_point(std::mt19937_64& rng) {
  const Box3& b = kContract.workspace_bounds;
  std::uniform_real_distribution<double> u(0.0, 1.0);
  return b.min() + Vec3(u(rng), u(rng), u(rng)).cwiseProduct(b.max() - b.min());
}

}  // namespace

TEST_CASE("encode_position") {
  const auto views = render::cube_views(kContract.workspace_bounds, 32);
  std::mt19937_64 rng(1);
  for (int i = 0; i < 100; ++i) {
    for (const auto& m : codec::encode_position(random_point(rng), views, 1.5)) {
      CHECK(std::abs(m.probabilities.sum() - 1.0) < 1e-6);
      CHECK(m.probabilities.minCoeff() >= 0.0);
    }
  }
  SUBCASE("delta limit") {
    const Vec3 p(0.01, -0.02, 0.13);
    const auto maps = codec::encode_position(p, views, 1e-6);
    for (std::size_t v = 0; v < views.size(); ++v) {
      const auto pr = render::project_point(views[v], p);
      const int px = static_cast<int>(pr.row) * 32 + static_cast<int>(pr.col);
      CHECK(maps[v].probabilities(px) == 1.0);
      CHECK(maps[v].probabilities.sum() == 1.0);
    }
  }
  SUBCASE("workspace center peaks at the image center in the top view") {
    const auto maps = codec::encode_position(kContract.workspace_bounds.center(), views, 1.5);
    Eigen::Index arg = 0;
    maps[0].probabilities.maxCoeff(&arg);
    CHECK(std::abs(arg / 32 - 16) <= 1);
    CHECK(std::abs(arg % 32 - 16) <= 1);
  }
  SUBCASE("out of view gives a flagged uniform map") {
    const auto maps = codec::encode_position(Vec3(2.0, 0.0, 0.2), views, 1.5);
    CHECK(maps[0].out_of_bounds);
    CHECK(maps[0].probabilities.maxCoeff() == doctest::Approx(1.0 / 1024));
  }
  CHECK_THROWS_AS(codec::encode_position(Vec3::Zero(), views, 0.0), Error);
}

TEST_CASE("decode_position agrees with the exhaustive scorer") {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int g : {8, 16}) {
    const auto views = render::cube_views(kContract.workspace_bounds, 16);
    const codec::Grid3D grid{kContract.workspace_bounds, g};
    for (int trial = 0; trial < 20; ++trial) {
      std::vector<Eigen::VectorXd> maps;
      for (std::size_t v = 0; v < views.size(); ++v) {
        Eigen::VectorXd m(256);
        for (Eigen::Index i = 0; i < m.size(); ++i) m(i) = trial % 2 ? u(rng) : std::floor(4 * u(rng));
        maps.push_back(m);
      }
      for (auto f : {codec::ViewFusion::sum, codec::ViewFusion::product}) {
        REQUIRE(codec::best_cell(maps, views, grid, f) == oracle::best_cell(maps, views, grid.bounds, g, f));
      }
    }
  }
}

TEST_CASE("decode_position tie-break picks the lowest index") {
  const auto views = render::cube_views(kContract.workspace_bounds, 16);
  std::vector<Eigen::VectorXd> maps(views.size(), Eigen::VectorXd::Ones(256));
  const codec::Grid3D grid{kContract.workspace_bounds, 8};
  CHECK(codec::best_cell(maps, views, grid) == oracle::best_cell(maps, views, grid.bounds, 8, codec::ViewFusion::sum));
}

TEST_CASE("decode_position on consistent one-hot maps returns the cell") {
  const auto views = render::cube_views(kContract.workspace_bounds, 32);
  const codec::Grid3D grid{kContract.workspace_bounds, 32};
  std::mt19937_64 rng(2);
  std::uniform_int_distribution<Eigen::Index> cell(0, grid.cell_count() - 1);
  for (int i = 0; i < 50; ++i) {
    const Vec3 c = grid.cell_center(cell(rng));
    std::vector<Eigen::VectorXd> maps;
    for (const auto& v : views) {
      Eigen::VectorXd m = Eigen::VectorXd::Zero(1024);
      const auto pr = render::project_point(v, c);
      m(static_cast<int>(pr.row) * 32 + static_cast<int>(pr.col)) = 1.0;
      maps.push_back(m);
    }
    CHECK((codec::decode_position(maps, views, grid) - c).norm() < 1e-12);
  }
}

TEST_CASE("decode_position errors") {
  const auto views = render::cube_views(kContract.workspace_bounds, 16);
  const codec::Grid3D grid{kContract.workspace_bounds, 8};
  std::vector<Eigen::VectorXd> zeros(views.size(), Eigen::VectorXd::Zero(256));
  try {
    codec::decode_position(zeros, views, grid);
    FAIL("expected degenerate_input");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::degenerate_input);
  }
  zeros.pop_back();
  CHECK_THROWS_AS(codec::decode_position(zeros, views, grid), Error);
}

TEST_CASE("position round trip stays within the cell half-diagonal") {
  const auto views = render::cube_views(kContract.workspace_bounds, 32);
  const codec::Grid3D grid{kContract.workspace_bounds, 32};
  std::mt19937_64 rng(11);
  for (int i = 0; i < 200; ++i) {
    const Vec3 p = random_point(rng);
    const Vec3 q = codec::decode_position(probabilities(codec::encode_position(p, views, 1.5)), views, grid);
    REQUIRE((q - p).norm() <= grid.half_diagonal());
  }
}

TEST_CASE("rotation bins") {
  CHECK(codec::encode_rotation(Quat::Identity()) == std::array<int, 3>{0, 0, 0});
  const Vec3 e = euler_zyx_degrees(codec::decode_rotation({0, 0, 0}));
  CHECK(e.x() == doctest::Approx(2.5));
  CHECK(e.y() == doctest::Approx(2.5));
  CHECK(e.z() == doctest::Approx(2.5));
  CHECK(codec::encode_rotation(quaternion_from_euler_zyx_degrees(7.3, 0.0, 0.0))[0] == 1);
  CHECK_THROWS_AS(codec::encode_rotation(Quat(2, 0, 0, 0)), Error);
  CHECK_THROWS_AS(codec::decode_rotation({72, 0, 0}), Error);
}

TEST_CASE("rotation round trip per axis") {
  std::mt19937_64 rng(5);
  std::normal_distribution<double> n;
  for (int i = 0; i < 2000; ++i) {
    const Quat q = Quat(n(rng), n(rng), n(rng), n(rng)).normalized();
    const auto bins = codec::encode_rotation(q);
    for (int b : bins) REQUIRE((b >= 0 && b < 72));
    const Quat r = codec::decode_rotation(bins);
    CHECK(std::abs(r.norm() - 1.0) < 1e-9);
    const Vec3 a = euler_zyx_degrees(q);
    const Vec3 d = euler_zyx_degrees(r);
    for (int k = 0; k < 3; ++k) CHECK(angular_distance_degrees(a(k), d(k)) <= 2.5 + 1e-9);
  }
}

TEST_CASE("encode_targets masks missing channels") {
  demo::TrainingSample s;
  s.valid_mask = {1, 1, 0, 0, 0};
  sim::Action8f a;
  a.position = Eigen::Vector3f(0.05f, 0.0f, 0.1f);
  a.gripper_open = false;
  s.targets = {a, a};
  const auto views = render::cube_views(kContract.workspace_bounds, 16);
  const auto t = codec::encode_targets(s, views, 1.5);
  CHECK(t.valid_mask == s.valid_mask);
  for (const auto& m : t.maps) {
    CHECK(m.rows() == 5);
    CHECK(std::abs(m.row(0).sum() - 1.0) < 1e-6);
    CHECK(m.bottomRows(3).isZero());
  }
  CHECK(t.gripper[0] == 0);
}

TEST_CASE("decode_actions inverts encode_targets with oracle logits") {
  const auto views = render::cube_views(kContract.workspace_bounds, 32);
  const codec::Grid3D grid{kContract.workspace_bounds, 32};
  std::mt19937_64 rng(3);
  std::normal_distribution<double> n;
  demo::TrainingSample s;
  s.valid_mask = {1, 1, 1};
  for (int k = 0; k < 3; ++k) {
    sim::Action8f a;
    a.position = random_point(rng).cast<float>();
    a.rotation = Quat(n(rng), n(rng), n(rng), n(rng)).normalized().cast<float>();
    a.gripper_open = k != 1;
    a.collision_allowed = k == 2;
    s.targets.push_back(a);
  }
  const auto t = codec::encode_targets(s, views, 1.5);
  PolicyOutput out;
  for (const auto& m : t.maps) out.heatmap_logits.push_back((m.array() + 1e-300).log().matrix());
  out.rotation_logits = RowMatrix::Constant(3, 216, -20.0);
  out.gripper_logits = RowMatrix::Zero(3, 2);
  out.collision_logits = RowMatrix::Zero(3, 2);
  for (int k = 0; k < 3; ++k) {
    for (int ax = 0; ax < 3; ++ax) out.rotation_logits(k, ax * 72 + t.rotation_bins[k][ax]) = 20.0;
    out.gripper_logits(k, t.gripper[k] ? 0 : 1) = 10.0;
    out.gripper_logits(k, t.gripper[k] ? 1 : 0) = -10.0;
    out.collision_logits(k, t.collision[k] ? 0 : 1) = 10.0;
    out.collision_logits(k, t.collision[k] ? 1 : 0) = -10.0;
  }
  const auto actions = codec::decode_actions(out, views, grid);
  REQUIRE(actions.size() == 3);
  for (int k = 0; k < 3; ++k) {
    const auto& want = s.targets[k];
    CHECK((actions[k].position - want.position.cast<double>()).norm() <= grid.half_diagonal());
    const Vec3 a = euler_zyx_degrees(want.rotation.cast<double>());
    const Vec3 d = euler_zyx_degrees(actions[k].rotation);
    for (int ax = 0; ax < 3; ++ax) CHECK(angular_distance_degrees(a(ax), d(ax)) <= 2.5 + 1e-6);
    CHECK(actions[k].gripper_open == want.gripper_open);
    CHECK(actions[k].collision_allowed == want.collision_allowed);
  }
  out.gripper_logits.resize(3, 3);
  CHECK_THROWS_AS(codec::decode_actions(out, views, grid), Error);
}
