// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <random>

#include "mvact/error.hpp"
#include "mvact/nn/gradcheck.hpp"
#include "mvact/nn/ops.hpp"
#include "mvact/policy.hpp"
#include "oracles.hpp"

using namespace mvact;
using policy::PolicyConfig;
using policy::PolicyNet;

namespace {

const sim::EnvContract kContract = sim::EnvContract::defaults();

PolicyConfig small_config() {
  PolicyConfig c;
  c.resolution = 16;
  c.embed_dim = 16;
  c.heads = 2;
  c.horizon = 3;
  return c;
}

std::vector<policy::ViewInput> random_views(const PolicyConfig& c, std::mt19937_64& rng) {
  std::normal_distribution<double> n(0.0, 0.5);
  const nn::Index tokens = c.tokens_per_view();
  const nn::Index p2 = static_cast<nn::Index>(c.patch_size) * c.patch_size;
  std::vector<policy::ViewInput> out(static_cast<std::size_t>(c.view_count));
  for (auto& v : out) {
    v.rgb_patches = nn::Tensor({tokens, 3 * p2});
    v.geometry_patches = nn::Tensor({tokens, 4 * p2});
    for (nn::Index i = 0; i < v.rgb_patches.size(); ++i) v.rgb_patches[i] = n(rng);
    for (nn::Index i = 0; i < v.geometry_patches.size(); ++i) v.geometry_patches[i] = n(rng);
  }
  return out;
}

std::vector<policy::ViewInput> scene_views(const PolicyConfig& c, std::uint64_t seed) {
  const auto scene = sim::make_scene(kContract, 0, seed);
  const auto cloud = sim::sample_pointcloud(kContract, scene, 200, seed);
  std::vector<policy::ViewInput> out;
  for (const auto& v : render::render_views(cloud, render::cube_views(kContract.workspace_bounds, c.resolution))) {
    out.push_back(policy::view_input(v, c.patch_size));
  }
  return out;
}

bool same(const PolicyOutput& a, const PolicyOutput& b) {
  bool eq = a.rotation_logits == b.rotation_logits && a.gripper_logits == b.gripper_logits &&
            a.collision_logits == b.collision_logits && a.views() == b.views();
  for (int v = 0; eq && v < a.views(); ++v) eq = a.heatmap_logits[v] == b.heatmap_logits[v];
  return eq;
}

double max_diff(const nn::Tensor& a, const nn::Tensor& b) { return (a.flat() - b.flat()).cwiseAbs().maxCoeff(); }

const sim::Instruction kInstruction{0, {1}};

}  // namespace

TEST_CASE("config validation names the offending keys") {
  PolicyConfig c;
  CHECK_NOTHROW(c.validate());
  c.resolution = 30;
  try {
    c.validate();
    FAIL("expected config_constraint");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::config_constraint);
    const std::string what = e.what();
    CHECK(what.find("render.resolution") != std::string::npos);
    CHECK(what.find("model.patch_size") != std::string::npos);
  }
  c = PolicyConfig{};
  c.heads = 3;
  CHECK_THROWS_AS(c.validate(), Error);
  c = PolicyConfig{};
  c.lora_rank = 40;
  CHECK_THROWS_AS(c.validate(), Error);
}

TEST_CASE("lora_project") {
  std::mt19937_64 rng(1);
  std::normal_distribution<double> n;
  const auto rnd = [&](nn::Shape s) {
    nn::Tensor t(std::move(s));
    for (nn::Index i = 0; i < t.size(); ++i) t[i] = n(rng);
    return t;
  };
  const nn::Tensor x = rnd({4, 8}), w0 = rnd({8, 8}), a = rnd({8, 2}), b0({2, 8});
  SUBCASE("zero B is the base projection") {
    nn::Graph g;
    const auto y = policy::lora_project(g.constant(x), g.constant(w0), g.constant(a), g.constant(b0));
    const auto base = nn::matmul(g.constant(x), g.constant(w0));
    CHECK(y.value() == base.value());
  }
  SUBCASE("adapter parameter count is r(d+k)") { CHECK(a.size() + b0.size() == 32); }
  SUBCASE("gradients reach A and B but not W0") {
    const nn::Tensor b = rnd({2, 8});
    const nn::Tensor r = rnd({4, 8});
    nn::Graph g;
    const auto w0v = g.leaf(w0, false);
    const auto av = g.leaf(a);
    const auto bv = g.leaf(b);
    g.backward(nn::sum(nn::mul(policy::lora_project(g.constant(x), w0v, av, bv), g.constant(r))));
    CHECK(g.grad(w0v).flat().isZero(0.0));
    const auto fa = [&](nn::Graph& gg, nn::Var v) {
      return nn::sum(nn::mul(policy::lora_project(gg.constant(x), gg.constant(w0), v, gg.constant(b)), gg.constant(r)));
    };
    const auto fb = [&](nn::Graph& gg, nn::Var v) {
      return nn::sum(nn::mul(policy::lora_project(gg.constant(x), gg.constant(w0), gg.constant(a), v), gg.constant(r)));
    };
    CHECK(nn::finite_difference_check(fa, a, 1e-5) < 1e-4);
    CHECK(nn::finite_difference_check(fb, b, 1e-5) < 1e-4);
  }
  nn::Graph g;
  CHECK_THROWS_AS(policy::lora_project(g.constant(rnd({4, 7})), g.constant(w0), g.constant(a), g.constant(b0)), Error);
}

TEST_CASE("adapters start at zero and the encoder is frozen") {
  const PolicyNet net(PolicyConfig{}, 3);
  REQUIRE(net.adapters().size() == 4);
  for (const auto& ad : net.adapters()) {
    CHECK(net.params()[ad.b].value.flat().isZero(0.0));
    CHECK_FALSE(net.params()[ad.w0].trainable);
    CHECK(net.params()[ad.a].trainable);
    const auto& a = net.params()[ad.a].value.flat();
    const double sd = std::sqrt(a.squaredNorm() / static_cast<double>(a.size()));
    CHECK(sd == doctest::Approx(0.02).epsilon(0.3));
  }
  for (std::size_t i : net.frozen_parameters()) CHECK(net.params()[i].name.rfind("encoder.", 0) == 0);
  for (const auto& p : net.params()) {
    if (p.name.rfind("encoder.", 0) != 0) CHECK(p.trainable);
  }
}

TEST_CASE("output shapes follow the config") {
  std::mt19937_64 rng(2);
  for (int trial = 0; trial < 6; ++trial) {
    PolicyConfig c;
    c.resolution = trial % 2 ? 16 : 24;
    c.patch_size = trial % 3 == 0 ? 4 : 8;
    c.embed_dim = 16;
    c.heads = trial % 2 ? 2 : 4;
    c.horizon = 1 + trial;
    c.encoder_layers = trial % 3;
    c.viewwise_layers = trial % 2;
    c.crossview_layers = (trial + 1) % 2;
    c.lora_rank = 2;
    REQUIRE_NOTHROW(c.validate());
    const PolicyNet net(c, static_cast<std::uint64_t>(trial));
    const auto out = net.predict(random_views(c, rng), kInstruction);
    REQUIRE(out.views() == 5);
    for (const auto& m : out.heatmap_logits) {
      CHECK(m.rows() == c.horizon);
      CHECK(m.cols() == c.resolution * c.resolution);
    }
    CHECK(out.rotation_logits.rows() == c.horizon);
    CHECK(out.rotation_logits.cols() == 216);
    CHECK(out.gripper_logits.cols() == 2);
    CHECK(out.collision_logits.cols() == 2);
  }
}

TEST_CASE("fresh adapters leave the network unchanged") {
  const PolicyNet net(PolicyConfig{}, 4);
  std::mt19937_64 rng(4);
  policy::ForwardOptions off;
  off.use_lora = false;
  for (int i = 0; i < 3; ++i) {
    const auto views = random_views(net.config(), rng);
    CHECK(same(net.predict(views, kInstruction), net.predict(views, kInstruction, off)));
  }
}

TEST_CASE("encode_view") {
  const PolicyConfig c = small_config();
  const PolicyNet net(c, 5);
  std::mt19937_64 rng(5);
  const auto views = random_views(c, rng);
  nn::Graph g;
  nn::ParamBinder bind(g, net.params(), false);
  const nn::Tensor a = net.encode_view(bind, views[0], 0, {}, nullptr).value();
  CHECK(a.shape() == nn::Shape{4, 16});
  const nn::Tensor again = net.encode_view(bind, views[0], 0, {}, nullptr).value();
  CHECK(again == a);
  auto flat = views[0];
  flat.geometry_patches.flat().setZero();
  const nn::Tensor no_geometry = net.encode_view(bind, flat, 0, {}, nullptr).value();
  CHECK(max_diff(no_geometry, a) > 0.0);
  auto bad = views[0];
  bad.rgb_patches = nn::Tensor({3, 192});
  CHECK_THROWS_AS(net.encode_view(bind, bad, 0, {}, nullptr), Error);
}

TEST_CASE("fuse_multiview") {
  std::mt19937_64 rng(6);
  SUBCASE("no crossview layers keeps identical views identical") {
    PolicyConfig c = small_config();
    c.crossview_layers = 0;
    const PolicyNet net(c, 6);
    auto views = random_views(c, rng);
    for (auto& v : views) v = views[0];
    nn::Graph g;
    nn::ParamBinder bind(g, net.params(), false);
    std::vector<nn::Var> tokens;
    for (int v = 0; v < 5; ++v) tokens.push_back(net.encode_view(bind, views[v], v, {}, nullptr));
    const auto fused = net.fuse_multiview(bind, tokens, net.instruction_tokens(bind, kInstruction), {}, nullptr);
    for (int v = 1; v < 5; ++v) CHECK(fused[v].value() == fused[0].value());
  }
  SUBCASE("permuting views with their embeddings permutes outputs") {
    const PolicyNet net(small_config(), 7);
    const auto views = random_views(net.config(), rng);
    const std::vector<int> perm{2, 0, 4, 1, 3};
    nn::Graph g;
    nn::ParamBinder bind(g, net.params(), false);
    std::vector<nn::Var> tokens, permuted;
    for (int v = 0; v < 5; ++v) tokens.push_back(net.encode_view(bind, views[v], v, {}, nullptr));
    for (int v = 0; v < 5; ++v) permuted.push_back(tokens[perm[v]]);
    const auto lang = net.instruction_tokens(bind, kInstruction);
    const auto a = net.fuse_multiview(bind, tokens, lang, {}, nullptr);
    policy::ForwardOptions o;
    o.view_order = perm;
    const auto b = net.fuse_multiview(bind, permuted, lang, o, nullptr);
    for (int v = 0; v < 5; ++v) CHECK(max_diff(b[v].value(), a[perm[v]].value()) < 1e-12);
  }
  SUBCASE("instruction changes fused tokens") {
    const PolicyNet net(small_config(), 8);
    const auto views = random_views(net.config(), rng);
    const auto a = net.predict(views, kInstruction);
    const auto b = net.predict(views, sim::Instruction{0, {3}});
    CHECK((a.heatmap_logits[0] - b.heatmap_logits[0]).cwiseAbs().maxCoeff() > 0.0);
  }
  SUBCASE("wrong view count") {
    const PolicyNet net(small_config(), 9);
    nn::Graph g;
    nn::ParamBinder bind(g, net.params(), false);
    CHECK_THROWS_AS(net.fuse_multiview(bind, {}, net.instruction_tokens(bind, kInstruction), {}, nullptr), Error);
  }
}

TEST_CASE("predict matches forward and attention is recorded") {
  const PolicyConfig c = small_config();
  const PolicyNet net(c, 10);
  const auto views = scene_views(c, 3);
  nn::Graph g;
  nn::ParamBinder bind(g, net.params(), true);
  policy::ForwardOptions o;
  o.record_attention = true;
  const auto r = net.forward(bind, views, kInstruction, o);
  const auto p = net.predict(views, kInstruction, o);
  CHECK(same(policy::to_output(r), p));
  // 2 encoder + 1 viewwise blocks per view, 2 heads each, plus 1 crossview block
  CHECK(p.attention_maps.size() == 5 * 3 * 2 + 2);
  CHECK(p.attention_maps.back().label == "crossview.0.head1");
  for (const auto& m : p.attention_maps) {
    for (Eigen::Index i = 0; i < m.weights.rows(); ++i) CHECK(std::abs(m.weights.row(i).sum() - 1.0) < 1e-9);
  }
}

TEST_CASE("sequence_loss at the target distribution approaches its entropy") {
  const auto views = render::cube_views(kContract.workspace_bounds, 16);
  demo::TrainingSample s;
  s.valid_mask = {1, 1, 0};
  sim::Action8f a;
  a.position = Eigen::Vector3f(0.02f, 0.05f, 0.1f);
  s.targets = {a, a};
  s.targets[1].gripper_open = false;
  const auto t = codec::encode_targets(s, views, 1.5);
  PolicyOutput out;
  for (const auto& m : t.maps) out.heatmap_logits.push_back((m.array() + 1e-300).log().matrix());
  out.rotation_logits = RowMatrix::Constant(3, 216, -20.0);
  out.gripper_logits = RowMatrix::Zero(3, 2);
  out.collision_logits = RowMatrix::Zero(3, 2);
  for (int k = 0; k < 3; ++k) {
    for (int ax = 0; ax < 3; ++ax) out.rotation_logits(k, ax * 72 + t.rotation_bins[k][ax]) = 20.0;
    out.gripper_logits(k, t.gripper[k] ? 0 : 1) = 20.0;
    out.collision_logits(k, t.collision[k] ? 0 : 1) = 20.0;
  }
  double minimum = 0.0;
  for (const auto& m : t.maps) minimum += 0.5 * (oracle::entropy(m.row(0).transpose()) + oracle::entropy(m.row(1).transpose()));
  CHECK(std::abs(policy::sequence_loss(out, t) - minimum) < 1e-3);
}

TEST_CASE("masked channels contribute exactly nothing") {
  std::mt19937_64 rng(11);
  std::normal_distribution<double> n;
  const auto views = render::cube_views(kContract.workspace_bounds, 16);
  demo::TrainingSample s;
  s.valid_mask = {1, 0, 0, 0};
  sim::Action8f a;
  a.position = Eigen::Vector3f(0.0f, 0.1f, 0.2f);
  s.targets = {a};
  const auto t = codec::encode_targets(s, views, 1.5);

  const auto rnd = [&](nn::Index r, nn::Index c) {
    nn::Tensor x({r, c});
    for (nn::Index i = 0; i < x.size(); ++i) x[i] = n(rng);
    return x;
  };
  nn::Graph g;
  policy::ForwardResult r;
  for (int v = 0; v < 5; ++v) r.heatmap_logits.push_back(g.leaf(rnd(4, 256)));
  r.rotation_logits = g.leaf(rnd(4, 216));
  r.gripper_logits = g.leaf(rnd(4, 2));
  r.collision_logits = g.leaf(rnd(4, 2));
  const auto loss = policy::sequence_loss(r, t);
  g.backward(loss);
  for (const auto& v : r.heatmap_logits) CHECK(g.grad(v).matrix().bottomRows(3).isZero(0.0));
  CHECK(g.grad(r.rotation_logits).matrix().bottomRows(3).isZero(0.0));
  CHECK(g.grad(r.gripper_logits).matrix().bottomRows(3).isZero(0.0));
  CHECK(g.grad(r.collision_logits).matrix().bottomRows(3).isZero(0.0));
  CHECK_FALSE(g.grad(r.rotation_logits).matrix().topRows(1).isZero(0.0));

  // the single valid channel alone gives the same loss
  codec::HeatmapTargets one = t;
  one.valid_mask = {1};
  for (auto& m : one.maps) m = m.topRows(1).eval();
  one.rotation_bins.resize(1);
  one.gripper.resize(1);
  one.collision.resize(1);
  PolicyOutput head = policy::to_output(r);
  for (auto& m : head.heatmap_logits) m = m.topRows(1).eval();
  head.rotation_logits = head.rotation_logits.topRows(1).eval();
  head.gripper_logits = head.gripper_logits.topRows(1).eval();
  head.collision_logits = head.collision_logits.topRows(1).eval();
  CHECK(policy::sequence_loss(head, one) == loss.value().item());

  codec::HeatmapTargets holes = t;
  holes.valid_mask = {0, 1, 0, 0};
  CHECK_THROWS_AS(policy::sequence_loss(r, holes), Error);
}
