// SPDX-License-Identifier: Apache-2.0
// Acceptance runner: one PASS/FAIL line per criterion.
//   acceptance [criterion numbers...] [--out DIR]
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "mvact/cli.hpp"
#include "mvact/codec.hpp"
#include "mvact/evaluate.hpp"
#include "mvact/nn/gradcheck.hpp"
#include "mvact/policy.hpp"
#include "mvact/train.hpp"
#include "oracles.hpp"

using namespace mvact;
namespace fs = std::filesystem;

namespace {

const sim::EnvContract kContract = sim::EnvContract::defaults();
fs::path g_out;

struct Outcome {
  bool pass = false;
  std::string detail;
};

class Stopwatch {
 public:
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  }

 private:
  std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

fs::path fresh_dir(const std::string& name) {
  const fs::path p = g_out / name;
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

// The desk-scale toy: 2 encoder layers, width 64, 5 views at 32 px.
policy::PolicyConfig toy_config(int horizon) {
  policy::PolicyConfig c;
  c.resolution = 32;
  c.embed_dim = 64;
  c.encoder_layers = 2;
  c.horizon = horizon;
  return c;
}

std::vector<demo::TrainingSample> make_data(std::vector<int> tasks, int episodes, int horizon, std::uint64_t seed) {
  demo::GenerationParams gp;
  gp.task_ids = std::move(tasks);
  gp.episodes_per_task = episodes;
  gp.horizon = horizon;
  gp.seed = seed;
  return demo::generate_samples(kContract, gp);
}

train::TrainOptions train_options(long steps, std::uint64_t seed) {
  train::TrainOptions t;
  t.steps = steps;
  t.batch_size = 10;
  t.hyper.lr_base = 4e-3;
  t.warmup_steps = std::lround(2000.0 * static_cast<double>(steps) / 60000.0);
  t.seed = seed;
  t.log_every = 100;
  return t;
}

eval::EvalReport evaluate_net(const policy::PolicyNet& net, int task, int episodes, std::uint64_t seed, int grid) {
  eval::EvalOptions o;
  o.task_ids = {task};
  o.episodes_per_task = episodes;
  o.seed = seed;
  eval::ModelPolicyOptions mo;
  mo.grid_size = grid;
  return eval::evaluate(kContract, [&] { return std::make_unique<eval::ModelPolicy>(net, kContract, mo); }, o);
}

std::vector<policy::ViewInput> random_views(const policy::PolicyConfig& c, std::mt19937_64& rng) {
  std::normal_distribution<double> n(0.0, 0.5);
  const nn::Index p2 = static_cast<nn::Index>(c.patch_size) * c.patch_size;
  std::vector<policy::ViewInput> out(static_cast<std::size_t>(c.view_count));
  for (auto& v : out) {
    v.rgb_patches = nn::Tensor({c.tokens_per_view(), 3 * p2});
    v.geometry_patches = nn::Tensor({c.tokens_per_view(), 4 * p2});
    for (nn::Index i = 0; i < v.rgb_patches.size(); ++i) v.rgb_patches[i] = n(rng);
    for (nn::Index i = 0; i < v.geometry_patches.size(); ++i) v.geometry_patches[i] = n(rng);
  }
  return out;
}

// ---------------------------------------------------------------------------

Outcome gradient_suite() {
  Stopwatch sw;
  double prim = 0.0;
  std::string worst;
  for (const auto& r : nn::primitive_gradient_suite(1)) {
    if (r.max_relative_error >= prim) {
      prim = r.max_relative_error;
      worst = r.name;
    }
  }
  const auto e2e = policy::end_to_end_gradient_check(policy::gradcheck_config(), 1, 1e-4);
  const double t = sw.seconds();
  return {prim < 1e-4 && e2e.max_relative_error < 1e-3 && t < 60.0,
          fmt("primitives %.2e (%s), end-to-end %.2e over %ld values, %.1fs", prim, worst.c_str(),
              e2e.max_relative_error, static_cast<long>(e2e.checked_values), t)};
}

bool same_output(const PolicyOutput& a, const PolicyOutput& b) {
  if (a.views() != b.views()) return false;
  for (int v = 0; v < a.views(); ++v) {
    if (a.heatmap_logits[v] != b.heatmap_logits[v]) return false;
  }
  return a.rotation_logits == b.rotation_logits && a.gripper_logits == b.gripper_logits &&
         a.collision_logits == b.collision_logits;
}

Outcome lora_identity() {
  const policy::PolicyConfig c = toy_config(5);
  const policy::PolicyNet net(c, 11);
  std::mt19937_64 rng(12);
  policy::ForwardOptions off;
  off.use_lora = false;
  int equal = 0;
  for (int i = 0; i < 10; ++i) {
    const auto views = random_views(c, rng);
    const sim::Instruction ins{i % 3, {i % 4}};
    if (same_output(net.predict(views, ins), net.predict(views, ins, off))) ++equal;
  }
  return {equal == 10, fmt("%d/10 inputs bit-identical", equal)};
}

Outcome frozen_base() {
  policy::PolicyConfig c = policy::gradcheck_config();
  policy::PolicyNet net(c, 21);
  const policy::PolicyNet init = net;
  const auto data = make_data({0}, 10, c.horizon, 21);
  train::TrainOptions t = train_options(500, 21);
  train::train(net, data, render::cube_views(kContract.workspace_bounds, c.resolution), t);

  std::set<std::size_t> adapter_ab;
  for (const auto& ad : net.adapters()) adapter_ab.insert({ad.a, ad.b});
  int frozen_same = 0, frozen_total = 0, encoder_other_changed = 0, adapters_changed = 0, head_changed = 0,
      head_total = 0;
  for (std::size_t i = 0; i < net.params().size(); ++i) {
    const auto& p = net.params()[i];
    const bool changed = nn::hash_tensor(p.value) != nn::hash_tensor(init.params()[i].value);
    const bool encoder = p.name.rfind("encoder.", 0) == 0;
    if (!p.trainable) {
      ++frozen_total;
      frozen_same += changed ? 0 : 1;
    } else if (adapter_ab.count(i)) {
      adapters_changed += changed ? 1 : 0;
    } else if (encoder) {
      encoder_other_changed += changed ? 1 : 0;
    } else {
      ++head_total;
      head_changed += changed ? 1 : 0;
    }
  }
  const int adapters = static_cast<int>(adapter_ab.size());
  return {frozen_same == frozen_total && frozen_total > 0 && encoder_other_changed == 0 && adapters_changed > 0,
          fmt("frozen unchanged %d/%d, adapter A/B changed %d/%d, other params changed %d/%d, other encoder changed %d",
              frozen_same, frozen_total, adapters_changed, adapters, head_changed, head_total,
              encoder_other_changed)};
}

Outcome backprojection_oracle() {
  Stopwatch sw;
  std::mt19937_64 rng(31);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const auto views = render::cube_views(kContract.workspace_bounds, 32);
  int agree = 0, total = 0;
  for (int g : {8, 16}) {
    const codec::Grid3D grid{kContract.workspace_bounds, g};
    for (int trial = 0; trial < 200; ++trial) {
      std::vector<Eigen::VectorXd> maps;
      for (std::size_t v = 0; v < views.size(); ++v) {
        Eigen::VectorXd m(1024);
        // quantized maps produce exact score ties
        for (Eigen::Index i = 0; i < m.size(); ++i) m(i) = trial % 2 ? u(rng) : std::floor(3 * u(rng));
        maps.push_back(m / m.sum());
      }
      const auto f = trial % 4 < 2 ? codec::ViewFusion::sum : codec::ViewFusion::product;
      ++total;
      if (codec::best_cell(maps, views, grid, f) == oracle::best_cell(maps, views, grid.bounds, g, f)) ++agree;
    }
  }
  const double t = sw.seconds();
  return {agree == total && t < 30.0, fmt("%d/%d heatmap sets agree, %.1fs", agree, total, t)};
}

Outcome position_roundtrip() {
  const auto views = render::cube_views(kContract.workspace_bounds, 32);
  const codec::Grid3D grid{kContract.workspace_bounds, 32};
  std::mt19937_64 rng(41);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const Box3& b = kContract.workspace_bounds;
  int ok = 0;
  double worst = 0.0;
  for (int i = 0; i < 1000; ++i) {
    const Vec3 p = b.min() + Vec3(u(rng), u(rng), u(rng)).cwiseProduct(b.max() - b.min());
    std::vector<Eigen::VectorXd> maps;
    for (const auto& m : codec::encode_position(p, views, 1.5)) maps.push_back(m.probabilities);
    const double err = (codec::decode_position(maps, views, grid) - p).norm();
    worst = std::max(worst, err);
    if (err <= grid.half_diagonal()) ++ok;
  }
  return {ok == 1000, fmt("%d/1000 within %.4f m, worst %.4f m", ok, grid.half_diagonal(), worst)};
}

Outcome rotation_roundtrip() {
  std::mt19937_64 rng(51);
  std::normal_distribution<double> n;
  int ok = 0;
  double worst = 0.0;
  for (int i = 0; i < 10000; ++i) {
    const Quat q = Quat(n(rng), n(rng), n(rng), n(rng)).normalized();
    const Vec3 a = euler_zyx_degrees(q);
    const Vec3 d = euler_zyx_degrees(codec::decode_rotation(codec::encode_rotation(q)));
    double e = 0.0;
    for (int k = 0; k < 3; ++k) e = std::max(e, angular_distance_degrees(a(k), d(k)));
    worst = std::max(worst, e);
    if (e <= 2.5 + 1e-9) ++ok;
  }
  return {ok == 10000, fmt("%d/10000 within 2.5 deg, worst %.6f deg", ok, worst)};
}

Outcome keyframe_oracle() {
  std::mt19937_64 rng(61);
  int ok = 0;
  const demo::KeyframeParams params;
  for (int i = 0; i < 1000; ++i) {
    const sim::Trajectory t = oracle::synthetic_trajectory(rng);
    if (demo::extract_keyframes(t, params) == oracle::keyframes(t, params)) ++ok;
  }
  return {ok == 1000, fmt("%d/1000 trajectories identical", ok)};
}

bool same_views(const std::vector<render::VirtualView>& a, const std::vector<render::VirtualView>& b) {
  if (a.size() != b.size()) return false;
  for (std::size_t v = 0; v < a.size(); ++v) {
    if (a[v].point_index != b[v].point_index || a[v].occupancy != b[v].occupancy || a[v].rgb != b[v].rgb ||
        a[v].xyz != b[v].xyz || a[v].depth != b[v].depth) {
      return false;
    }
  }
  return true;
}

Outcome renderer_oracle() {
  const auto views = render::cube_views(kContract.workspace_bounds, 32);
  int ok = 0;
  long points = 0;
  for (int i = 0; i < 50; ++i) {
    std::uint64_t seed = 7000 + static_cast<std::uint64_t>(i);
    const auto scene = demo::feasible_scene(kContract, i % 3, seed);
    const auto cloud = sim::sample_pointcloud(kContract, scene, 400, seed);
    points += cloud.size();
    if (same_views(render::render_views(cloud, views), oracle::render(cloud, views))) ++ok;
  }
  return {ok == 50, fmt("%d/50 scenes identical (%ld points total)", ok, points)};
}

Outcome desk_learning() {
  // 200 demonstrations; the time gate counts training plus evaluation.
  constexpr int kEpisodes = 200;
  Stopwatch sw;
  const policy::PolicyConfig c = toy_config(5);
  const auto data = make_data({0}, kEpisodes, 5, 1);
  policy::PolicyNet net(c, 1);
  train::TrainOptions t = train_options(2000, 1);
  const fs::path dir = fresh_dir("desk_learning");
  t.out_dir = dir.string();
  const auto r = train::train(net, data, render::cube_views(kContract.workspace_bounds, 32), t);
  const double train_s = sw.seconds();
  const auto report = evaluate_net(net, 0, 50, 1000, 64);
  const double total_s = sw.seconds();
  {
    std::ofstream os(dir / "report.txt");
    eval::write_report(os, report);
    std::ofstream ev(dir / "events.csv");
    eval::write_event_log(ev, report);
  }
  // recount successes from the event log
  std::ostringstream log;
  eval::write_event_log(log, report);
  std::istringstream in(log.str());
  std::string line;
  std::getline(in, line);
  std::set<std::string> succeeded;
  while (std::getline(in, line)) {
    if (line.back() == '1') succeeded.insert(line.substr(0, line.find(',', line.find(',') + 1)));
  }
  const int recount = static_cast<int>(succeeded.size());
  const double rate = report.tasks.at(0).success_rate();
  const double first = r.metrics.front().loss, last = r.metrics.back().loss;
  return {rate >= 0.8 && total_s <= 1200.0 && recount == report.tasks[0].successes,
          fmt("success %.2f (%d/50, log recount %d), loss %.2f -> %.2f, %zu samples, train %.0fs, total %.0fs",
              rate, report.tasks[0].successes, recount, first, last, data.size(), train_s, total_s)};
}

Outcome chunking_efficiency() {
  constexpr long kSteps = 500;
  const int task = 2;
  long calls[2] = {0, 0};
  double rates[2] = {0, 0};
  long steps[2] = {0, 0};
  int i = 0;
  for (int h : {1, 5}) {
    const auto data = make_data({task}, 50, h, 3);
    policy::PolicyNet net(toy_config(h), 3);
    train::train(net, data, render::cube_views(kContract.workspace_bounds, 32), train_options(kSteps, 3));
    const auto rep = evaluate_net(net, task, 25, 3000, 64);
    calls[i] = rep.total_inference_calls;
    steps[i] = rep.total_env_steps;
    rates[i] = rep.tasks[0].success_rate();
    ++i;
  }
  const double ratio = calls[1] > 0 ? static_cast<double>(calls[0]) / static_cast<double>(calls[1]) : 0.0;
  return {calls[1] > 0 && 3 * calls[1] <= calls[0],
          fmt("calls h=1 %ld, h=5 %ld (ratio %.2f); env steps %ld vs %ld; success %.2f vs %.2f", calls[0], calls[1],
              ratio, steps[0], steps[1], rates[0], rates[1])};
}

Outcome smoothness() {
  int demos = 0, ok = 0;
  double worst_pos = 0.0, worst_ang = 0.0;
  for (int task = 0; task < 3; ++task) {
    for (std::uint64_t s = 0; s < 100; ++s) {
      std::uint64_t seed = s;
      const auto scene = demo::feasible_scene(kContract, task, seed);
      const auto stats = sim::smoothness_stats(sim::expert_demo(kContract, scene));
      ++demos;
      worst_pos = std::max(worst_pos, stats.max_position_shift);
      worst_ang = std::max(worst_ang, stats.max_angle_shift);
      if (stats.max_position_shift <= kContract.v_max && stats.max_angle_shift <= kContract.omega_max) ++ok;
    }
  }
  const fs::path dir = fresh_dir("inspect");
  std::ostringstream out, err;
  const int code = cli::run_command({"inspect", "--task", "reach-block,pick-place,press-buttons", "--out", dir.string()},
                                    out, err);
  std::ifstream csv(dir / "smoothness.csv");
  std::string header;
  std::getline(csv, header);
  int rows = 0;
  for (std::string l; std::getline(csv, l);) ++rows;
  const bool csv_ok = code == 0 && header == "task,episode,step,position_shift,angle_shift,keyframe" && rows > 0;
  return {ok == demos && csv_ok, fmt("%d/%d demos within limits (max %.4f m, %.4f rad), inspect exit %d, csv rows %d",
                                     ok, demos, worst_pos, worst_ang, code, rows)};
}

Outcome masking() {
  std::mt19937_64 rng(81);
  std::normal_distribution<double> n;
  const policy::PolicyConfig c = policy::gradcheck_config();
  const policy::PolicyNet net(c, 81);
  const auto views = render::cube_views(kContract.workspace_bounds, c.resolution);
  int checked = 0, zero = 0, live_nonzero = 0;
  for (int valid = 1; valid < c.horizon; ++valid) {
    demo::TrainingSample s;
    s.valid_mask.assign(static_cast<std::size_t>(c.horizon), 0);
    for (int k = 0; k < valid; ++k) {
      s.valid_mask[static_cast<std::size_t>(k)] = 1;
      sim::Action8f a;
      a.position = Eigen::Vector3f(0.1f * static_cast<float>(n(rng)), 0.1f * static_cast<float>(n(rng)), 0.2f);
      a.gripper_open = k % 2 == 0;
      s.targets.push_back(a);
    }
    const auto targets = codec::encode_targets(s, views, 1.5);
    nn::Graph g;
    nn::ParamBinder bind(g, net.params(), true);
    const auto r = net.forward(bind, random_views(c, rng), sim::Instruction{valid % 3, {valid}});
    g.backward(policy::sequence_loss(r, targets));
    std::vector<nn::Var> heads = r.heatmap_logits;
    heads.insert(heads.end(), {r.rotation_logits, r.gripper_logits, r.collision_logits});
    for (const auto& v : heads) {
      const auto grad = g.grad(v).matrix();
      const auto masked = grad.bottomRows(c.horizon - valid);
      ++checked;
      zero += masked.isZero(0.0) ? 1 : 0;
      live_nonzero += grad.topRows(valid).isZero(0.0) ? 0 : 1;
    }
  }
  return {zero == checked && live_nonzero == checked,
          fmt("%d/%d masked logit blocks have exactly zero gradient; %d/%d valid blocks nonzero", zero, checked,
              live_nonzero, checked)};
}

std::string manifest_without_stamp(const fs::path& p) {
  std::istringstream in(read_file(p));
  std::string out;
  for (std::string line; std::getline(in, line);) {
    if (line.rfind("created", 0) != 0) out += line + "\n";
  }
  return out;
}

bool same_tree(const fs::path& a, const fs::path& b, int& files) {
  std::vector<fs::path> rel;
  for (const auto& e : fs::recursive_directory_iterator(a)) {
    if (e.is_regular_file()) rel.push_back(fs::relative(e.path(), a));
  }
  int other = 0;
  for (const auto& e : fs::recursive_directory_iterator(b)) other += e.is_regular_file() ? 1 : 0;
  if (other != static_cast<int>(rel.size())) return false;
  files = static_cast<int>(rel.size());
  for (const auto& r : rel) {
    const bool same = r.filename() == "manifest.txt" ? manifest_without_stamp(a / r) == manifest_without_stamp(b / r)
                                                     : read_file(a / r) == read_file(b / r);
    if (!same) return false;
  }
  return true;
}

Outcome determinism() {
  const fs::path dir = fresh_dir("determinism");
  {
    std::ofstream cfg(dir / "c.cfg");
    cfg << "render.resolution = 16\nmodel.embed_dim = 16\nmodel.heads = 2\ndata.episodes_per_task = 4\n"
           "data.points_per_object = 100\ndata.table_points = 500\noptim.steps = 30\noptim.log_every = 5\n";
  }
  const std::string cfg = (dir / "c.cfg").string();
  std::ostringstream out, err;
  int codes = 0;
  for (const char* run : {"a", "b"}) {
    const std::string data = (dir / run / "data").string();
    codes += cli::run_command({"--config", cfg, "--seed", "7", "gen-data", "--out", data}, out, err);
    codes += cli::run_command(
        {"--config", cfg, "--seed", "7", "train", "--data", data, "--out", (dir / run / "train").string()}, out, err);
  }
  int data_files = 0, train_files = 0;
  const bool data_same = same_tree(dir / "a" / "data", dir / "b" / "data", data_files);
  const bool train_same = same_tree(dir / "a" / "train", dir / "b" / "train", train_files);
  const bool metrics = fs::exists(dir / "a" / "train" / "metrics.csv");
  return {codes == 0 && data_same && train_same && metrics && data_files > 1,
          fmt("exit codes sum %d; dataset %s over %d files; train outputs %s over %d files", codes,
              data_same ? "identical" : "DIFFERENT", data_files, train_same ? "identical" : "DIFFERENT", train_files)};
}

Outcome few_shot_direction() {
  // Pretrain once on the other two tasks, then adapt to press-buttons.
  constexpr long kPretrainSteps = 2000;
  constexpr long kAdaptSteps = 4000;
  const int held_out = 2;
  const policy::PolicyConfig c = toy_config(5);
  policy::PolicyNet pre(c, 100);
  {
    const auto data = make_data({0, 1}, 50, 5, 100);
    train::train(pre, data, render::cube_views(kContract.workspace_bounds, 32), train_options(kPretrainSteps, 100));
  }
  std::string detail;
  double adapted_sum = 0.0, scratch_sum = 0.0;
  bool budgets = true;
  for (std::uint64_t seed : {1, 2, 3}) {
    eval::AdaptOptions o;
    o.train = train_options(kAdaptSteps, seed);
    o.eval.task_ids = {held_out};
    o.eval.episodes_per_task = 25;
    o.eval.seed = 5000 + seed;
    o.model.grid_size = 64;
    o.pretrain_tasks = {"reach-block", "pick-place"};
    o.scratch_init_seed = 200 + seed;
    const auto data = make_data({held_out}, 10, 5, 300 + seed);
    const auto r = eval::few_shot_adapt(pre, kContract, data, {held_out}, o);
    budgets = budgets && r.adapted_steps == kAdaptSteps && r.scratch_steps == kAdaptSteps && r.warnings.empty();
    const double a = r.adapted.tasks[0].success_rate(), s = r.scratch.tasks[0].success_rate();
    adapted_sum += a;
    scratch_sum += s;
    detail += fmt("seed %llu adapted %.2f scratch %.2f; ", static_cast<unsigned long long>(seed), a, s);
  }
  detail += fmt("mean adapted %.3f scratch %.3f", adapted_sum / 3, scratch_sum / 3);
  return {budgets && adapted_sum >= scratch_sum, detail};
}

struct Criterion {
  int id;
  const char* name;
  std::function<Outcome()> run;
};

}  // namespace

int main(int argc, char** argv) {
  const std::vector<Criterion> all = {
      {1, "gradient suite", gradient_suite},
      {2, "LoRA identity at init", lora_identity},
      {3, "frozen base after 500 steps", frozen_base},
      {4, "back-projection oracle", backprojection_oracle},
      {5, "position round trip", position_roundtrip},
      {6, "rotation round trip", rotation_roundtrip},
      {7, "keyframe oracle", keyframe_oracle},
      {8, "renderer oracle", renderer_oracle},
      {9, "desk-scale learning on reach-block", desk_learning},
      {10, "chunking efficiency h=5 vs h=1", chunking_efficiency},
      {11, "expert smoothness and inspect CSV", smoothness},
      {12, "masked logits get zero gradient", masking},
      {13, "gen-data and train determinism", determinism},
      {14, "few-shot direction on held-out press-buttons", few_shot_direction},
  };
  std::set<int> selected;
  g_out = fs::temp_directory_path() / "mvact_acceptance";
  for (int i = 1; i < argc; ++i) {
    const std::string a = argv[i];
    if (a == "--out" && i + 1 < argc) {
      g_out = argv[++i];
    } else {
      selected.insert(std::stoi(a));
    }
  }
  fs::create_directories(g_out);
  int failures = 0;
  for (const auto& c : all) {
    if (!selected.empty() && !selected.count(c.id)) continue;
    Stopwatch sw;
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    failures += o.pass ? 0 : 1;
    std::cout << "criterion " << c.id << ": " << (o.pass ? "PASS" : "FAIL") << " " << c.name << " | " << o.detail
              << fmt(" [%.1fs]", sw.seconds()) << std::endl;
  }
  return failures == 0 ? 0 : 1;
}
