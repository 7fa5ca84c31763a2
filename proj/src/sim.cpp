// SPDX-License-Identifier: Apache-2.0
#include "mvact/sim.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <stdexcept>

#include "mvact/error.hpp"

namespace mvact::sim {
namespace {

constexpr double kBlockHalf = 0.025;
constexpr double kButtonRadius = 0.03;
constexpr double kButtonHalfHeight = 0.01;
const Vec3 kPadHalf(0.06, 0.06, 0.005);
const Vec3 kPadColor(0.95, 0.95, 0.95);
const Vec3 kTableColor(0.55, 0.45, 0.35);
const Vec3 kGripperOpenColor(0.8, 0.8, 0.8);
const Vec3 kGripperClosedColor(0.3, 0.3, 0.3);
constexpr double kPressedDimming = 0.3;
constexpr double kStartHeight = 0.35;
constexpr double kHoverHeight = 0.1;

double uniform(std::mt19937_64& rng, double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

double footprint_radius(const SceneObject& o) {
  if (o.primitive == Primitive::box) return std::hypot(o.half_extents.x(), o.half_extents.y());
  return o.half_extents.x();
}

Vec3 palette_color(const InstructionTemplate& tpl, int vocab_index) {
  const auto& word = tpl.vocabulary.at(static_cast<std::size_t>(vocab_index));
  for (const auto& c : color_palette()) {
    if (c.name == word) return c.rgb;
  }
  // Non-color vocabulary words get a deterministic gray level.
  const double g = 0.2 + 0.6 * static_cast<double>(vocab_index % 7) / 6.0;
  return Vec3(g, g, g);
}

SceneObject make_block(int id, const Vec3& color, double yaw) {
  SceneObject o;
  o.id = id;
  o.primitive = Primitive::box;
  o.role = ObjectRole::block;
  o.half_extents = Vec3::Constant(kBlockHalf);
  o.color = color;
  o.pose.rotation = yaw_rotation(yaw);
  return o;
}

SceneObject make_button(int id, const Vec3& color) {
  SceneObject o;
  o.id = id;
  o.primitive = Primitive::cylinder;
  o.role = ObjectRole::button;
  o.half_extents = Vec3(kButtonRadius, kButtonRadius, kButtonHalfHeight);
  o.color = color;
  return o;
}

SceneObject make_pad(int id) {
  SceneObject o;
  o.id = id;
  o.primitive = Primitive::box;
  o.role = ObjectRole::pad;
  o.half_extents = kPadHalf;
  o.color = kPadColor;
  return o;
}

/// Places every object on the table with pairwise footprint gaps of at least
/// min_clearance, by rejection sampling of whole layouts.
void place_objects(const EnvContract& c, std::vector<SceneObject>& objects, std::mt19937_64& rng) {
  const Box3& b = c.workspace_bounds;
  const double lo_x = b.min().x() + c.placement_margin;
  const double hi_x = b.max().x() - c.placement_margin;
  const double lo_y = b.min().y() + c.placement_margin;
  const double hi_y = b.max().y() - c.placement_margin;
  const bool table_inside = c.table_height >= b.min().z() && c.table_height < b.max().z();
  if (!(hi_x > lo_x) || !(hi_y > lo_y) || !table_inside) {
    throw Error(Errc::placement_infeasible, "workspace leaves no room on the table");
  }
  for (int attempt = 0; attempt < c.max_placement_attempts; ++attempt) {
    bool ok = true;
    for (std::size_t i = 0; i < objects.size() && ok; ++i) {
      auto& o = objects[i];
      o.pose.position = Vec3(uniform(rng, lo_x, hi_x), uniform(rng, lo_y, hi_y),
                             c.table_height + o.half_extents.z());
      if (o.pose.position.z() + o.half_extents.z() > b.max().z()) ok = false;
      for (std::size_t j = 0; j < i && ok; ++j) {
        const double gap = (o.pose.position.head<2>() - objects[j].pose.position.head<2>()).norm() -
                           footprint_radius(o) - footprint_radius(objects[j]);
        if (gap < c.min_clearance) ok = false;
      }
    }
    if (ok) return;
  }
  throw Error(Errc::placement_infeasible,
              "no collision-free layout after " + std::to_string(c.max_placement_attempts) + " attempts");
}

std::vector<int> shuffled_vocab(const InstructionTemplate& tpl, std::mt19937_64& rng) {
  std::vector<int> idx(tpl.vocabulary.size());
  std::iota(idx.begin(), idx.end(), 0);
  // Fisher-Yates with our own draws so layouts do not depend on std::shuffle.
  for (std::size_t i = idx.size(); i > 1; --i) {
    const auto j = static_cast<std::size_t>(std::uniform_int_distribution<std::uint64_t>(0, i - 1)(rng));
    std::swap(idx[i - 1], idx[j]);
  }
  return idx;
}

double yaw_of(const Quat& q) { return std::atan2(2.0 * (q.w() * q.z() + q.x() * q.y()),
                                                 1.0 - 2.0 * (q.y() * q.y() + q.z() * q.z())); }

/// Block yaw equivalent under the cube's 90 degree symmetry that is closest to
/// the reference yaw.
double aligned_yaw(double block_yaw, double reference_yaw) {
  const double quarter = std::numbers::pi / 2.0;
  const double k = std::round((reference_yaw - block_yaw) / quarter);
  return block_yaw + k * quarter;
}

struct Waypoint {
  Pose pose;
  bool gripper_open = true;
  bool collision_allowed = false;
};

/// Normalized position along a trapezoidal (or triangular) speed profile.
struct SpeedProfile {
  double distance = 0.0;
  double duration = 0.0;
  double accel = 0.0;
  double cruise = 0.0;
  double ramp = 0.0;  // duration of the acceleration phase

  SpeedProfile(double d, double v_max, double a) : distance(d), accel(a) {
    if (d <= 0.0) return;
    if (d >= v_max * v_max / a) {
      ramp = v_max / a;
      cruise = v_max;
      duration = d / v_max + ramp;
    } else {
      ramp = std::sqrt(d / a);
      cruise = a * ramp;
      duration = 2.0 * ramp;
    }
  }

  double at(double t) const {
    if (t <= ramp) return 0.5 * accel * t * t;
    if (t >= duration - ramp) {
      const double r = duration - t;
      return distance - 0.5 * accel * r * r;
    }
    return 0.5 * accel * ramp * ramp + cruise * (t - ramp);
  }
};

void append_segment(const EnvContract& c, Trajectory& traj, SceneState& scene, const Waypoint& wp) {
  const Pose from = scene.gripper.pose;
  const double distance = (wp.pose.position - from.position).norm();
  const double angle = quaternion_angle(from.rotation, wp.pose.rotation);
  const SpeedProfile profile(distance, c.v_max, c.accel);
  const int n_pos = static_cast<int>(std::ceil(profile.duration - 1e-9));
  // The normalized speed of either profile peaks at 2/N per step.
  const int n_rot = static_cast<int>(std::ceil(2.0 * angle / c.omega_max - 1e-9));
  const int n = std::max({n_pos, n_rot, 1});
  const double dt = profile.duration / n;

  for (int k = 1; k <= n; ++k) {
    Action8 a;
    if (k == n) {
      a.position = wp.pose.position;
      a.rotation = wp.pose.rotation;
      a.gripper_open = wp.gripper_open;
    } else {
      const double f = distance > 0.0 ? profile.at(k * dt) / distance : static_cast<double>(k) / n;
      a.position = from.position + f * (wp.pose.position - from.position);
      a.rotation = from.rotation.slerp(f, wp.pose.rotation).normalized();
      a.gripper_open = scene.gripper.open;
    }
    a.collision_allowed = wp.collision_allowed;
    traj.actions.push_back(a);
    scene = step_env(c, scene, a);
    traj.states.push_back(scene);
  }
  traj.waypoint_steps.push_back(static_cast<int>(traj.states.size()) - 1);
}

void append_dwell(const EnvContract& c, Trajectory& traj, SceneState& scene, bool collision_allowed) {
  Action8 a = hold_action(scene);
  a.collision_allowed = collision_allowed;
  traj.actions.push_back(a);
  scene = step_env(c, scene, a);
  traj.states.push_back(scene);
}

std::vector<Waypoint> reach_waypoints(const SceneState& s) {
  const SceneObject& block = *s.find(s.task.slot_objects.at(0));
  const double yaw = aligned_yaw(yaw_of(block.pose.rotation), yaw_of(s.gripper.pose.rotation));
  const Quat q = yaw_rotation(yaw);
  const double top = block.pose.position.z() + block.half_extents.z();
  Waypoint hover{{Vec3(block.pose.position.x(), block.pose.position.y(), top + kHoverHeight), q}, true, false};
  Waypoint touch{{Vec3(block.pose.position.x(), block.pose.position.y(), top + 0.01), q}, true, false};
  return {hover, touch};
}

std::vector<Waypoint> pick_place_waypoints(const SceneState& s) {
  const SceneObject& block = *s.find(s.task.slot_objects.at(0));
  const SceneObject& pad = *s.find(s.task.slot_objects.at(1));
  const double yaw = aligned_yaw(yaw_of(block.pose.rotation), yaw_of(s.gripper.pose.rotation));
  const Quat q = yaw_rotation(yaw);
  const Vec3 bp = block.pose.position;
  const double half = block.half_extents.z();
  const double grasp_z = bp.z() + half - 0.01;
  // Gripper height above the block center while carrying.
  const double carry_offset = grasp_z - bp.z();
  const double pad_top = pad.pose.position.z() + pad.half_extents.z();
  const Vec3 pc = pad.pose.position;

  std::vector<Waypoint> w;
  w.push_back({{Vec3(bp.x(), bp.y(), bp.z() + half + kHoverHeight), q}, true, false});
  w.push_back({{Vec3(bp.x(), bp.y(), grasp_z), q}, false, false});
  w.push_back({{Vec3(bp.x(), bp.y(), grasp_z + 0.12), q}, false, false});
  w.push_back({{Vec3(pc.x(), pc.y(), pad_top + kHoverHeight + half + carry_offset), q}, false, false});
  w.push_back({{Vec3(pc.x(), pc.y(), pad_top + 0.002 + half + carry_offset), q}, true, false});
  return w;
}

std::vector<Waypoint> press_waypoints(const SceneState& s) {
  const Quat q = s.gripper.pose.rotation;
  std::vector<Waypoint> w;
  const auto& order = s.task.slot_objects;
  for (std::size_t i = 0; i < order.size(); ++i) {
    const SceneObject& button = *s.find(order[i]);
    const Vec3 p = button.pose.position;
    const double top = p.z() + button.half_extents.z();
    const Waypoint hover{{Vec3(p.x(), p.y(), top + 0.08), q}, true, false};
    w.push_back(hover);
    w.push_back({{Vec3(p.x(), p.y(), top + 0.004), q}, true, true});
    if (i + 1 < order.size()) w.push_back(hover);
  }
  return w;
}

bool reach_success(const EnvContract& c, const SceneState& s) {
  const SceneObject* block = s.find(s.task.slot_objects.at(0));
  const Vec3& g = s.gripper.pose.position;
  return box_signed_distance(g, block->pose, block->half_extents) <= c.grasp_radius &&
         g.z() >= block->pose.position.z();
}

bool pick_place_success(const SceneState& s) {
  if (s.gripper.held_object) return false;
  const SceneObject* block = s.find(s.task.slot_objects.at(0));
  const SceneObject* pad = s.find(s.task.slot_objects.at(1));
  const Vec3 local = pad->pose.rotation.conjugate() * (block->pose.position - pad->pose.position);
  if (std::abs(local.x()) > pad->half_extents.x() || std::abs(local.y()) > pad->half_extents.y()) return false;
  const double gap = (block->pose.position.z() - block->half_extents.z()) -
                     (pad->pose.position.z() + pad->half_extents.z());
  return gap >= -0.01 && gap <= 0.02;
}

double object_distance(const Vec3& p, const SceneObject& o) {
  switch (o.primitive) {
    case Primitive::box: return box_signed_distance(p, o.pose, o.half_extents);
    case Primitive::cylinder: return cylinder_signed_distance(p, o.pose, o.half_extents);
    case Primitive::sphere: return (p - o.pose.position).norm() - o.half_extents.x();
  }
  return std::numeric_limits<double>::infinity();
}

Vec3 sample_box_local(std::mt19937_64& rng, const Vec3& h) {
  const double ax = h.y() * h.z();
  const double ay = h.x() * h.z();
  const double az = h.x() * h.y();
  const double pick = uniform(rng, 0.0, ax + ay + az);
  const double sign = uniform(rng, 0.0, 1.0) < 0.5 ? -1.0 : 1.0;
  const double u = uniform(rng, -1.0, 1.0);
  const double v = uniform(rng, -1.0, 1.0);
  if (pick < ax) return Vec3(sign * h.x(), u * h.y(), v * h.z());
  if (pick < ax + ay) return Vec3(u * h.x(), sign * h.y(), v * h.z());
  return Vec3(u * h.x(), v * h.y(), sign * h.z());
}

Vec3 sample_sphere_local(std::mt19937_64& rng, double r) {
  std::normal_distribution<double> n(0.0, 1.0);
  Vec3 d(n(rng), n(rng), n(rng));
  while (d.squaredNorm() < 1e-24) d = Vec3(n(rng), n(rng), n(rng));
  return r * d.normalized();
}

Vec3 sample_cylinder_local(std::mt19937_64& rng, const Vec3& h) {
  const double r = h.x();
  const double side = 2.0 * std::numbers::pi * r * 2.0 * h.z();
  const double cap = std::numbers::pi * r * r;
  const double pick = uniform(rng, 0.0, side + 2.0 * cap);
  const double theta = uniform(rng, 0.0, 2.0 * std::numbers::pi);
  if (pick < side) return Vec3(r * std::cos(theta), r * std::sin(theta), uniform(rng, -h.z(), h.z()));
  const double rad = r * std::sqrt(uniform(rng, 0.0, 1.0));
  const double z = pick < side + cap ? h.z() : -h.z();
  return Vec3(rad * std::cos(theta), rad * std::sin(theta), z);
}

}  // namespace

const std::vector<NamedColor>& color_palette() {
  static const std::vector<NamedColor> palette = {
      {"red", Vec3(0.9, 0.1, 0.1)},    {"green", Vec3(0.1, 0.8, 0.1)},
      {"blue", Vec3(0.1, 0.2, 0.9)},   {"yellow", Vec3(0.9, 0.85, 0.1)},
      {"magenta", Vec3(0.85, 0.1, 0.85)}, {"cyan", Vec3(0.1, 0.85, 0.85)},
  };
  return palette;
}

EnvContract EnvContract::defaults() {
  EnvContract c;
  std::vector<std::string> colors;
  for (const auto& p : color_palette()) colors.push_back(p.name);
  c.instruction_set = {
      {"reach-block", "reach the {} block", 1, 1, colors},
      {"pick-place", "put the {} block on the pad", 1, 1, colors},
      {"press-buttons", "press the {} button, then the {} button, then the {} button", 2, 3, colors},
  };
  return c;
}

int EnvContract::template_index(const std::string& name) const {
  for (std::size_t i = 0; i < instruction_set.size(); ++i) {
    if (instruction_set[i].name == name) return static_cast<int>(i);
  }
  return -1;
}

void EnvContract::validate() const {
  if (episode_limit < 1) throw Error(Errc::config_constraint, "episode_limit must be >= 1");
  const Vec3 extent = workspace_bounds.max() - workspace_bounds.min();
  if (!(extent.array() > 0.0).all()) {
    throw Error(Errc::config_constraint, "workspace bounds need positive extent on every axis");
  }
  if (instruction_set.empty()) throw Error(Errc::config_constraint, "instruction_set is empty");
  for (const auto& t : instruction_set) {
    if (t.vocabulary.empty() || t.min_slots < 1 || t.min_slots > t.max_slots) {
      throw Error(Errc::config_constraint, "template '" + t.name + "' has invalid slots");
    }
  }
  if (!(grasp_radius > 0.0) || !(v_max > 0.0) || !(v_eps > 0.0) || !(omega_max > 0.0) || !(accel > 0.0)) {
    throw Error(Errc::config_constraint, "physical constants must be positive");
  }
}

const SceneObject* SceneState::find(int id) const {
  for (const auto& o : objects) {
    if (o.id == id) return &o;
  }
  return nullptr;
}

SceneObject* SceneState::find(int id) {
  for (auto& o : objects) {
    if (o.id == id) return &o;
  }
  return nullptr;
}

Action8 hold_action(const SceneState& scene) {
  Action8 a;
  a.position = scene.gripper.pose.position;
  a.rotation = scene.gripper.pose.rotation;
  a.gripper_open = scene.gripper.open;
  return a;
}

SceneState make_scene(const EnvContract& contract, int task_id, std::uint64_t seed) {
  if (task_id < 0 || task_id >= static_cast<int>(contract.instruction_set.size())) {
    throw Error(Errc::invalid_argument, "task id " + std::to_string(task_id) + " not in instruction set");
  }
  const InstructionTemplate& tpl = contract.instruction_set[static_cast<std::size_t>(task_id)];
  std::mt19937_64 rng(mix_seed(mix_seed(contract.rng_seed, seed), static_cast<std::uint64_t>(task_id)));

  SceneState s;
  s.task.instruction.template_id = task_id;
  const std::vector<int> vocab = shuffled_vocab(tpl, rng);
  const auto color = [&](std::size_t k) { return palette_color(tpl, vocab.at(k % vocab.size())); };
  const auto yaw = [&] { return uniform(rng, 0.0, std::numbers::pi / 2.0); };

  if (tpl.name == "reach-block") {
    for (int i = 0; i < 3; ++i) s.objects.push_back(make_block(i, color(static_cast<std::size_t>(i)), yaw()));
    s.task.instruction.slot_bindings = {vocab[0]};
    s.task.slot_objects = {0};
  } else if (tpl.name == "pick-place") {
    for (int i = 0; i < 2; ++i) s.objects.push_back(make_block(i, color(static_cast<std::size_t>(i)), yaw()));
    s.objects.push_back(make_pad(2));
    s.task.instruction.slot_bindings = {vocab[0]};
    s.task.slot_objects = {0, 2};
  } else if (tpl.name == "press-buttons") {
    for (int i = 0; i < 3; ++i) s.objects.push_back(make_button(i, color(static_cast<std::size_t>(i))));
    const int count = static_cast<int>(
        std::uniform_int_distribution<int>(tpl.min_slots, std::min(tpl.max_slots, 3))(rng));
    for (int i = 0; i < count; ++i) {
      s.task.instruction.slot_bindings.push_back(vocab[static_cast<std::size_t>(i)]);
      s.task.slot_objects.push_back(i);
    }
  } else {
    // Generic layout for templates without a dedicated routine.
    const int count = tpl.max_slots + 1;
    for (int i = 0; i < count; ++i) s.objects.push_back(make_block(i, color(static_cast<std::size_t>(i)), yaw()));
    for (int i = 0; i < tpl.max_slots; ++i) {
      s.task.instruction.slot_bindings.push_back(vocab[static_cast<std::size_t>(i) % vocab.size()]);
      s.task.slot_objects.push_back(i);
    }
  }
  place_objects(contract, s.objects, rng);

  const Box3& b = contract.workspace_bounds;
  const Vec3 start(uniform(rng, -0.1, 0.1), uniform(rng, -0.1, 0.1), contract.table_height + kStartHeight);
  s.gripper.pose.position = start.cwiseMax(b.min()).cwiseMin(b.max());
  s.gripper.pose.rotation = yaw_rotation(yaw());
  s.gripper.open = true;
  return s;
}

SceneState step_env(const EnvContract& contract, const SceneState& scene, const Action8& action) {
  SceneState next = scene;
  next.step = scene.step + 1;

  const Box3& b = contract.workspace_bounds;
  const Vec3 target = action.position.cwiseMax(b.min()).cwiseMin(b.max());
  next.clamped = target != action.position;
  Pose pose{target, action.rotation.normalized()};
  if (action.rotation.coeffs() == scene.gripper.pose.rotation.coeffs()) pose.rotation = scene.gripper.pose.rotation;
  const bool moved = !(pose == scene.gripper.pose);
  next.gripper.pose = pose;

  if (moved && next.gripper.held_object) {
    SceneObject* held = next.find(*next.gripper.held_object);
    held->pose.position = pose.position + pose.rotation * next.gripper.held_offset.position;
    held->pose.rotation = (pose.rotation * next.gripper.held_offset.rotation).normalized();
  }

  const bool closing = scene.gripper.open && !action.gripper_open;
  const bool opening = !scene.gripper.open && action.gripper_open;
  if (closing && !next.gripper.held_object) {
    const SceneObject* best = nullptr;
    double best_d = contract.grasp_radius;
    for (const auto& o : next.objects) {
      if (o.role != ObjectRole::block) continue;
      const double d = box_signed_distance(pose.position, o.pose, o.half_extents);
      if (d <= best_d && (best == nullptr || d < best_d)) {
        best = &o;
        best_d = d;
      }
    }
    if (best != nullptr) {
      next.gripper.held_object = best->id;
      next.gripper.held_offset.position = pose.rotation.conjugate() * (best->pose.position - pose.position);
      next.gripper.held_offset.rotation = (pose.rotation.conjugate() * best->pose.rotation).normalized();
      const auto& slots = next.task.slot_objects;
      if (!slots.empty() && best->id == slots[0] && next.task.phase == 0) next.task.phase = 1;
    }
  }
  if (opening && next.gripper.held_object) {
    next.gripper.held_object.reset();
    next.gripper.held_offset = Pose{};
  }
  next.gripper.open = action.gripper_open;

  for (auto& o : next.objects) {
    if (o.role != ObjectRole::button || o.activated) continue;
    if (object_distance(pose.position, o) > contract.press_radius) continue;
    o.activated = true;
    o.color *= kPressedDimming;
    const auto& order = next.task.slot_objects;
    const auto phase = static_cast<std::size_t>(next.task.phase);
    if (phase < order.size() && order[phase] == o.id) {
      ++next.task.phase;
    } else {
      next.task.failed = true;
    }
  }
  return next;
}

bool is_success(const EnvContract& contract, const SceneState& scene) {
  const auto& tpl = contract.instruction_set.at(static_cast<std::size_t>(scene.task.instruction.template_id));
  if (tpl.name == "reach-block") return reach_success(contract, scene);
  if (tpl.name == "pick-place") return pick_place_success(scene);
  if (tpl.name == "press-buttons") {
    return !scene.task.failed && scene.task.phase == static_cast<int>(scene.task.slot_objects.size());
  }
  return false;
}

Trajectory expert_demo(const EnvContract& contract, const SceneState& scene) {
  const auto& tpl = contract.instruction_set.at(static_cast<std::size_t>(scene.task.instruction.template_id));
  std::vector<Waypoint> waypoints;
  if (tpl.name == "reach-block") {
    waypoints = reach_waypoints(scene);
  } else if (tpl.name == "pick-place") {
    waypoints = pick_place_waypoints(scene);
  } else if (tpl.name == "press-buttons") {
    waypoints = press_waypoints(scene);
  } else {
    throw Error(Errc::unsupported_task, "no expert routine for template '" + tpl.name + "'");
  }

  Trajectory traj;
  traj.instruction = scene.task.instruction;
  traj.states.push_back(scene);
  SceneState current = scene;
  for (std::size_t i = 0; i < waypoints.size(); ++i) {
    append_segment(contract, traj, current, waypoints[i]);
    if (i + 1 < waypoints.size()) append_dwell(contract, traj, current, waypoints[i].collision_allowed);
  }
  if (!is_success(contract, current)) {
    throw std::logic_error("expert routine for '" + tpl.name + "' did not reach success");
  }

  traj.steps.resize(traj.states.size());
  for (std::size_t t = 0; t < traj.states.size(); ++t) {
    auto& step = traj.steps[t];
    step.pointcloud_ref = static_cast<int>(t);
    step.gripper_pose = traj.states[t].gripper.pose;
    step.gripper_open = traj.states[t].gripper.open;
    step.ee_speed = t + 1 < traj.states.size()
                        ? (traj.states[t + 1].gripper.pose.position - step.gripper_pose.position).norm()
                        : 0.0;
  }
  return traj;
}

PointCloud sample_pointcloud(const EnvContract& contract, const SceneState& scene, int points_per_object,
                             std::uint64_t seed, const CloudOptions& options) {
  if (points_per_object < 1) throw Error(Errc::invalid_argument, "points_per_object must be >= 1");
  std::mt19937_64 rng(mix_seed(seed, 0x636c6f7564ULL));
  const Eigen::Index total = static_cast<Eigen::Index>(scene.objects.size()) * points_per_object +
                             (options.include_table ? options.table_points : 0) +
                             (options.include_gripper ? options.gripper_points : 0);
  PointCloud cloud;
  cloud.xyz.resize(total, 3);
  cloud.rgb.resize(total, 3);
  Eigen::Index row = 0;
  const auto emit = [&](const Vec3& p, const Vec3& rgb) {
    cloud.xyz.row(row) = p.cast<float>().transpose();
    cloud.rgb.row(row) = rgb.cast<float>().transpose();
    ++row;
  };

  for (const auto& o : scene.objects) {
    for (int i = 0; i < points_per_object; ++i) {
      Vec3 local;
      switch (o.primitive) {
        case Primitive::box: local = sample_box_local(rng, o.half_extents); break;
        case Primitive::sphere: local = sample_sphere_local(rng, o.half_extents.x()); break;
        case Primitive::cylinder: local = sample_cylinder_local(rng, o.half_extents); break;
      }
      emit(o.pose.position + o.pose.rotation * local, o.color);
    }
  }
  if (options.include_table) {
    const Box3& b = contract.workspace_bounds;
    for (int i = 0; i < options.table_points; ++i) {
      emit(Vec3(uniform(rng, b.min().x(), b.max().x()), uniform(rng, b.min().y(), b.max().y()),
                contract.table_height),
           kTableColor);
    }
  }
  if (options.include_gripper) {
    const Vec3 color = scene.gripper.open ? kGripperOpenColor : kGripperClosedColor;
    for (int i = 0; i < options.gripper_points; ++i) {
      emit(scene.gripper.pose.position + sample_sphere_local(rng, options.gripper_radius), color);
    }
  }
  return cloud;
}

SmoothnessStats smoothness_stats(const Trajectory& traj, const std::vector<int>& keyframes) {
  if (traj.steps.size() < 2) {
    throw Error(Errc::insufficient_length, "smoothness needs at least two steps");
  }
  SmoothnessStats s;
  const std::size_t n = traj.steps.size() - 1;
  s.position_shift.resize(n);
  s.angle_shift.resize(n);
  for (std::size_t t = 0; t < n; ++t) {
    const Pose& a = traj.steps[t].gripper_pose;
    const Pose& b = traj.steps[t + 1].gripper_pose;
    s.position_shift[t] = (b.position - a.position).norm();
    s.angle_shift[t] = quaternion_angle(a.rotation, b.rotation);
  }
  s.max_position_shift = *std::max_element(s.position_shift.begin(), s.position_shift.end());
  s.max_angle_shift = *std::max_element(s.angle_shift.begin(), s.angle_shift.end());
  s.mean_position_shift = std::accumulate(s.position_shift.begin(), s.position_shift.end(), 0.0) / n;
  s.mean_angle_shift = std::accumulate(s.angle_shift.begin(), s.angle_shift.end(), 0.0) / n;

  int prev = 0;
  for (int k : keyframes) {
    const Pose& a = traj.steps.at(static_cast<std::size_t>(prev)).gripper_pose;
    const Pose& b = traj.steps.at(static_cast<std::size_t>(k)).gripper_pose;
    s.keyframe_position_shift.push_back((b.position - a.position).norm());
    s.keyframe_angle_shift.push_back(quaternion_angle(a.rotation, b.rotation));
    prev = k;
  }
  return s;
}

std::string instruction_text(const EnvContract& contract, const Instruction& instruction) {
  const auto& tpl = contract.instruction_set.at(static_cast<std::size_t>(instruction.template_id));
  std::string out;
  std::size_t slot = 0;
  std::size_t pos = 0;
  while (pos < tpl.text.size()) {
    const auto brace = tpl.text.find("{}", pos);
    if (brace == std::string::npos) {
      out += tpl.text.substr(pos);
      break;
    }
    if (slot >= instruction.slot_bindings.size()) {
      // Trailing clauses for unused optional slots are dropped at the comma.
      const auto comma = out.rfind(',');
      if (comma != std::string::npos) out.erase(comma);
      break;
    }
    out += tpl.text.substr(pos, brace - pos);
    out += tpl.vocabulary.at(static_cast<std::size_t>(instruction.slot_bindings[slot++]));
    pos = brace + 2;
  }
  return out;
}

}  // namespace mvact::sim
