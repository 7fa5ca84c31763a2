// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "mvact/geometry.hpp"

namespace mvact::sim {

enum class Primitive : std::uint8_t { box, sphere, cylinder };
enum class ObjectRole : std::uint8_t { block, pad, button };

/// A language template: `text` contains `{}` placeholders, one per bound slot.
/// Every slot draws from the shared vocabulary.
struct InstructionTemplate {
  std::string name;
  std::string text;
  int min_slots = 1;
  int max_slots = 1;
  std::vector<std::string> vocabulary;
};

struct NamedColor {
  std::string name;
  Vec3 rgb;
};

/// Colors available to slot vocabularies, in vocabulary order.
const std::vector<NamedColor>& color_palette();

struct EnvContract {
  Box3 workspace_bounds{Vec3(-0.3, -0.3, -0.05), Vec3(0.3, 0.3, 0.55)};
  int episode_limit = 25;
  std::vector<InstructionTemplate> instruction_set;
  std::uint64_t rng_seed = 0;

  double table_height = 0.0;
  double grasp_radius = 0.03;
  double press_radius = 0.01;
  double v_max = 0.05;
  double v_eps = 1e-4;
  double omega_max = 0.2;
  double accel = 0.01;
  double min_clearance = 0.04;
  double placement_margin = 0.06;
  int max_placement_attempts = 2000;

  /// The three built-in templates: reach-block, pick-place, press-buttons.
  static EnvContract defaults();

  /// Index of the template with this name, or -1.
  int template_index(const std::string& name) const;

  void validate() const;
};

struct SceneObject {
  int id = 0;
  Primitive primitive = Primitive::box;
  ObjectRole role = ObjectRole::block;
  Pose pose;
  Vec3 half_extents = Vec3::Zero();
  Vec3 color = Vec3::Zero();
  bool activated = false;

  friend bool operator==(const SceneObject&, const SceneObject&) = default;
};

struct GripperState {
  Pose pose;
  bool open = true;
  std::optional<int> held_object;
  /// Held object pose expressed in the gripper frame.
  Pose held_offset;

  friend bool operator==(const GripperState&, const GripperState&) = default;
};

struct Instruction {
  int template_id = 0;
  std::vector<int> slot_bindings;

  friend bool operator==(const Instruction&, const Instruction&) = default;
};

struct TaskState {
  Instruction instruction;
  /// Object ids referenced by each slot, in slot order.
  std::vector<int> slot_objects;
  int phase = 0;
  bool failed = false;

  friend bool operator==(const TaskState&, const TaskState&) = default;
};

struct SceneState {
  std::vector<SceneObject> objects;
  GripperState gripper;
  TaskState task;
  int step = 0;
  bool clamped = false;

  const SceneObject* find(int id) const;
  SceneObject* find(int id);

  friend bool operator==(const SceneState&, const SceneState&) = default;
};

template <typename Scalar>
struct BasicAction8 {
  Eigen::Matrix<Scalar, 3, 1> position = Eigen::Matrix<Scalar, 3, 1>::Zero();
  Eigen::Quaternion<Scalar> rotation = Eigen::Quaternion<Scalar>::Identity();
  bool gripper_open = true;
  bool collision_allowed = false;

  template <typename Other>
  BasicAction8<Other> cast() const {
    BasicAction8<Other> out;
    out.position = position.template cast<Other>();
    out.rotation = rotation.template cast<Other>();
    out.gripper_open = gripper_open;
    out.collision_allowed = collision_allowed;
    return out;
  }

  friend bool operator==(const BasicAction8& a, const BasicAction8& b) {
    return a.position == b.position && a.rotation.coeffs() == b.rotation.coeffs() &&
           a.gripper_open == b.gripper_open && a.collision_allowed == b.collision_allowed;
  }
};
using Action8 = BasicAction8<double>;
using Action8f = BasicAction8<float>;

/// The action that leaves a scene's gripper exactly where it is.
Action8 hold_action(const SceneState& scene);

struct TrajectoryStep {
  int pointcloud_ref = 0;  ///< index into Trajectory::states
  Pose gripper_pose;
  bool gripper_open = true;
  double ee_speed = 0.0;  ///< |position[t+1] - position[t]|, zero at the last step
};

struct Trajectory {
  std::vector<TrajectoryStep> steps;
  std::vector<Action8> actions;  ///< actions[t] takes steps[t] to steps[t+1]
  Instruction instruction;
  std::vector<SceneState> states;
  /// Steps at which the expert arrived at a waypoint.
  std::vector<int> waypoint_steps;
};

template <typename Scalar>
struct BasicPointCloud {
  using Points = Eigen::Matrix<Scalar, Eigen::Dynamic, 3, Eigen::RowMajor>;
  Points xyz;
  Points rgb;

  Eigen::Index size() const { return xyz.rows(); }

  friend bool operator==(const BasicPointCloud& a, const BasicPointCloud& b) {
    return a.xyz.rows() == b.xyz.rows() && a.xyz == b.xyz && a.rgb == b.rgb;
  }
};
using PointCloud = BasicPointCloud<float>;

struct CloudOptions {
  int table_points = 4000;
  bool include_table = true;
  bool include_gripper = true;
  int gripper_points = 150;
  double gripper_radius = 0.015;
};

struct SmoothnessStats {
  std::vector<double> position_shift;  ///< meters, length |steps|-1
  std::vector<double> angle_shift;     ///< radians, length |steps|-1
  double max_position_shift = 0.0;
  double mean_position_shift = 0.0;
  double max_angle_shift = 0.0;
  double mean_angle_shift = 0.0;
  /// Shift between consecutive keyframes (empty when no keyframes were given).
  std::vector<double> keyframe_position_shift;
  std::vector<double> keyframe_angle_shift;
};

SceneState make_scene(const EnvContract& contract, int task_id, std::uint64_t seed);

Trajectory expert_demo(const EnvContract& contract, const SceneState& scene);

SceneState step_env(const EnvContract& contract, const SceneState& scene, const Action8& action);

bool is_success(const EnvContract& contract, const SceneState& scene);

PointCloud sample_pointcloud(const EnvContract& contract, const SceneState& scene, int points_per_object,
                             std::uint64_t seed, const CloudOptions& options = {});

SmoothnessStats smoothness_stats(const Trajectory& traj, const std::vector<int>& keyframes = {});

/// Renders the instruction text with its slot words filled in.
std::string instruction_text(const EnvContract& contract, const Instruction& instruction);

}  // namespace mvact::sim
