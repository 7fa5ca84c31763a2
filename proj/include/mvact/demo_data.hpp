// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <vector>

#include "mvact/sim.hpp"

namespace mvact::demo {

struct KeyframeParams {
  double speed_eps = 1e-4;  ///< m/step
  int min_gap = 2;
  bool include_final = true;

  void validate() const;
};

/// One keyframe-anchored observation and up to `horizon` future keyframe
/// actions. valid_mask is a prefix mask whose ones count equals targets.size().
struct TrainingSample {
  sim::PointCloud observation;
  sim::Instruction instruction;
  std::vector<sim::Action8f> targets;
  std::vector<std::uint8_t> valid_mask;
  int anchor_step = 0;
  std::uint64_t episode_seed = 0;

  int horizon() const { return static_cast<int>(valid_mask.size()); }

  friend bool operator==(const TrainingSample&, const TrainingSample&) = default;
};

/// Steps where the end effector pauses or the gripper toggles, gap-merged.
std::vector<int> extract_keyframes(const sim::Trajectory& traj, const KeyframeParams& params);

/// Anchors at step 0 and every non-final keyframe; each anchor targets the next
/// horizon keyframe actions. Observations are left empty.
std::vector<TrainingSample> build_training_samples(const sim::Trajectory& traj, const std::vector<int>& keyframes,
                                                   int horizon);

struct CloudParams {
  int points_per_object = 400;
  sim::CloudOptions options;
};

void attach_observations(std::vector<TrainingSample>& samples, const sim::Trajectory& traj,
                         const sim::EnvContract& contract, const CloudParams& cloud, std::uint64_t seed);

struct GenerationParams {
  std::vector<int> task_ids;
  int episodes_per_task = 50;
  int horizon = 5;
  std::uint64_t seed = 0;
  KeyframeParams keyframes;
  CloudParams cloud;
};

/// make_scene, re-seeding `seed` in place while the layout is infeasible.
sim::SceneState feasible_scene(const sim::EnvContract& contract, int task_id, std::uint64_t& seed);

/// Scene -> expert demo -> keyframes -> samples for every requested episode.
/// Episodes whose layout is infeasible are re-seeded deterministically.
std::vector<TrainingSample> generate_samples(const sim::EnvContract& contract, const GenerationParams& params);

/// Seed of episode `episode` of task `task_id` under a run seed.
std::uint64_t episode_seed(std::uint64_t run_seed, int task_id, int episode);

}  // namespace mvact::demo
