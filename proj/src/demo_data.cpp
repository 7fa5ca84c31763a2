// SPDX-License-Identifier: Apache-2.0
#include "mvact/demo_data.hpp"

#include "mvact/error.hpp"

namespace mvact::demo {

void KeyframeParams::validate() const {
  if (!(speed_eps > 0.0)) throw Error(Errc::config_constraint, "keyframes.speed_eps must be > 0");
  if (min_gap < 1) throw Error(Errc::config_constraint, "keyframes.min_gap must be >= 1");
}

std::vector<int> extract_keyframes(const sim::Trajectory& traj, const KeyframeParams& params) {
  if (traj.steps.size() < 2) throw Error(Errc::insufficient_length, "keyframes need at least two steps");
  const int last = static_cast<int>(traj.steps.size()) - 1;
  std::vector<int> out;
  for (int t = 1; t <= last; ++t) {
    const auto& s = traj.steps[static_cast<std::size_t>(t)];
    const bool paused = s.ee_speed <= params.speed_eps;
    const bool toggled = s.gripper_open != traj.steps[static_cast<std::size_t>(t - 1)].gripper_open;
    if (!paused && !toggled) continue;
    if (!out.empty() && t - out.back() < params.min_gap) continue;
    out.push_back(t);
  }
  if (params.include_final && (out.empty() || out.back() != last)) out.push_back(last);
  return out;
}

std::vector<TrainingSample> build_training_samples(const sim::Trajectory& traj, const std::vector<int>& keyframes,
                                                   int horizon) {
  if (horizon < 1) throw Error(Errc::invalid_argument, "horizon must be >= 1");
  if (keyframes.empty()) throw Error(Errc::empty_keyframes, "no keyframes to build samples from");
  std::vector<TrainingSample> samples;
  samples.reserve(keyframes.size());
  for (std::size_t a = 0; a < keyframes.size(); ++a) {
    TrainingSample s;
    s.instruction = traj.instruction;
    s.anchor_step = a == 0 ? 0 : keyframes[a - 1];
    s.valid_mask.assign(static_cast<std::size_t>(horizon), 0);
    for (std::size_t j = a; j < keyframes.size() && s.targets.size() < static_cast<std::size_t>(horizon); ++j) {
      const int k = keyframes[j];
      if (k < 1 || k > static_cast<int>(traj.actions.size())) {
        throw Error(Errc::invalid_argument, "keyframe " + std::to_string(k) + " outside trajectory");
      }
      s.targets.push_back(traj.actions[static_cast<std::size_t>(k - 1)].cast<float>());
      s.valid_mask[s.targets.size() - 1] = 1;
    }
    samples.push_back(std::move(s));
  }
  return samples;
}

void attach_observations(std::vector<TrainingSample>& samples, const sim::Trajectory& traj,
                         const sim::EnvContract& contract, const CloudParams& cloud, std::uint64_t seed) {
  for (auto& s : samples) {
    const auto& state = traj.states.at(static_cast<std::size_t>(s.anchor_step));
    s.observation = sim::sample_pointcloud(contract, state, cloud.points_per_object,
                                           mix_seed(seed, static_cast<std::uint64_t>(s.anchor_step)), cloud.options);
  }
}

std::uint64_t episode_seed(std::uint64_t run_seed, int task_id, int episode) {
  return mix_seed(mix_seed(run_seed, static_cast<std::uint64_t>(task_id)), static_cast<std::uint64_t>(episode));
}

sim::SceneState feasible_scene(const sim::EnvContract& contract, int task_id, std::uint64_t& seed) {
  for (int retry = 0;; ++retry) {
    try {
      return sim::make_scene(contract, task_id, seed);
    } catch (const Error& err) {
      if (err.code() != Errc::placement_infeasible || retry >= 8) throw;
      seed = mix_seed(seed, 0xfeed);
    }
  }
}

std::vector<TrainingSample> generate_samples(const sim::EnvContract& contract, const GenerationParams& params) {
  std::vector<TrainingSample> out;
  for (int task : params.task_ids) {
    for (int e = 0; e < params.episodes_per_task; ++e) {
      std::uint64_t seed = episode_seed(params.seed, task, e);
      const sim::SceneState scene = feasible_scene(contract, task, seed);
      const sim::Trajectory traj = sim::expert_demo(contract, scene);
      const std::vector<int> keyframes = extract_keyframes(traj, params.keyframes);
      std::vector<TrainingSample> samples = build_training_samples(traj, keyframes, params.horizon);
      attach_observations(samples, traj, contract, params.cloud, seed);
      for (auto& s : samples) {
        s.episode_seed = seed;
        out.push_back(std::move(s));
      }
    }
  }
  return out;
}

}  // namespace mvact::demo
