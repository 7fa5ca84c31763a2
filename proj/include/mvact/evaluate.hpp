// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <ostream>
#include <string>
#include <vector>

#include "mvact/codec.hpp"
#include "mvact/demo_data.hpp"
#include "mvact/policy.hpp"
#include "mvact/train.hpp"

namespace mvact::eval {

/// Closed-loop controller: one act() call is one inference.
class Policy {
 public:
  virtual ~Policy() = default;
  virtual void reset(const sim::SceneState& initial, std::uint64_t episode_seed) = 0;
  /// Actions to execute open-loop, in order.
  virtual std::vector<sim::Action8> act(const sim::SceneState& scene) = 0;
};

/// Replays the expert's keyframe actions for the episode, h at a time.
class OraclePolicy : public Policy {
 public:
  OraclePolicy(sim::EnvContract contract, demo::KeyframeParams keyframes, int horizon);
  void reset(const sim::SceneState& initial, std::uint64_t episode_seed) override;
  std::vector<sim::Action8> act(const sim::SceneState& scene) override;

 private:
  sim::EnvContract contract_;
  demo::KeyframeParams keyframes_;
  int horizon_;
  std::vector<sim::Action8> plan_;
  std::size_t cursor_ = 0;
};

struct ModelPolicyOptions {
  demo::CloudParams cloud;
  codec::ViewFusion fusion = codec::ViewFusion::sum;
  int grid_size = 64;
  std::uint64_t seed = 0;  ///< observation sampling seed
};

/// Samples a cloud from the current scene, renders the cube views, runs the
/// network once and decodes all h actions.
class ModelPolicy : public Policy {
 public:
  ModelPolicy(const policy::PolicyNet& net, sim::EnvContract contract, ModelPolicyOptions options);
  void reset(const sim::SceneState& initial, std::uint64_t episode_seed) override;
  std::vector<sim::Action8> act(const sim::SceneState& scene) override;

 private:
  const policy::PolicyNet* net_;
  sim::EnvContract contract_;
  ModelPolicyOptions options_;
  std::vector<render::OrthoView> views_;
  codec::Grid3D grid_;
  std::uint64_t episode_seed_ = 0;
};

struct StepEvent {
  int inference = 0;  ///< 0-based inference call within the episode
  int step = 0;       ///< 1-based executed env step
  sim::Action8 action;
  bool success_after = false;
};

struct EpisodeRecord {
  std::string task;
  int episode = 0;
  std::uint64_t seed = 0;
  int inference_calls = 0;
  int env_steps = 0;
  bool success = false;
  std::vector<StepEvent> events;
};

struct TaskResult {
  std::string task;
  int episodes = 0;
  int successes = 0;
  long inference_calls = 0;
  long env_steps = 0;

  double success_rate() const { return episodes > 0 ? static_cast<double>(successes) / episodes : 0.0; }
};

struct EvalReport {
  std::vector<TaskResult> tasks;
  std::vector<EpisodeRecord> episodes;
  long total_inference_calls = 0;
  long total_env_steps = 0;
  int episodes_evaluated = 0;
};

struct EvalOptions {
  std::vector<int> task_ids;
  int episodes_per_task = 25;
  std::uint64_t seed = 0;
  int threads = 0;
};

using PolicyFactory = std::function<std::unique_ptr<Policy>()>;

/// Episodes run until success or the contract's episode_limit executed steps.
/// A chunk stops as soon as the scene reports success.
EvalReport evaluate(const sim::EnvContract& contract, const PolicyFactory& make_policy, const EvalOptions& options);

EpisodeRecord run_episode(const sim::EnvContract& contract, Policy& policy, int task_id, int episode,
                          std::uint64_t seed);

/// Key-value text report.
void write_report(std::ostream& os, const EvalReport& report);
/// task,success_rate,episodes,inference_calls,env_steps
void write_report_csv(std::ostream& os, const EvalReport& report);
/// One line per executed step.
void write_event_log(std::ostream& os, const EvalReport& report);

struct AdaptOptions {
  train::TrainOptions train;  ///< steps default to 4000
  EvalOptions eval;
  ModelPolicyOptions model;
  std::vector<std::string> pretrain_tasks;
  std::uint64_t scratch_init_seed = 0;
};

struct AdaptReport {
  EvalReport adapted;
  EvalReport scratch;
  long adapted_steps = 0;
  long scratch_steps = 0;
  std::vector<std::string> warnings;
  nn::ParamSet adapted_params;
};

/// Fine-tunes pretrained weights on the new task only, and trains a freshly
/// initialized control with the same budget; both are evaluated on the new task.
AdaptReport few_shot_adapt(const policy::PolicyNet& pretrained, const sim::EnvContract& contract,
                           const std::vector<demo::TrainingSample>& new_task_data, const std::vector<int>& new_task_ids,
                           const AdaptOptions& options, std::ostream* log = nullptr);

}  // namespace mvact::eval
