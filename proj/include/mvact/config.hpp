// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "mvact/codec.hpp"
#include "mvact/demo_data.hpp"
#include "mvact/evaluate.hpp"
#include "mvact/policy.hpp"
#include "mvact/train.hpp"

namespace mvact::config {

struct RunConfig {
  struct Env {
    std::uint64_t seed = 0;
    int episode_limit = 25;
    Vec3 workspace_min{-0.3, -0.3, -0.05};
    Vec3 workspace_max{0.3, 0.3, 0.55};
    double grasp_radius = 0.03;
    double press_radius = 0.01;
    double v_max = 0.05;
    double omega_max = 0.2;
    double min_clearance = 0.04;

    friend bool operator==(const Env&, const Env&) = default;
  } env;
  struct Keyframes {
    double speed_eps = 1e-4;
    int min_gap = 2;
    bool include_final = true;

    friend bool operator==(const Keyframes&, const Keyframes&) = default;
  } keyframes;
  struct Render {
    int resolution = 128;

    friend bool operator==(const Render&, const Render&) = default;
  } render;
  struct Codec {
    int grid_size = 64;
    double sigma_px = 1.5;
    std::string fusion = "sum";

    friend bool operator==(const Codec&, const Codec&) = default;
  } codec;
  struct Model {
    int patch_size = 8;
    int embed_dim = 64;
    int encoder_layers = 2;
    int viewwise_layers = 1;
    int crossview_layers = 1;
    int heads = 4;
    int mlp_ratio = 2;
    int lora_rank = 4;
    int horizon = 5;

    friend bool operator==(const Model&, const Model&) = default;
  } model;
  struct Optim {
    double lr = 4e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-6;
    double weight_decay = 0.01;
    int batch_size = 10;
    long steps = 2000;
    long warmup_steps = 2000;
    bool scale_warmup = true;
    long reference_steps = 60000;
    int log_every = 10;
    long checkpoint_every = 0;

    friend bool operator==(const Optim&, const Optim&) = default;
  } optim;
  struct Eval {
    std::vector<std::string> tasks{"reach-block"};
    int episodes_per_task = 25;
    std::uint64_t seed_offset = 1000;

    friend bool operator==(const Eval&, const Eval&) = default;
  } eval;
  struct Data {
    std::vector<std::string> tasks{"reach-block"};
    int episodes_per_task = 50;
    int points_per_object = 400;
    int table_points = 4000;
    bool include_gripper = true;

    friend bool operator==(const Data&, const Data&) = default;
  } data;
  struct Adapt {
    long steps = 4000;
    std::uint64_t scratch_seed = 1;

    friend bool operator==(const Adapt&, const Adapt&) = default;
  } adapt;

  /// Cross-field checks; throws config_constraint naming the keys involved.
  void validate() const;

  sim::EnvContract contract() const;
  demo::KeyframeParams keyframe_params() const;
  demo::CloudParams cloud_params() const;
  policy::PolicyConfig policy_config() const;
  codec::ViewFusion view_fusion() const;
  /// Warmup after optional rescaling to the run's step budget.
  long effective_warmup(long steps) const;
  train::TrainOptions train_options(long steps) const;
  eval::ModelPolicyOptions model_policy_options() const;

  friend bool operator==(const RunConfig&, const RunConfig&) = default;
};

/// Parses `key = value` lines; `#` starts a comment. Absent keys keep defaults.
RunConfig parse_config(const std::string& text, const std::string& origin = "<config>");
RunConfig load_config(const std::string& path);

/// Every key, one per line, in schema order; parse_config(serialize(c)) == c.
std::string serialize(const RunConfig& config);

struct KeyInfo {
  std::string key;
  std::string type;
  std::string default_value;
  std::string doc;
};

const std::vector<KeyInfo>& schema();

/// Resolves a task name to its template id; unsupported_task if unknown.
int task_id(const sim::EnvContract& contract, const std::string& name);

}  // namespace mvact::config
