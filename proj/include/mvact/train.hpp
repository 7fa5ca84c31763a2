// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "mvact/demo_data.hpp"
#include "mvact/optim.hpp"
#include "mvact/policy.hpp"

namespace mvact::train {

struct TrainOptions {
  long steps = 2000;
  int batch_size = 10;
  long warmup_steps = 67;
  optim::LambHyper hyper;
  int log_every = 10;
  long checkpoint_every = 0;  ///< 0 writes only the final checkpoint
  double sigma_px = 1.5;
  std::uint64_t seed = 0;
  int threads = 0;  ///< 0 means worker_count()
  std::string out_dir;  ///< empty keeps everything in memory
  std::vector<std::string> tasks;  ///< recorded in the checkpoint sidecar
};

struct MetricsRow {
  long step = 0;
  double loss = 0.0;
  double lr = 0.0;
};

struct TrainResult {
  std::vector<MetricsRow> metrics;  ///< every logged step
  std::vector<double> losses;       ///< every step's batch loss
  long steps_run = 0;
  std::string checkpoint_path;
};

/// Network inputs and targets for one sample, rendered from its stored cloud.
struct PreparedSample {
  std::vector<policy::ViewInput> views;
  codec::HeatmapTargets targets;
  sim::Instruction instruction;
};

PreparedSample prepare_sample(const demo::TrainingSample& sample, const std::vector<render::OrthoView>& views,
                              int patch_size, double sigma_px);

/// Mean batch loss and its gradient, accumulated over samples in index order.
double batch_gradient(const policy::PolicyNet& net, const std::vector<const PreparedSample*>& batch,
                      std::vector<nn::Tensor>& grads, int threads);

/// Shuffled mini-batch LAMB training. Steps draw consecutive slices of a
/// seeded permutation, reshuffled per epoch.
TrainResult train(policy::PolicyNet& net, const std::vector<demo::TrainingSample>& data,
                  const std::vector<render::OrthoView>& views, const TrainOptions& options);

/// Header plus one line per row.
void write_metrics_csv(const std::string& path, const std::vector<MetricsRow>& rows);

/// Text sidecar next to a checkpoint: pretraining tasks and model shape.
struct CheckpointMeta {
  std::vector<std::string> tasks;
  policy::PolicyConfig model;
  long steps = 0;
};

void write_checkpoint_meta(const std::string& path, const CheckpointMeta& meta);
CheckpointMeta read_checkpoint_meta(const std::string& path);

/// Restores a checkpoint into a network built from `config`; shapes must match.
void load_into(policy::PolicyNet& net, const std::string& checkpoint_path);

}  // namespace mvact::train
