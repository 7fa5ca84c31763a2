// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "mvact/demo_data.hpp"
#include "mvact/policy.hpp"

namespace mvact::inspect {

struct InspectOptions {
  std::vector<int> task_ids;
  int episodes_per_task = 1;
  std::uint64_t seed = 0;
  int resolution = 32;
  int horizon = 5;
  double sigma_px = 1.5;
  demo::KeyframeParams keyframes;
  demo::CloudParams cloud;
};

struct EpisodeSmoothness {
  std::string task;
  int episode = 0;
  std::uint64_t seed = 0;
  int steps = 0;
  int keyframes = 0;
  sim::SmoothnessStats stats;
};

struct InspectReport {
  std::vector<EpisodeSmoothness> episodes;
  double max_position_shift = 0.0;
  double max_angle_shift = 0.0;
  bool within_limits = true;  ///< every adjacent shift <= v_max / omega_max
  std::vector<std::string> files;
};

/// Writes, per episode, the first sample's rendered views and heatmap targets,
/// attention maps when `net` is given, plus smoothness.csv and summary.txt.
InspectReport run_inspect(const sim::EnvContract& contract, const InspectOptions& options,
                          const policy::PolicyNet* net, const std::filesystem::path& out_dir);

}  // namespace mvact::inspect
