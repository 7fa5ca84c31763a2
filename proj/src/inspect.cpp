// SPDX-License-Identifier: Apache-2.0
#include "mvact/inspect.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>

#include "mvact/codec.hpp"
#include "mvact/error.hpp"
#include "mvact/image_io.hpp"
#include "mvact/render.hpp"
#include "mvact/train.hpp"

namespace mvact::inspect {

namespace {

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.9g", v);
  return buf;
}

std::string sanitize(std::string s) {
  std::replace(s.begin(), s.end(), '.', '_');
  return s;
}

}  // namespace

InspectReport run_inspect(const sim::EnvContract& contract, const InspectOptions& options,
                          const policy::PolicyNet* net, const std::filesystem::path& out_dir) {
  if (options.task_ids.empty()) throw Error(Errc::invalid_argument, "inspect needs at least one task");
  if (options.episodes_per_task < 1) throw Error(Errc::invalid_argument, "episodes_per_task must be >= 1");
  std::filesystem::create_directories(out_dir);
  const auto views = render::cube_views(contract.workspace_bounds, options.resolution);
  const int patch = net ? net->config().patch_size : options.resolution;

  InspectReport report;
  std::ofstream csv(out_dir / "smoothness.csv");
  if (!csv) throw Error(Errc::io_failure, "cannot write " + (out_dir / "smoothness.csv").string());
  csv << "task,episode,step,position_shift,angle_shift,keyframe\n";
  report.files.push_back((out_dir / "smoothness.csv").string());

  for (int task : options.task_ids) {
    const std::string& task_name = contract.instruction_set.at(static_cast<std::size_t>(task)).name;
    for (int e = 0; e < options.episodes_per_task; ++e) {
      std::uint64_t seed = demo::episode_seed(options.seed, task, e);
      const sim::SceneState scene = demo::feasible_scene(contract, task, seed);
      const sim::Trajectory traj = sim::expert_demo(contract, scene);
      const std::vector<int> keyframes = demo::extract_keyframes(traj, options.keyframes);

      EpisodeSmoothness ep;
      ep.task = task_name;
      ep.episode = e;
      ep.seed = seed;
      ep.steps = static_cast<int>(traj.steps.size());
      ep.keyframes = static_cast<int>(keyframes.size());
      ep.stats = sim::smoothness_stats(traj, keyframes);
      for (std::size_t t = 0; t < ep.stats.position_shift.size(); ++t) {
        const bool key = std::binary_search(keyframes.begin(), keyframes.end(), static_cast<int>(t + 1));
        csv << task_name << ',' << e << ',' << t + 1 << ',' << fmt(ep.stats.position_shift[t]) << ','
            << fmt(ep.stats.angle_shift[t]) << ',' << (key ? 1 : 0) << '\n';
      }
      report.max_position_shift = std::max(report.max_position_shift, ep.stats.max_position_shift);
      report.max_angle_shift = std::max(report.max_angle_shift, ep.stats.max_angle_shift);
      if (ep.stats.max_position_shift > contract.v_max + 1e-12 ||
          ep.stats.max_angle_shift > contract.omega_max + 1e-12) {
        report.within_limits = false;
      }

      std::vector<demo::TrainingSample> samples = demo::build_training_samples(traj, keyframes, options.horizon);
      if (samples.empty()) {
        report.episodes.push_back(std::move(ep));
        continue;
      }
      samples.resize(1);
      demo::attach_observations(samples, traj, contract, options.cloud, seed);
      const auto rendered = render::render_views(samples[0].observation, views);
      const auto dir = out_dir / (task_name + "_ep" + std::to_string(e));
      std::filesystem::create_directories(dir);
      for (const auto& v : rendered) {
        const auto path = (dir / ("view_" + v.view.name + ".ppm")).string();
        render::write_ppm(path, v);
        report.files.push_back(path);
      }
      const codec::HeatmapTargets targets = codec::encode_targets(samples[0], views, options.sigma_px);
      for (std::size_t v = 0; v < views.size(); ++v) {
        for (int k = 0; k < samples[0].horizon(); ++k) {
          if (!samples[0].valid_mask[static_cast<std::size_t>(k)]) continue;
          const auto path = (dir / ("target_" + views[v].name + "_k" + std::to_string(k) + ".ppm")).string();
          heat_image(targets.maps[v].row(k).transpose(), options.resolution, options.resolution).write_ppm(path);
          report.files.push_back(path);
        }
      }
      if (net) {
        const train::PreparedSample prep = train::prepare_sample(samples[0], views, patch, options.sigma_px);
        policy::ForwardOptions fo;
        fo.record_attention = true;
        const PolicyOutput out = net->predict(prep.views, prep.instruction, fo);
        for (const auto& map : out.attention_maps) {
          const auto path = (dir / ("attn_" + sanitize(map.label) + ".ppm")).string();
          const Eigen::VectorXd flat = Eigen::Map<const Eigen::VectorXd>(map.weights.data(), map.weights.size());
          heat_image(flat, static_cast<int>(map.weights.rows()), static_cast<int>(map.weights.cols())).write_ppm(path);
          report.files.push_back(path);
        }
      }
      report.episodes.push_back(std::move(ep));
    }
  }

  std::ofstream summary(out_dir / "summary.txt");
  if (!summary) throw Error(Errc::io_failure, "cannot write " + (out_dir / "summary.txt").string());
  summary << "v_max = " << fmt(contract.v_max) << "\nomega_max = " << fmt(contract.omega_max) << '\n';
  for (const auto& ep : report.episodes) {
    summary << ep.task << " ep" << ep.episode << " seed=" << ep.seed << " steps=" << ep.steps
            << " keyframes=" << ep.keyframes << " max_pos=" << fmt(ep.stats.max_position_shift)
            << " mean_pos=" << fmt(ep.stats.mean_position_shift) << " max_ang=" << fmt(ep.stats.max_angle_shift)
            << " mean_ang=" << fmt(ep.stats.mean_angle_shift) << '\n';
  }
  summary << "max_position_shift = " << fmt(report.max_position_shift) << '\n'
          << "max_angle_shift = " << fmt(report.max_angle_shift) << '\n'
          << "within_limits = " << (report.within_limits ? "true" : "false") << '\n';
  report.files.push_back((out_dir / "summary.txt").string());
  return report;
}

}  // namespace mvact::inspect
