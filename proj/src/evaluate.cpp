// SPDX-License-Identifier: Apache-2.0
#include "mvact/evaluate.hpp"

#include <algorithm>
#include <cstdio>

#include "mvact/error.hpp"
#include "mvact/parallel.hpp"

namespace mvact::eval {

OraclePolicy::OraclePolicy(sim::EnvContract contract, demo::KeyframeParams keyframes, int horizon)
    : contract_(std::move(contract)), keyframes_(keyframes), horizon_(horizon) {
  if (horizon_ < 1) throw Error(Errc::invalid_argument, "oracle horizon must be >= 1");
}

void OraclePolicy::reset(const sim::SceneState& initial, std::uint64_t) {
  const sim::Trajectory traj = sim::expert_demo(contract_, initial);
  plan_.clear();
  for (int k : demo::extract_keyframes(traj, keyframes_)) plan_.push_back(traj.actions.at(static_cast<std::size_t>(k - 1)));
  cursor_ = 0;
}

std::vector<sim::Action8> OraclePolicy::act(const sim::SceneState& scene) {
  if (cursor_ >= plan_.size()) return {sim::hold_action(scene)};
  const std::size_t n = std::min(plan_.size() - cursor_, static_cast<std::size_t>(horizon_));
  std::vector<sim::Action8> out(plan_.begin() + static_cast<std::ptrdiff_t>(cursor_),
                                plan_.begin() + static_cast<std::ptrdiff_t>(cursor_ + n));
  cursor_ += n;
  return out;
}

ModelPolicy::ModelPolicy(const policy::PolicyNet& net, sim::EnvContract contract, ModelPolicyOptions options)
    : net_(&net), contract_(std::move(contract)), options_(options) {
  views_ = render::cube_views(contract_.workspace_bounds, net.config().resolution);
  grid_.bounds = contract_.workspace_bounds;
  grid_.cells_per_axis = options_.grid_size;
  grid_.validate();
}

void ModelPolicy::reset(const sim::SceneState&, std::uint64_t episode_seed) {
  episode_seed_ = mix_seed(options_.seed, episode_seed);
}

std::vector<sim::Action8> ModelPolicy::act(const sim::SceneState& scene) {
  const sim::PointCloud cloud =
      sim::sample_pointcloud(contract_, scene, options_.cloud.points_per_object,
                             mix_seed(episode_seed_, static_cast<std::uint64_t>(scene.step)), options_.cloud.options);
  std::vector<policy::ViewInput> inputs;
  for (const auto& v : render::render_views(cloud, views_)) inputs.push_back(policy::view_input(v, net_->config().patch_size));
  const PolicyOutput out = net_->predict(inputs, scene.task.instruction);
  return codec::decode_actions(out, views_, grid_, options_.fusion);
}

EpisodeRecord run_episode(const sim::EnvContract& contract, Policy& policy, int task_id, int episode,
                          std::uint64_t seed) {
  EpisodeRecord rec;
  rec.task = contract.instruction_set.at(static_cast<std::size_t>(task_id)).name;
  rec.episode = episode;
  std::uint64_t s = seed;
  sim::SceneState scene = demo::feasible_scene(contract, task_id, s);
  rec.seed = s;
  policy.reset(scene, s);
  bool success = sim::is_success(contract, scene);
  while (!success && rec.env_steps < contract.episode_limit) {
    const std::vector<sim::Action8> chunk = policy.act(scene);
    const int call = rec.inference_calls++;
    for (const auto& a : chunk) {
      scene = sim::step_env(contract, scene, a);
      ++rec.env_steps;
      success = sim::is_success(contract, scene);
      rec.events.push_back({call, rec.env_steps, a, success});
      if (success || rec.env_steps >= contract.episode_limit) break;
    }
    if (chunk.empty()) break;
  }
  rec.success = success;
  return rec;
}

EvalReport evaluate(const sim::EnvContract& contract, const PolicyFactory& make_policy, const EvalOptions& options) {
  if (options.episodes_per_task < 1) throw Error(Errc::invalid_argument, "episodes_per_task must be >= 1");
  if (options.task_ids.empty()) throw Error(Errc::invalid_argument, "no evaluation tasks");
  const std::size_t per = static_cast<std::size_t>(options.episodes_per_task);
  std::vector<EpisodeRecord> records(options.task_ids.size() * per);
  parallel_for(
      records.size(),
      [&](std::size_t i) {
        const int task = options.task_ids[i / per];
        const int ep = static_cast<int>(i % per);
        auto policy = make_policy();
        records[i] = run_episode(contract, *policy, task, ep, demo::episode_seed(options.seed, task, ep));
      },
      options.threads > 0 ? options.threads : worker_count());

  EvalReport report;
  for (std::size_t t = 0; t < options.task_ids.size(); ++t) {
    TaskResult r;
    r.task = contract.instruction_set.at(static_cast<std::size_t>(options.task_ids[t])).name;
    for (std::size_t e = 0; e < per; ++e) {
      const auto& rec = records[t * per + e];
      ++r.episodes;
      r.successes += rec.success ? 1 : 0;
      r.inference_calls += rec.inference_calls;
      r.env_steps += rec.env_steps;
    }
    report.total_inference_calls += r.inference_calls;
    report.total_env_steps += r.env_steps;
    report.episodes_evaluated += r.episodes;
    report.tasks.push_back(r);
  }
  report.episodes = std::move(records);
  return report;
}

void write_report(std::ostream& os, const EvalReport& report) {
  char buf[64];
  for (const auto& t : report.tasks) {
    std::snprintf(buf, sizeof buf, "%.4f", t.success_rate());
    os << "task." << t.task << ".success_rate = " << buf << "\n"
       << "task." << t.task << ".episodes = " << t.episodes << "\n"
       << "task." << t.task << ".successes = " << t.successes << "\n"
       << "task." << t.task << ".inference_calls = " << t.inference_calls << "\n"
       << "task." << t.task << ".env_steps = " << t.env_steps << "\n";
  }
  os << "total.episodes = " << report.episodes_evaluated << "\n"
     << "total.inference_calls = " << report.total_inference_calls << "\n"
     << "total.env_steps = " << report.total_env_steps << "\n";
}

void write_report_csv(std::ostream& os, const EvalReport& report) {
  os << "task,success_rate,episodes,inference_calls,env_steps\n";
  char buf[64];
  for (const auto& t : report.tasks) {
    std::snprintf(buf, sizeof buf, "%.4f", t.success_rate());
    os << t.task << "," << buf << "," << t.episodes << "," << t.inference_calls << "," << t.env_steps << "\n";
  }
}

void write_event_log(std::ostream& os, const EvalReport& report) {
  os << "task,episode,seed,inference,step,x,y,z,qw,qx,qy,qz,gripper_open,collision_allowed,success\n";
  char buf[256];
  for (const auto& e : report.episodes) {
    for (const auto& ev : e.events) {
      const auto& a = ev.action;
      std::snprintf(buf, sizeof buf, "%s,%d,%llu,%d,%d,%.6f,%.6f,%.6f,%.6f,%.6f,%.6f,%.6f,%d,%d,%d\n", e.task.c_str(),
                    e.episode, static_cast<unsigned long long>(e.seed), ev.inference, ev.step, a.position.x(),
                    a.position.y(), a.position.z(), a.rotation.w(), a.rotation.x(), a.rotation.y(), a.rotation.z(),
                    a.gripper_open ? 1 : 0, a.collision_allowed ? 1 : 0, ev.success_after ? 1 : 0);
      os << buf;
    }
  }
}

AdaptReport few_shot_adapt(const policy::PolicyNet& pretrained, const sim::EnvContract& contract,
                           const std::vector<demo::TrainingSample>& new_task_data, const std::vector<int>& new_task_ids,
                           const AdaptOptions& options, std::ostream* log) {
  if (new_task_data.empty()) throw Error(Errc::invalid_argument, "adaptation dataset is empty");
  AdaptReport report;
  for (int id : new_task_ids) {
    const std::string& name = contract.instruction_set.at(static_cast<std::size_t>(id)).name;
    if (std::find(options.pretrain_tasks.begin(), options.pretrain_tasks.end(), name) != options.pretrain_tasks.end()) {
      report.warnings.push_back("task " + name + " was already part of pretraining; adaptation is not few-shot");
    }
  }
  if (log) {
    for (const auto& w : report.warnings) *log << "warning: " << w << "\n";
  }
  const auto views = render::cube_views(contract.workspace_bounds, pretrained.config().resolution);
  EvalOptions eval = options.eval;
  eval.task_ids = new_task_ids;

  const auto run = [&](policy::PolicyNet& net, const std::string& sub) {
    train::TrainOptions t = options.train;
    if (!t.out_dir.empty()) t.out_dir += "/" + sub;
    const auto result = train::train(net, new_task_data, views, t);
    const EvalReport r = evaluate(
        contract, [&] { return std::make_unique<ModelPolicy>(net, contract, options.model); }, eval);
    return std::pair{result.steps_run, r};
  };

  policy::PolicyNet adapted = pretrained;
  std::tie(report.adapted_steps, report.adapted) = run(adapted, "adapted");
  policy::PolicyNet scratch(pretrained.config(), options.scratch_init_seed);
  std::tie(report.scratch_steps, report.scratch) = run(scratch, "scratch");
  if (report.adapted_steps != report.scratch_steps) {
    throw Error(Errc::invalid_argument, "adaptation and control used different step budgets");
  }
  report.adapted_params = adapted.params();
  return report;
}

}  // namespace mvact::eval
