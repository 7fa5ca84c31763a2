// SPDX-License-Identifier: Apache-2.0
#include "mvact/cli.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <optional>

#include "mvact/config.hpp"
#include "mvact/dataset.hpp"
#include "mvact/error.hpp"
#include "mvact/evaluate.hpp"
#include "mvact/inspect.hpp"
#include "mvact/nn/gradcheck.hpp"
#include "mvact/render.hpp"
#include "mvact/train.hpp"

namespace mvact::cli {

namespace fs = std::filesystem;

namespace {

struct Flags {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out = "out";
  std::optional<long> steps;
  std::optional<int> episodes;
  std::vector<std::string> tasks;
  std::optional<int> horizon;
  std::string data;
  std::string checkpoint;
};

struct ValidationFailure : std::runtime_error {
  using std::runtime_error::runtime_error;
};

bool is_validation(Errc c) {
  return c == Errc::config_unknown_key || c == Errc::config_type_mismatch || c == Errc::config_constraint ||
         c == Errc::unsupported_task;
}

std::string utc_now() {
  const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

std::vector<int> task_ids(const sim::EnvContract& contract, const std::vector<std::string>& names) {
  std::vector<int> ids;
  for (const auto& n : names) ids.push_back(config::task_id(contract, n));
  return ids;
}

void require(bool ok, const std::string& what) {
  if (!ok) throw ValidationFailure(what);
}

// Applies command-line overrides; `steps_key` and the list fields differ per command.
config::RunConfig resolve(const Flags& f, const std::string& command) {
  config::RunConfig c = f.config.empty() ? config::RunConfig{} : config::load_config(f.config);
  if (f.seed) c.env.seed = *f.seed;
  if (f.horizon) c.model.horizon = *f.horizon;
  if (f.steps) (command == "adapt" ? c.adapt.steps : c.optim.steps) = *f.steps;
  if (f.episodes) {
    if (command == "gen-data" || command == "train") {
      c.data.episodes_per_task = *f.episodes;
    } else {
      c.eval.episodes_per_task = *f.episodes;
    }
  }
  if (!f.tasks.empty()) {
    if (command == "eval") {
      c.eval.tasks = f.tasks;
    } else if (command == "adapt") {
      c.data.tasks = f.tasks;
      c.eval.tasks = f.tasks;
    } else {
      c.data.tasks = f.tasks;
    }
  }
  c.validate();
  return c;
}

demo::GenerationParams generation_params(const config::RunConfig& c, const sim::EnvContract& contract, int horizon) {
  demo::GenerationParams g;
  g.task_ids = task_ids(contract, c.data.tasks);
  g.episodes_per_task = c.data.episodes_per_task;
  g.horizon = horizon;
  g.seed = c.env.seed;
  g.keyframes = c.keyframe_params();
  g.cloud = c.cloud_params();
  return g;
}

// Reads --data when given, otherwise generates from the data section.
demo::Dataset obtain_data(const Flags& f, const config::RunConfig& c, const sim::EnvContract& contract, int horizon) {
  if (!f.data.empty()) {
    demo::Dataset d = demo::read_dataset(f.data);
    require(d.info.horizon == horizon, "dataset horizon " + std::to_string(d.info.horizon) +
                                           " does not match model.horizon " + std::to_string(horizon));
    return d;
  }
  demo::Dataset d;
  d.info.horizon = horizon;
  d.info.seed = c.env.seed;
  d.info.tasks = c.data.tasks;
  d.samples = demo::generate_samples(contract, generation_params(c, contract, horizon));
  return d;
}

policy::PolicyNet load_net(const std::string& checkpoint, train::CheckpointMeta* meta_out = nullptr) {
  require(!checkpoint.empty(), "--checkpoint is required");
  const train::CheckpointMeta meta = train::read_checkpoint_meta(checkpoint + ".meta");
  policy::PolicyNet net(meta.model, 0);
  train::load_into(net, checkpoint);
  if (meta_out) *meta_out = meta;
  return net;
}

eval::EvalOptions eval_options(const config::RunConfig& c, const sim::EnvContract& contract) {
  eval::EvalOptions e;
  e.task_ids = task_ids(contract, c.eval.tasks);
  e.episodes_per_task = c.eval.episodes_per_task;
  e.seed = c.env.seed + c.eval.seed_offset;
  return e;
}

void write_reports(const fs::path& dir, const eval::EvalReport& report) {
  fs::create_directories(dir);
  std::ofstream txt(dir / "report.txt"), csv(dir / "report.csv"), events(dir / "events.csv");
  if (!txt || !csv || !events) throw Error(Errc::io_failure, "cannot write reports under " + dir.string());
  eval::write_report(txt, report);
  eval::write_report_csv(csv, report);
  eval::write_event_log(events, report);
}

int cmd_gen_data(const Flags& f, std::ostream& out) {
  const config::RunConfig c = resolve(f, "gen-data");
  const sim::EnvContract contract = c.contract();
  demo::Dataset d;
  d.info.horizon = c.model.horizon;
  d.info.seed = c.env.seed;
  d.info.tasks = c.data.tasks;
  d.info.created = utc_now();
  d.samples = demo::generate_samples(contract, generation_params(c, contract, c.model.horizon));
  demo::write_dataset(f.out, d);
  out << "wrote " << d.samples.size() << " samples to " << f.out << "\n";
  return kExitOk;
}

int cmd_train(const Flags& f, std::ostream& out) {
  const config::RunConfig c = resolve(f, "train");
  const sim::EnvContract contract = c.contract();
  const demo::Dataset d = obtain_data(f, c, contract, c.model.horizon);
  policy::PolicyNet net(c.policy_config(), c.env.seed);
  train::TrainOptions t = c.train_options(c.optim.steps);
  t.out_dir = f.out;
  t.tasks = d.info.tasks;
  const auto views = render::cube_views(contract.workspace_bounds, c.render.resolution);
  const train::TrainResult r = train::train(net, d.samples, views, t);
  char buf[96];
  std::snprintf(buf, sizeof buf, "steps %ld final loss %.6g\n", r.steps_run,
                r.losses.empty() ? 0.0 : r.losses.back());
  out << buf << "checkpoint " << r.checkpoint_path << "\n";
  return kExitOk;
}

int cmd_eval(const Flags& f, std::ostream& out) {
  const config::RunConfig c = resolve(f, "eval");
  const sim::EnvContract contract = c.contract();
  const policy::PolicyNet net = load_net(f.checkpoint);
  const eval::ModelPolicyOptions mo = c.model_policy_options();
  const eval::EvalReport report = eval::evaluate(
      contract, [&] { return std::make_unique<eval::ModelPolicy>(net, contract, mo); }, eval_options(c, contract));
  write_reports(f.out, report);
  eval::write_report(out, report);
  return kExitOk;
}

int cmd_adapt(const Flags& f, std::ostream& out, std::ostream& err) {
  const config::RunConfig c = resolve(f, "adapt");
  const sim::EnvContract contract = c.contract();
  train::CheckpointMeta meta;
  const policy::PolicyNet pretrained = load_net(f.checkpoint, &meta);
  const demo::Dataset d = obtain_data(f, c, contract, meta.model.horizon);
  eval::AdaptOptions a;
  a.train = c.train_options(c.adapt.steps);
  a.train.out_dir = f.out;
  a.train.tasks = d.info.tasks;
  a.eval = eval_options(c, contract);
  a.model = c.model_policy_options();
  a.pretrain_tasks = meta.tasks;
  a.scratch_init_seed = c.adapt.scratch_seed;
  const eval::AdaptReport r = eval::few_shot_adapt(pretrained, contract, d.samples, task_ids(contract, d.info.tasks), a, &err);
  write_reports(fs::path(f.out) / "adapted", r.adapted);
  write_reports(fs::path(f.out) / "scratch", r.scratch);
  out << "adapted:\n";
  eval::write_report(out, r.adapted);
  out << "scratch:\n";
  eval::write_report(out, r.scratch);
  return kExitOk;
}

int cmd_inspect(const Flags& f, std::ostream& out) {
  const config::RunConfig c = resolve(f, "inspect");
  const sim::EnvContract contract = c.contract();
  std::optional<policy::PolicyNet> net;
  if (!f.checkpoint.empty()) net.emplace(load_net(f.checkpoint));
  inspect::InspectOptions o;
  o.task_ids = task_ids(contract, c.data.tasks);
  o.episodes_per_task = f.episodes.value_or(1);
  o.seed = c.env.seed;
  o.resolution = net ? net->config().resolution : c.render.resolution;
  o.horizon = net ? net->config().horizon : c.model.horizon;
  o.sigma_px = c.codec.sigma_px;
  o.keyframes = c.keyframe_params();
  o.cloud = c.cloud_params();
  const inspect::InspectReport r = inspect::run_inspect(contract, o, net ? &*net : nullptr, f.out);
  std::ifstream summary(fs::path(f.out) / "summary.txt");
  out << summary.rdbuf();
  out << "wrote " << r.files.size() << " files to " << f.out << "\n";
  return r.within_limits ? kExitOk : kExitValidation;
}

int cmd_grad_check(const Flags& f, std::ostream& out) {
  const config::RunConfig c = resolve(f, "grad-check");
  bool ok = true;
  double worst = 0.0;
  char buf[128];
  for (const auto& r : nn::primitive_gradient_suite(c.env.seed)) {
    std::snprintf(buf, sizeof buf, "%-32s cases %d max_rel_error %.3e\n", r.name.c_str(), r.cases,
                  r.max_relative_error);
    out << buf;
    worst = std::max(worst, r.max_relative_error);
    ok = ok && r.max_relative_error < 1e-4;
  }
  std::snprintf(buf, sizeof buf, "primitives max_rel_error %.3e\n", worst);
  out << buf;
  const policy::EndToEndCheck e2e = policy::end_to_end_gradient_check(policy::gradcheck_config(), c.env.seed, 1e-4);
  std::snprintf(buf, sizeof buf, "end_to_end values %ld max_rel_error %.3e (worst %s)\n",
                static_cast<long>(e2e.checked_values), e2e.max_relative_error, e2e.worst_parameter.c_str());
  out << buf;
  ok = ok && e2e.max_relative_error < 1e-3;
  out << (ok ? "grad-check passed\n" : "grad-check FAILED\n");
  return ok ? kExitOk : kExitValidation;
}

}  // namespace

std::string config_key_table() {
  std::size_t kw = 0, dw = 0;
  for (const auto& k : config::schema()) {
    kw = std::max(kw, k.key.size());
    dw = std::max(dw, k.default_value.size());
  }
  std::string s;
  for (const auto& k : config::schema()) {
    std::string line = "  " + k.key + std::string(kw - k.key.size() + 2, ' ') + k.default_value +
                       std::string(dw - k.default_value.size() + 2, ' ') + "[" + k.type + "] " + k.doc;
    s += line + "\n";
  }
  return s;
}

int run_command(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Multi-view action chunking policy toolkit", "mvact"};
  app.fallthrough();
  app.require_subcommand(1);
  app.footer("Config keys (key, default, type):\n" + config_key_table() +
             "\nExit codes: 0 success, 1 validation failure, 2 runtime error, 64 usage error.\n"
             "MVACT_THREADS caps worker threads.");
  Flags f;
  app.add_option("--config", f.config, "config file of key = value lines");
  app.add_option("--seed", f.seed, "overrides env.seed");
  app.add_option("--out", f.out, "output directory")->capture_default_str();
  app.add_option("--steps", f.steps, "overrides optim.steps, or adapt.steps for adapt");
  app.add_option("--episodes", f.episodes, "episodes per task (data for gen-data/train, eval otherwise)");
  app.add_option("--task", f.tasks, "task name; repeatable")->delimiter(',');
  app.add_option("--horizon", f.horizon, "overrides model.horizon");
  app.add_option("--data", f.data, "dataset directory written by gen-data");
  app.add_option("--checkpoint", f.checkpoint, "checkpoint.bin written by train");

  std::string command;
  const std::vector<std::pair<std::string, std::string>> subs = {
      {"gen-data", "generate expert demonstrations into --out"},
      {"train", "train a policy on --data (or freshly generated data)"},
      {"eval", "evaluate --checkpoint on eval.tasks"},
      {"adapt", "adapt --checkpoint to --task and compare against training from scratch"},
      {"inspect", "dump views, heatmap targets, attention maps and smoothness stats"},
      {"grad-check", "finite-difference check of every primitive and the toy policy"},
  };
  for (const auto& [name, desc] : subs) {
    app.add_subcommand(name, desc)->callback([&command, n = name] { command = n; });
  }

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n" << app.help("", CLI::AppFormatMode::Normal);
    return kExitUsage;
  }

  try {
    if (command == "gen-data") return cmd_gen_data(f, out);
    if (command == "train") return cmd_train(f, out);
    if (command == "eval") return cmd_eval(f, out);
    if (command == "adapt") return cmd_adapt(f, out, err);
    if (command == "inspect") return cmd_inspect(f, out);
    return cmd_grad_check(f, out);
  } catch (const ValidationFailure& e) {
    err << "error: " << e.what() << "\n";
    return kExitValidation;
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return is_validation(e.code()) ? kExitValidation : kExitRuntime;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
}

}  // namespace mvact::cli
