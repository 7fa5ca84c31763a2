// SPDX-License-Identifier: Apache-2.0
#include "mvact/config.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <functional>
#include <set>
#include <sstream>

#include "mvact/error.hpp"

namespace mvact::config {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, sep)) out.push_back(trim(item));
  return out;
}

[[noreturn]] void type_error(const std::string& key, const std::string& expected, const std::string& text) {
  throw Error(Errc::config_type_mismatch, "key '" + key + "' expects " + expected + ", got '" + text + "'");
}

template <typename T>
void parse_integer(const std::string& key, const std::string& text, T& out) {
  T v{};
  const auto* end = text.data() + text.size();
  const auto [p, ec] = std::from_chars(text.data(), end, v);
  if (ec != std::errc() || p != end) type_error(key, "an integer", text);
  out = v;
}

void parse_value(const std::string& key, const std::string& text, int& out) { parse_integer(key, text, out); }
void parse_value(const std::string& key, const std::string& text, long& out) { parse_integer(key, text, out); }
void parse_value(const std::string& key, const std::string& text, std::uint64_t& out) {
  parse_integer(key, text, out);
}

void parse_value(const std::string& key, const std::string& text, double& out) {
  double v = 0.0;
  const auto* end = text.data() + text.size();
  const auto [p, ec] = std::from_chars(text.data(), end, v);
  if (ec != std::errc() || p != end || !std::isfinite(v)) type_error(key, "a finite real number", text);
  out = v;
}

void parse_value(const std::string& key, const std::string& text, bool& out) {
  if (text == "true" || text == "1") {
    out = true;
  } else if (text == "false" || text == "0") {
    out = false;
  } else {
    type_error(key, "true or false", text);
  }
}

void parse_value(const std::string&, const std::string& text, std::string& out) { out = text; }

void parse_value(const std::string& key, const std::string& text, Vec3& out) {
  const auto parts = split(text, ',');
  if (parts.size() != 3) type_error(key, "three comma-separated numbers", text);
  for (int i = 0; i < 3; ++i) parse_value(key, parts[static_cast<std::size_t>(i)], out(i));
}

void parse_value(const std::string& key, const std::string& text, std::vector<std::string>& out) {
  std::vector<std::string> items;
  for (auto& item : split(text, ',')) {
    if (item.empty()) type_error(key, "a comma-separated list of names", text);
    items.push_back(item);
  }
  if (items.empty()) type_error(key, "a non-empty list", text);
  out = std::move(items);
}

std::string format_value(int v) { return std::to_string(v); }
std::string format_value(long v) { return std::to_string(v); }
std::string format_value(std::uint64_t v) { return std::to_string(v); }
std::string format_value(bool v) { return v ? "true" : "false"; }
std::string format_value(const std::string& v) { return v; }

std::string format_value(double v) {
  char buf[64];
  const auto [p, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, p);
}

std::string format_value(const Vec3& v) {
  return format_value(v.x()) + "," + format_value(v.y()) + "," + format_value(v.z());
}

std::string format_value(const std::vector<std::string>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + v[i];
  return s;
}

template <typename T>
constexpr const char* type_name() {
  if constexpr (std::is_same_v<T, int> || std::is_same_v<T, long> || std::is_same_v<T, std::uint64_t>) {
    return "int";
  } else if constexpr (std::is_same_v<T, double>) {
    return "real";
  } else if constexpr (std::is_same_v<T, bool>) {
    return "bool";
  } else if constexpr (std::is_same_v<T, Vec3>) {
    return "vec3";
  } else if constexpr (std::is_same_v<T, std::vector<std::string>>) {
    return "list";
  } else {
    return "string";
  }
}

struct Field {
  KeyInfo info;
  std::function<std::string(const RunConfig&)> get;
  std::function<void(RunConfig&, const std::string&)> set;
};

template <typename Access>
Field field(const std::string& key, const std::string& doc, Access access) {
  using T = std::remove_reference_t<decltype(access(std::declval<RunConfig&>()))>;
  Field f;
  f.info = {key, type_name<T>(), "", doc};
  f.get = [access](const RunConfig& c) { return format_value(access(const_cast<RunConfig&>(c))); };
  f.set = [access, key](RunConfig& c, const std::string& text) { parse_value(key, text, access(c)); };
  f.info.default_value = f.get(RunConfig{});
  return f;
}

#define MVACT_FIELD(key, member, doc) field(key, doc, [](RunConfig& c) -> auto& { return c.member; })

const std::vector<Field>& fields() {
  static const std::vector<Field> all = {
      MVACT_FIELD("env.seed", env.seed, "base seed; --seed overrides"),
      MVACT_FIELD("env.episode_limit", env.episode_limit, "executed steps before an episode fails"),
      MVACT_FIELD("env.workspace_min", env.workspace_min, "workspace lower corner (m)"),
      MVACT_FIELD("env.workspace_max", env.workspace_max, "workspace upper corner (m)"),
      MVACT_FIELD("env.grasp_radius", env.grasp_radius, "max gripper-to-block distance for a grasp (m)"),
      MVACT_FIELD("env.press_radius", env.press_radius, "max gripper-to-button distance for a press (m)"),
      MVACT_FIELD("env.v_max", env.v_max, "expert translation per step (m)"),
      MVACT_FIELD("env.omega_max", env.omega_max, "expert rotation per step (rad)"),
      MVACT_FIELD("env.min_clearance", env.min_clearance, "min gap between object footprints (m)"),
      MVACT_FIELD("keyframes.speed_eps", keyframes.speed_eps, "pause threshold (m/step)"),
      MVACT_FIELD("keyframes.min_gap", keyframes.min_gap, "min steps between keyframes"),
      MVACT_FIELD("keyframes.include_final", keyframes.include_final, "always keep the last step"),
      MVACT_FIELD("render.resolution", render.resolution, "virtual view size (px)"),
      MVACT_FIELD("codec.grid_size", codec.grid_size, "decode grid cells per axis"),
      MVACT_FIELD("codec.sigma_px", codec.sigma_px, "target heatmap std (px)"),
      MVACT_FIELD("codec.fusion", codec.fusion, "view score fusion: sum or product"),
      MVACT_FIELD("model.patch_size", model.patch_size, "patch side (px)"),
      MVACT_FIELD("model.embed_dim", model.embed_dim, "token width"),
      MVACT_FIELD("model.encoder_layers", model.encoder_layers, "frozen encoder blocks"),
      MVACT_FIELD("model.viewwise_layers", model.viewwise_layers, "per-view attention blocks"),
      MVACT_FIELD("model.crossview_layers", model.crossview_layers, "joint attention blocks"),
      MVACT_FIELD("model.heads", model.heads, "attention heads"),
      MVACT_FIELD("model.mlp_ratio", model.mlp_ratio, "MLP hidden width / token width"),
      MVACT_FIELD("model.lora_rank", model.lora_rank, "adapter rank"),
      MVACT_FIELD("model.horizon", model.horizon, "actions per inference"),
      MVACT_FIELD("optim.lr", optim.lr, "peak learning rate"),
      MVACT_FIELD("optim.beta1", optim.beta1, "first moment decay"),
      MVACT_FIELD("optim.beta2", optim.beta2, "second moment decay"),
      MVACT_FIELD("optim.eps", optim.eps, "moment denominator epsilon"),
      MVACT_FIELD("optim.weight_decay", optim.weight_decay, "decoupled weight decay"),
      MVACT_FIELD("optim.batch_size", optim.batch_size, "samples per step"),
      MVACT_FIELD("optim.steps", optim.steps, "training steps; --steps overrides"),
      MVACT_FIELD("optim.warmup_steps", optim.warmup_steps, "warmup length at the reference budget"),
      MVACT_FIELD("optim.scale_warmup", optim.scale_warmup, "scale warmup by steps / reference_steps"),
      MVACT_FIELD("optim.reference_steps", optim.reference_steps, "budget warmup_steps refers to"),
      MVACT_FIELD("optim.log_every", optim.log_every, "metrics row interval (steps)"),
      MVACT_FIELD("optim.checkpoint_every", optim.checkpoint_every, "checkpoint interval; 0 = final only"),
      MVACT_FIELD("eval.tasks", eval.tasks, "tasks to evaluate; --task overrides"),
      MVACT_FIELD("eval.episodes_per_task", eval.episodes_per_task, "episodes per task; --episodes overrides"),
      MVACT_FIELD("eval.seed_offset", eval.seed_offset, "added to the seed for evaluation scenes"),
      MVACT_FIELD("data.tasks", data.tasks, "tasks to generate; --task overrides"),
      MVACT_FIELD("data.episodes_per_task", data.episodes_per_task, "demonstrations per task"),
      MVACT_FIELD("data.points_per_object", data.points_per_object, "cloud points per object"),
      MVACT_FIELD("data.table_points", data.table_points, "cloud points on the table"),
      MVACT_FIELD("data.include_gripper", data.include_gripper, "include gripper points in clouds"),
      MVACT_FIELD("adapt.steps", adapt.steps, "adaptation and control budget; --steps overrides"),
      MVACT_FIELD("adapt.scratch_seed", adapt.scratch_seed, "init seed of the from-scratch control"),
  };
  return all;
}

#undef MVACT_FIELD

void constraint(bool ok, const std::string& what) {
  if (!ok) throw Error(Errc::config_constraint, what);
}

}  // namespace

const std::vector<KeyInfo>& schema() {
  static const std::vector<KeyInfo> keys = [] {
    std::vector<KeyInfo> k;
    for (const auto& f : fields()) k.push_back(f.info);
    return k;
  }();
  return keys;
}

RunConfig parse_config(const std::string& text, const std::string& origin) {
  RunConfig c;
  std::set<std::string> seen;
  std::istringstream is(text);
  std::string raw;
  int lineno = 0;
  while (std::getline(is, raw)) {
    ++lineno;
    const std::string line = trim(raw.substr(0, raw.find('#')));
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw Error(Errc::config_type_mismatch, origin + ":" + std::to_string(lineno) + ": expected 'key = value'");
    }
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    const Field* f = nullptr;
    for (const auto& cand : fields()) {
      if (cand.info.key == key) f = &cand;
    }
    if (!f) throw Error(Errc::config_unknown_key, origin + ":" + std::to_string(lineno) + ": unknown key '" + key + "'");
    if (!seen.insert(key).second) {
      throw Error(Errc::config_constraint, origin + ":" + std::to_string(lineno) + ": key '" + key + "' set twice");
    }
    f->set(c, value);
  }
  c.validate();
  return c;
}

RunConfig load_config(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw Error(Errc::io_failure, "cannot open config " + path);
  std::stringstream ss;
  ss << is.rdbuf();
  return parse_config(ss.str(), path);
}

std::string serialize(const RunConfig& config) {
  std::string out;
  for (const auto& f : fields()) out += f.info.key + " = " + f.get(config) + "\n";
  return out;
}

int task_id(const sim::EnvContract& contract, const std::string& name) {
  const int id = contract.template_index(name);
  if (id < 0) throw Error(Errc::unsupported_task, "unknown task '" + name + "'");
  return id;
}

void RunConfig::validate() const {
  constraint(env.episode_limit >= 1, "env.episode_limit must be >= 1");
  constraint((env.workspace_min.array() < env.workspace_max.array()).all(),
             "env.workspace_min must be below env.workspace_max on every axis");
  constraint(env.grasp_radius > 0 && env.press_radius > 0, "env.grasp_radius and env.press_radius must be > 0");
  constraint(env.v_max > 0 && env.omega_max > 0, "env.v_max and env.omega_max must be > 0");
  constraint(env.min_clearance >= 0, "env.min_clearance must be >= 0");
  constraint(keyframes.speed_eps >= 0, "keyframes.speed_eps must be >= 0");
  constraint(keyframes.min_gap >= 1, "keyframes.min_gap must be >= 1");
  constraint(render.resolution >= 8, "render.resolution must be >= 8");
  constraint(codec.grid_size >= 2, "codec.grid_size must be >= 2");
  constraint(codec.sigma_px > 0, "codec.sigma_px must be > 0");
  constraint(codec.fusion == "sum" || codec.fusion == "product", "codec.fusion must be 'sum' or 'product'");
  constraint(optim.lr > 0, "optim.lr must be > 0");
  constraint(optim.beta1 >= 0 && optim.beta1 < 1 && optim.beta2 >= 0 && optim.beta2 < 1,
             "optim.beta1 and optim.beta2 must be in [0, 1)");
  constraint(optim.eps > 0, "optim.eps must be > 0");
  constraint(optim.weight_decay >= 0, "optim.weight_decay must be >= 0");
  constraint(optim.batch_size >= 1, "optim.batch_size must be >= 1");
  constraint(optim.steps >= 0, "optim.steps must be >= 0");
  constraint(optim.warmup_steps >= 0, "optim.warmup_steps must be >= 0");
  constraint(optim.reference_steps >= 1, "optim.reference_steps must be >= 1");
  constraint(optim.log_every >= 1, "optim.log_every must be >= 1");
  constraint(optim.checkpoint_every >= 0, "optim.checkpoint_every must be >= 0");
  constraint(optim.steps == 0 || effective_warmup(optim.steps) < optim.steps,
             "optim.warmup_steps (effective " + std::to_string(effective_warmup(optim.steps)) +
                 ") must be < optim.steps (" + std::to_string(optim.steps) + ")");
  constraint(eval.episodes_per_task >= 1, "eval.episodes_per_task must be >= 1");
  constraint(data.episodes_per_task >= 1, "data.episodes_per_task must be >= 1");
  constraint(data.points_per_object >= 1 && data.table_points >= 0,
             "data.points_per_object must be >= 1 and data.table_points >= 0");
  constraint(adapt.steps >= 1, "adapt.steps must be >= 1");
  const sim::EnvContract c = contract();
  for (const auto* list : {&eval.tasks, &data.tasks}) {
    for (const auto& t : *list) {
      constraint(c.template_index(t) >= 0, "unknown task '" + t + "' in " +
                                               (list == &eval.tasks ? "eval.tasks" : "data.tasks"));
    }
  }
  policy_config().validate();
}

sim::EnvContract RunConfig::contract() const {
  sim::EnvContract c = sim::EnvContract::defaults();
  c.workspace_bounds = Box3(env.workspace_min, env.workspace_max);
  c.episode_limit = env.episode_limit;
  c.rng_seed = env.seed;
  c.grasp_radius = env.grasp_radius;
  c.press_radius = env.press_radius;
  c.v_max = env.v_max;
  c.omega_max = env.omega_max;
  c.min_clearance = env.min_clearance;
  return c;
}

demo::KeyframeParams RunConfig::keyframe_params() const {
  demo::KeyframeParams k;
  k.speed_eps = keyframes.speed_eps;
  k.min_gap = keyframes.min_gap;
  k.include_final = keyframes.include_final;
  return k;
}

demo::CloudParams RunConfig::cloud_params() const {
  demo::CloudParams p;
  p.points_per_object = data.points_per_object;
  p.options.table_points = data.table_points;
  p.options.include_table = data.table_points > 0;
  p.options.include_gripper = data.include_gripper;
  return p;
}

policy::PolicyConfig RunConfig::policy_config() const {
  policy::PolicyConfig p;
  p.resolution = render.resolution;
  p.patch_size = model.patch_size;
  p.embed_dim = model.embed_dim;
  p.encoder_layers = model.encoder_layers;
  p.viewwise_layers = model.viewwise_layers;
  p.crossview_layers = model.crossview_layers;
  p.heads = model.heads;
  p.mlp_ratio = model.mlp_ratio;
  p.lora_rank = model.lora_rank;
  p.horizon = model.horizon;
  const sim::EnvContract c = sim::EnvContract::defaults();
  p.template_vocab = static_cast<int>(c.instruction_set.size());
  std::size_t vocab = 1;
  int slots = 0;
  for (const auto& t : c.instruction_set) {
    vocab = std::max(vocab, t.vocabulary.size());
    slots = std::max(slots, t.max_slots);
  }
  p.slot_vocab = static_cast<int>(vocab);
  p.max_slots = slots;
  return p;
}

codec::ViewFusion RunConfig::view_fusion() const {
  return codec.fusion == "product" ? codec::ViewFusion::product : codec::ViewFusion::sum;
}

long RunConfig::effective_warmup(long steps) const {
  if (!optim.scale_warmup) return optim.warmup_steps;
  return std::lround(static_cast<double>(optim.warmup_steps) * static_cast<double>(steps) /
                     static_cast<double>(optim.reference_steps));
}

train::TrainOptions RunConfig::train_options(long steps) const {
  train::TrainOptions t;
  t.steps = steps;
  t.batch_size = optim.batch_size;
  t.warmup_steps = effective_warmup(steps);
  t.hyper.lr_base = optim.lr;
  t.hyper.beta1 = optim.beta1;
  t.hyper.beta2 = optim.beta2;
  t.hyper.eps = optim.eps;
  t.hyper.weight_decay = optim.weight_decay;
  t.log_every = optim.log_every;
  t.checkpoint_every = optim.checkpoint_every;
  t.sigma_px = codec.sigma_px;
  t.seed = env.seed;
  return t;
}

eval::ModelPolicyOptions RunConfig::model_policy_options() const {
  eval::ModelPolicyOptions m;
  m.cloud = cloud_params();
  m.fusion = view_fusion();
  m.grid_size = codec.grid_size;
  m.seed = env.seed + eval.seed_offset;
  return m;
}

}  // namespace mvact::config
