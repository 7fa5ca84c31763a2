// SPDX-License-Identifier: Apache-2.0
#include "mvact/train.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>

#include "mvact/error.hpp"
#include "mvact/parallel.hpp"

namespace mvact::train {

namespace fs = std::filesystem;

PreparedSample prepare_sample(const demo::TrainingSample& sample, const std::vector<render::OrthoView>& views,
                              int patch_size, double sigma_px) {
  PreparedSample p;
  for (const auto& v : render::render_views(sample.observation, views)) {
    p.views.push_back(policy::view_input(v, patch_size));
  }
  p.targets = codec::encode_targets(sample, views, sigma_px);
  p.instruction = sample.instruction;
  return p;
}

double batch_gradient(const policy::PolicyNet& net, const std::vector<const PreparedSample*>& batch,
                      std::vector<nn::Tensor>& grads, int threads) {
  const std::size_t n = batch.size();
  if (n == 0) throw Error(Errc::invalid_argument, "empty batch");
  std::vector<std::vector<nn::Tensor>> per_sample(n);
  std::vector<double> losses(n, 0.0);
  parallel_for(
      n,
      [&](std::size_t i) {
        nn::Graph g;
        nn::ParamBinder bind(g, net.params(), true);
        const auto out = net.forward(bind, batch[i]->views, batch[i]->instruction);
        const nn::Var loss = policy::sequence_loss(out, batch[i]->targets);
        losses[i] = loss.value().item();
        g.backward(loss);
        per_sample[i] = nn::zero_grads(net.params());
        bind.accumulate_grads(per_sample[i]);
      },
      threads > 0 ? threads : worker_count());
  // Fixed-order reduction keeps the result independent of scheduling.
  grads = nn::zero_grads(net.params());
  double total = 0.0;
  const double w = 1.0 / static_cast<double>(n);
  for (std::size_t i = 0; i < n; ++i) {
    total += losses[i];
    for (std::size_t p = 0; p < grads.size(); ++p) grads[p].flat() += w * per_sample[i][p].flat();
  }
  return total * w;
}

namespace {

void round_to_float(nn::ParamSet& params) {
  for (auto& p : params) {
    if (!p.trainable) continue;
    for (nn::Index i = 0; i < p.value.size(); ++i) p.value[i] = static_cast<float>(p.value[i]);
  }
}

std::string join(const std::vector<std::string>& items) {
  std::string s;
  for (std::size_t i = 0; i < items.size(); ++i) s += (i ? "," : "") + items[i];
  return s;
}

}  // namespace

TrainResult train(policy::PolicyNet& net, const std::vector<demo::TrainingSample>& data,
                  const std::vector<render::OrthoView>& views, const TrainOptions& options) {
  if (data.empty()) throw Error(Errc::invalid_argument, "training dataset is empty");
  if (options.steps < 0 || options.batch_size < 1 || options.log_every < 1) {
    throw Error(Errc::invalid_argument, "steps must be >= 0, batch size and log interval >= 1");
  }
  if (options.steps > 0 && options.warmup_steps >= options.steps) {
    throw Error(Errc::config_constraint, "optim.warmup_steps (" + std::to_string(options.warmup_steps) +
                                             ") must be < total steps (" + std::to_string(options.steps) + ")");
  }
  const int threads = options.threads > 0 ? options.threads : worker_count();
  const int patch = net.config().patch_size;

  std::vector<PreparedSample> prepared(data.size());
  parallel_for(
      data.size(), [&](std::size_t i) { prepared[i] = prepare_sample(data[i], views, patch, options.sigma_px); },
      threads);

  TrainResult result;
  std::string ckpt;
  if (!options.out_dir.empty()) {
    fs::create_directories(options.out_dir);
    ckpt = (fs::path(options.out_dir) / "checkpoint.bin").string();
  }
  const auto save = [&](long step) {
    if (ckpt.empty()) return;
    nn::save_checkpoint(ckpt, net.params());
    write_checkpoint_meta(ckpt + ".meta", {options.tasks, net.config(), step});
  };

  optim::OptimState state = optim::OptimState::for_params(net.params(), options.hyper);
  std::mt19937_64 rng(options.seed);
  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), rng);
  std::size_t cursor = 0;
  std::vector<nn::Tensor> grads;

  for (long step = 1; step <= options.steps; ++step) {
    std::vector<const PreparedSample*> batch;
    for (int b = 0; b < options.batch_size; ++b) {
      if (cursor == order.size()) {
        std::shuffle(order.begin(), order.end(), rng);
        cursor = 0;
      }
      batch.push_back(&prepared[order[cursor++]]);
    }
    const double loss = batch_gradient(net, batch, grads, threads);
    if (!std::isfinite(loss)) {
      throw Error(Errc::non_finite, "loss became non-finite at step " + std::to_string(step) +
                                        (ckpt.empty() ? std::string() : "; last good checkpoint kept at " + ckpt));
    }
    const double lr = optim::lr_schedule(step, options.warmup_steps, options.steps, options.hyper.lr_base);
    optim::lamb_update(net.params(), grads, state, lr);
    round_to_float(net.params());
    result.losses.push_back(loss);
    if (step == 1 || step % options.log_every == 0 || step == options.steps) result.metrics.push_back({step, loss, lr});
    if (options.checkpoint_every > 0 && step % options.checkpoint_every == 0) save(step);
    result.steps_run = step;
  }
  save(result.steps_run);
  result.checkpoint_path = ckpt;
  if (!options.out_dir.empty()) {
    write_metrics_csv((fs::path(options.out_dir) / "metrics.csv").string(), result.metrics);
  }
  return result;
}

void write_metrics_csv(const std::string& path, const std::vector<MetricsRow>& rows) {
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw Error(Errc::io_failure, "cannot write " + path);
  os << "step,loss,lr\n";
  char line[96];
  for (const auto& r : rows) {
    std::snprintf(line, sizeof line, "%ld,%.17g,%.17g\n", r.step, r.loss, r.lr);
    os << line;
  }
}

void write_checkpoint_meta(const std::string& path, const CheckpointMeta& meta) {
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw Error(Errc::io_failure, "cannot write " + path);
  const auto& m = meta.model;
  os << "tasks = " << join(meta.tasks) << "\n"
     << "steps = " << meta.steps << "\n"
     << "view_count = " << m.view_count << "\n"
     << "resolution = " << m.resolution << "\n"
     << "patch_size = " << m.patch_size << "\n"
     << "embed_dim = " << m.embed_dim << "\n"
     << "encoder_layers = " << m.encoder_layers << "\n"
     << "viewwise_layers = " << m.viewwise_layers << "\n"
     << "crossview_layers = " << m.crossview_layers << "\n"
     << "heads = " << m.heads << "\n"
     << "mlp_ratio = " << m.mlp_ratio << "\n"
     << "lora_rank = " << m.lora_rank << "\n"
     << "horizon = " << m.horizon << "\n"
     << "template_vocab = " << m.template_vocab << "\n"
     << "slot_vocab = " << m.slot_vocab << "\n"
     << "max_slots = " << m.max_slots << "\n";
}

CheckpointMeta read_checkpoint_meta(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw Error(Errc::io_failure, "cannot open " + path);
  CheckpointMeta meta;
  std::string line;
  while (std::getline(is, line)) {
    const auto eq = line.find('=');
    if (eq == std::string::npos) continue;
    const auto trim = [](std::string s) {
      s.erase(0, s.find_first_not_of(" \t"));
      s.erase(s.find_last_not_of(" \t\r") + 1);
      return s;
    };
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key == "tasks") {
      std::stringstream ss(value);
      std::string t;
      while (std::getline(ss, t, ',')) {
        if (!t.empty()) meta.tasks.push_back(t);
      }
      continue;
    }
    long v = 0;
    try {
      v = std::stol(value);
    } catch (const std::exception&) {
      throw Error(Errc::malformed_manifest, "bad value for " + key + " in " + path);
    }
    auto& m = meta.model;
    const int iv = static_cast<int>(v);
    if (key == "steps") meta.steps = v;
    else if (key == "view_count") m.view_count = iv;
    else if (key == "resolution") m.resolution = iv;
    else if (key == "patch_size") m.patch_size = iv;
    else if (key == "embed_dim") m.embed_dim = iv;
    else if (key == "encoder_layers") m.encoder_layers = iv;
    else if (key == "viewwise_layers") m.viewwise_layers = iv;
    else if (key == "crossview_layers") m.crossview_layers = iv;
    else if (key == "heads") m.heads = iv;
    else if (key == "mlp_ratio") m.mlp_ratio = iv;
    else if (key == "lora_rank") m.lora_rank = iv;
    else if (key == "horizon") m.horizon = iv;
    else if (key == "template_vocab") m.template_vocab = iv;
    else if (key == "slot_vocab") m.slot_vocab = iv;
    else if (key == "max_slots") m.max_slots = iv;
  }
  return meta;
}

void load_into(policy::PolicyNet& net, const std::string& checkpoint_path) {
  nn::assign_parameters(net.params(), nn::load_checkpoint(checkpoint_path));
}

}  // namespace mvact::train
