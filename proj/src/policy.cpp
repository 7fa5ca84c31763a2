// SPDX-License-Identifier: Apache-2.0
#include "mvact/policy.hpp"

#include <cmath>
#include <numeric>

#include "mvact/demo_data.hpp"
#include "mvact/error.hpp"
#include "mvact/nn/gradcheck.hpp"
#include "mvact/nn/ops.hpp"

namespace mvact::policy {

using nn::Index;

namespace {

void require(bool ok, const std::string& what) {
  if (!ok) throw Error(Errc::config_constraint, what);
}

}  // namespace

void PolicyConfig::validate() const {
  require(view_count >= 1, "model.view_count must be >= 1");
  require(patch_size >= 1, "model.patch_size must be >= 1");
  require(resolution >= patch_size && resolution % patch_size == 0,
          "render.resolution (" + std::to_string(resolution) + ") must be a multiple of model.patch_size (" +
              std::to_string(patch_size) + ")");
  require(heads >= 1, "model.heads must be >= 1");
  require(embed_dim >= 2 && embed_dim % (2 * heads) == 0,
          "model.embed_dim (" + std::to_string(embed_dim) + ") must be divisible by 2 * model.heads (" +
              std::to_string(heads) + ")");
  require(encoder_layers >= 0 && viewwise_layers >= 0 && crossview_layers >= 0, "layer counts must be >= 0");
  require(mlp_ratio >= 1, "model.mlp_ratio must be >= 1");
  require(lora_rank >= 1 && 2 * lora_rank <= encoder_dim(),
          "model.lora_rank (" + std::to_string(lora_rank) + ") must be in [1, model.embed_dim / 4]");
  require(horizon >= 1, "model.horizon must be >= 1");
  require(rotation_bins == kRotationBins, "rotation bins are fixed at 72");
  require(template_vocab >= 1 && slot_vocab >= 1 && max_slots >= 0, "instruction vocabularies must be non-empty");
}

Var lora_project(Var x, Var w0, Var a, Var b) {
  const Index k = x.value().cols();
  if (w0.value().rows() != k || a.value().rows() != k || b.value().rows() != a.value().cols() ||
      b.value().cols() != w0.value().cols()) {
    throw Error(Errc::shape_mismatch, "lora_project: input " + nn::to_string(x.shape()) + ", w0 " +
                                          nn::to_string(w0.shape()) + ", a " + nn::to_string(a.shape()) + ", b " +
                                          nn::to_string(b.shape()));
  }
  return nn::add(nn::matmul(x, w0), nn::matmul(nn::matmul(x, a), b));
}

ViewInput view_input(const render::VirtualView& view, int patch_size) {
  const int res = view.resolution();
  if (patch_size < 1 || res % patch_size != 0) {
    throw Error(Errc::shape_mismatch, "view resolution " + std::to_string(res) + " is not a multiple of patch " +
                                          std::to_string(patch_size));
  }
  const int pps = res / patch_size;
  const Index n = static_cast<Index>(pps) * pps;
  const Index p2 = static_cast<Index>(patch_size) * patch_size;
  ViewInput in{Tensor({n, 3 * p2}), Tensor({n, 4 * p2})};
  const double half = 0.5 * view.view.window;
  for (int r = 0; r < res; ++r) {
    for (int c = 0; c < res; ++c) {
      const Index pix = static_cast<Index>(r) * res + c;
      const Index patch = static_cast<Index>(r / patch_size) * pps + c / patch_size;
      const Index inner = static_cast<Index>(r % patch_size) * patch_size + c % patch_size;
      auto rgb = in.rgb_patches.matrix().row(patch);
      auto geo = in.geometry_patches.matrix().row(patch);
      for (int ch = 0; ch < 3; ++ch) rgb(inner * 3 + ch) = view.rgb(pix, ch) - 0.5;
      if (view.occupancy[static_cast<std::size_t>(pix)]) {
        geo(inner * 4) = view.depth(pix) / view.view.window;
        for (int ch = 0; ch < 3; ++ch) geo(inner * 4 + 1 + ch) = (view.xyz(pix, ch) - view.view.center(ch)) / half;
      } else {
        geo(inner * 4) = 1.0;
      }
    }
  }
  return in;
}

std::size_t PolicyNet::add_param(const std::string& name, nn::Shape shape, bool trainable, double stddev,
                                 std::mt19937_64& rng, double fill) {
  Tensor t(std::move(shape));
  std::normal_distribution<double> normal(0.0, stddev > 0.0 ? stddev : 1.0);
  for (Index i = 0; i < t.size(); ++i) {
    // Values are kept float32-representable so checkpoints round-trip exactly.
    t[i] = static_cast<float>(stddev > 0.0 ? normal(rng) : fill);
  }
  return params_.add(name, std::move(t), trainable);
}

PolicyNet::Block PolicyNet::add_block(const std::string& prefix, int width, bool frozen, bool lora,
                                      std::mt19937_64& rng) {
  const Index w = width;
  const Index hidden = w * config_.mlp_ratio;
  const double s_in = 1.0 / std::sqrt(static_cast<double>(w));
  const double s_hidden = 1.0 / std::sqrt(static_cast<double>(hidden));
  const bool train = !frozen;
  Block b{};
  b.ln1_gain = add_param(prefix + ".ln1.gain", {w}, train, 0.0, rng, 1.0);
  b.ln1_bias = add_param(prefix + ".ln1.bias", {w}, train, 0.0, rng);
  b.wq = add_param(prefix + ".attn.q.w", {w, w}, train, s_in, rng);
  b.wk = add_param(prefix + ".attn.k.w", {w, w}, train, s_in, rng);
  b.wv = add_param(prefix + ".attn.v.w", {w, w}, train, s_in, rng);
  if (lora) {
    const Index r = config_.lora_rank;
    for (auto [slot, base, tag] : {std::tuple{&b.lora_q, b.wq, "q"}, std::tuple{&b.lora_v, b.wv, "v"}}) {
      LoraAdapter ad;
      ad.w0 = base;
      ad.a = add_param(prefix + ".attn." + tag + ".lora_a", {w, r}, true, 0.02, rng);
      ad.b = add_param(prefix + ".attn." + tag + ".lora_b", {r, w}, true, 0.0, rng);
      ad.rank = config_.lora_rank;
      *slot = ad;
      adapters_.push_back(ad);
    }
  }
  b.wo = add_param(prefix + ".attn.o.w", {w, w}, train, s_in, rng);
  b.ln2_gain = add_param(prefix + ".ln2.gain", {w}, train, 0.0, rng, 1.0);
  b.ln2_bias = add_param(prefix + ".ln2.bias", {w}, train, 0.0, rng);
  b.w1 = add_param(prefix + ".mlp.w1", {w, hidden}, train, s_in, rng);
  b.b1 = add_param(prefix + ".mlp.b1", {hidden}, train, 0.0, rng);
  b.w2 = add_param(prefix + ".mlp.w2", {hidden, w}, train, s_hidden, rng);
  b.b2 = add_param(prefix + ".mlp.b2", {w}, train, 0.0, rng);
  return b;
}

PolicyNet::PolicyNet(const PolicyConfig& config, std::uint64_t seed) : config_(config) {
  config_.validate();
  std::mt19937_64 rng(seed);
  const Index e = config_.embed_dim;
  const Index ee = config_.encoder_dim();
  const Index n = config_.tokens_per_view();
  const Index p2 = static_cast<Index>(config_.patch_size) * config_.patch_size;
  const Index h = config_.horizon;

  enc_patch_w_ = add_param("encoder.patch.w", {3 * p2, ee}, false, 1.0 / std::sqrt(3.0 * p2), rng);
  enc_patch_b_ = add_param("encoder.patch.b", {ee}, false, 0.0, rng);
  enc_pos_ = add_param("encoder.pos", {n, ee}, false, 0.02, rng);
  for (int l = 0; l < config_.encoder_layers; ++l) {
    encoder_.push_back(add_block("encoder.block" + std::to_string(l), static_cast<int>(ee), true, true, rng));
  }
  geo_w_ = add_param("geometry.patch.w", {4 * p2, ee}, true, 1.0 / std::sqrt(4.0 * p2), rng);
  geo_b_ = add_param("geometry.patch.b", {ee}, true, 0.0, rng);
  for (int l = 0; l < config_.viewwise_layers; ++l) {
    viewwise_.push_back(add_block("viewwise.block" + std::to_string(l), static_cast<int>(e), false, false, rng));
  }
  view_embed_ = add_param("fusion.view_embed", {config_.view_count, e}, true, 0.02, rng);
  lang_template_ = add_param("language.template", {config_.template_vocab, e}, true, 1.0, rng);
  lang_slot_ = add_param("language.slot_word", {config_.slot_vocab, e}, true, 1.0, rng);
  lang_slot_pos_ = add_param("language.slot_pos", {std::max(1, config_.max_slots), e}, true, 0.02, rng);
  for (int l = 0; l < config_.crossview_layers; ++l) {
    crossview_.push_back(add_block("crossview.block" + std::to_string(l), static_cast<int>(e), false, false, rng));
  }
  final_gain_ = add_param("fusion.norm.gain", {e}, true, 0.0, rng, 1.0);
  final_bias_ = add_param("fusion.norm.bias", {e}, true, 0.0, rng);
  const Index pooled = e * config_.view_count;
  const Index hidden = e * config_.mlp_ratio;
  const Index outputs = 3 * static_cast<Index>(config_.rotation_bins) + 4;
  heat_w_ = add_param("head.heatmap.w", {e, h * p2}, true, 1.0 / std::sqrt(static_cast<double>(e)), rng);
  heat_b_ = add_param("head.heatmap.b", {h * p2}, true, 0.0, rng);
  step_embed_ = add_param("head.step_embed", {h, pooled}, true, 0.02, rng);
  head_w1_ = add_param("head.mlp.w1", {pooled, hidden}, true, 1.0 / std::sqrt(static_cast<double>(pooled)), rng);
  head_b1_ = add_param("head.mlp.b1", {hidden}, true, 0.0, rng);
  head_w2_ = add_param("head.mlp.w2", {hidden, outputs}, true, 1.0 / std::sqrt(static_cast<double>(hidden)), rng);
  head_b2_ = add_param("head.mlp.b2", {outputs}, true, 0.0, rng);

  const int res = config_.resolution;
  const int ps = config_.patch_size;
  const int pps = config_.patches_per_side();
  const Index pixels = static_cast<Index>(res) * res;
  unpatch_index_.resize(static_cast<std::size_t>(h * pixels));
  patch_pool_ = Tensor({pixels, n});
  for (int r = 0; r < res; ++r) {
    for (int c = 0; c < res; ++c) {
      const Index pix = static_cast<Index>(r) * res + c;
      const Index patch = static_cast<Index>(r / ps) * pps + c / ps;
      const Index inner = static_cast<Index>(r % ps) * ps + c % ps;
      patch_pool_.matrix()(pix, patch) = 1.0;
      for (Index t = 0; t < h; ++t) {
        unpatch_index_[static_cast<std::size_t>(t * pixels + pix)] = patch * (h * p2) + t * p2 + inner;
      }
    }
  }
}

std::vector<std::size_t> PolicyNet::frozen_parameters() const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < params_.size(); ++i) {
    if (!params_[i].trainable) out.push_back(i);
  }
  return out;
}

Var PolicyNet::run_block(ParamBinder& bind, const Block& block, Var x, const ForwardOptions& options,
                         const std::string& label, std::vector<AttentionMap>* attention) const {
  using namespace nn;
  const Var h1 = layer_norm(x, bind(block.ln1_gain), bind(block.ln1_bias));
  const auto project = [&](std::size_t w, const std::optional<LoraAdapter>& ad) {
    if (ad && options.use_lora) return lora_project(h1, bind(ad->w0), bind(ad->a), bind(ad->b));
    return matmul(h1, bind(w));
  };
  const Var q = project(block.wq, block.lora_q);
  const Var k = matmul(h1, bind(block.wk));
  const Var v = project(block.wv, block.lora_v);
  const Index width = x.value().cols();
  const Index dh = width / config_.heads;
  const double inv = 1.0 / std::sqrt(static_cast<double>(dh));
  std::vector<Var> heads;
  for (int hd = 0; hd < config_.heads; ++hd) {
    const Index b = hd * dh;
    const Var qh = config_.heads == 1 ? q : slice(q, 1, b, b + dh);
    const Var kh = config_.heads == 1 ? k : slice(k, 1, b, b + dh);
    const Var vh = config_.heads == 1 ? v : slice(v, 1, b, b + dh);
    const Var p = softmax(scale(matmul(qh, transpose(kh)), inv), 1);
    if (attention) attention->push_back({label + ".head" + std::to_string(hd), p.value().matrix()});
    heads.push_back(matmul(p, vh));
  }
  const Var o = heads.size() == 1 ? heads.front() : concat(heads, 1);
  x = add(x, matmul(o, bind(block.wo)));
  const Var h2 = layer_norm(x, bind(block.ln2_gain), bind(block.ln2_bias));
  const Var m = add(matmul(gelu(add(matmul(h2, bind(block.w1)), bind(block.b1))), bind(block.w2)), bind(block.b2));
  return add(x, m);
}

Var PolicyNet::encode_view(ParamBinder& bind, const ViewInput& view, int view_index, const ForwardOptions& options,
                           std::vector<AttentionMap>* attention) const {
  using namespace nn;
  const Index n = config_.tokens_per_view();
  const Index p2 = static_cast<Index>(config_.patch_size) * config_.patch_size;
  if (view.rgb_patches.rows() != n || view.rgb_patches.cols() != 3 * p2 || view.geometry_patches.rows() != n ||
      view.geometry_patches.cols() != 4 * p2) {
    throw Error(Errc::shape_mismatch, "encode_view: view patches " + to_string(view.rgb_patches.shape()) +
                                          " do not match resolution " + std::to_string(config_.resolution) +
                                          " / patch " + std::to_string(config_.patch_size));
  }
  Graph& g = bind.graph();
  Var x = add(add(matmul(g.constant(view.rgb_patches), bind(enc_patch_w_)), bind(enc_patch_b_)), bind(enc_pos_));
  for (std::size_t l = 0; l < encoder_.size(); ++l) {
    x = run_block(bind, encoder_[l], x, options,
                  "encoder." + std::to_string(l) + ".view" + std::to_string(view_index), attention);
  }
  const Var geo = add(matmul(g.constant(view.geometry_patches), bind(geo_w_)), bind(geo_b_));
  return concat({x, geo}, 1);
}

Var PolicyNet::instruction_tokens(ParamBinder& bind, const sim::Instruction& instruction) const {
  using namespace nn;
  if (instruction.template_id < 0 || instruction.template_id >= config_.template_vocab) {
    throw Error(Errc::unsupported_task, "instruction template " + std::to_string(instruction.template_id) +
                                            " outside the model vocabulary");
  }
  if (static_cast<int>(instruction.slot_bindings.size()) > config_.max_slots) {
    throw Error(Errc::shape_mismatch, "instruction has more slots than the model supports");
  }
  const Var tpl = embedding_lookup(bind(lang_template_), {instruction.template_id});
  if (instruction.slot_bindings.empty()) return tpl;
  std::vector<Index> words, positions;
  for (std::size_t i = 0; i < instruction.slot_bindings.size(); ++i) {
    words.push_back(instruction.slot_bindings[i]);
    positions.push_back(static_cast<Index>(i));
  }
  const Var slots = add(embedding_lookup(bind(lang_slot_), words), embedding_lookup(bind(lang_slot_pos_), positions));
  return concat({tpl, slots}, 0);
}

std::vector<Var> PolicyNet::fuse_multiview(ParamBinder& bind, const std::vector<Var>& view_tokens, Var language,
                                           const ForwardOptions& options,
                                           std::vector<AttentionMap>* attention) const {
  using namespace nn;
  const auto views = view_tokens.size();
  if (static_cast<int>(views) != config_.view_count) {
    throw Error(Errc::shape_mismatch, "fuse_multiview: " + std::to_string(views) + " views, model expects " +
                                          std::to_string(config_.view_count));
  }
  std::vector<int> order = options.view_order;
  if (order.empty()) {
    order.resize(views);
    std::iota(order.begin(), order.end(), 0);
  }
  if (order.size() != views) throw Error(Errc::shape_mismatch, "view_order length differs from view count");

  std::vector<Var> tokens = view_tokens;
  for (std::size_t v = 0; v < views; ++v) {
    for (std::size_t l = 0; l < viewwise_.size(); ++l) {
      tokens[v] = run_block(bind, viewwise_[l], tokens[v], options,
                            "viewwise." + std::to_string(l) + ".view" + std::to_string(v), attention);
    }
  }
  if (crossview_.empty()) return tokens;

  std::vector<Var> joint;
  for (std::size_t v = 0; v < views; ++v) {
    joint.push_back(add(tokens[v], embedding_lookup(bind(view_embed_), {order[v]})));
  }
  joint.push_back(language);
  Var x = concat(joint, 0);
  for (std::size_t l = 0; l < crossview_.size(); ++l) {
    x = run_block(bind, crossview_[l], x, options, "crossview." + std::to_string(l), attention);
  }
  const Index n = config_.tokens_per_view();
  std::vector<Var> out;
  for (std::size_t v = 0; v < views; ++v) {
    out.push_back(slice(x, 0, static_cast<Index>(v) * n, static_cast<Index>(v + 1) * n));
  }
  return out;
}

ForwardResult PolicyNet::predict_sequence(ParamBinder& bind, const std::vector<Var>& fused) const {
  using namespace nn;
  Graph& g = bind.graph();
  const Index h = config_.horizon;
  const Index pixels = static_cast<Index>(config_.resolution) * config_.resolution;
  if (static_cast<int>(fused.size()) != config_.view_count) {
    throw Error(Errc::shape_mismatch, "predict_sequence: wrong number of views");
  }
  ForwardResult r;
  std::vector<Var> pooled;
  const Var pool = g.constant(patch_pool_);
  for (const Var& raw : fused) {
    if (raw.value().rows() != config_.tokens_per_view() || raw.value().cols() != config_.embed_dim) {
      throw Error(Errc::shape_mismatch, "predict_sequence: tokens " + to_string(raw.shape()));
    }
    const Var tokens = layer_norm(raw, bind(final_gain_), bind(final_bias_));
    const Var patch_logits = add(matmul(tokens, bind(heat_w_)), bind(heat_b_));
    const Var heat = gather(patch_logits, unpatch_index_, {h, pixels});
    r.heatmap_logits.push_back(heat);
    const Var weights = matmul(softmax(heat, 1), pool);
    pooled.push_back(matmul(weights, tokens));
  }
  Var feat = pooled.size() == 1 ? pooled.front() : concat(pooled, 1);
  feat = add(feat, bind(step_embed_));
  const Var hidden = gelu(add(matmul(feat, bind(head_w1_)), bind(head_b1_)));
  const Var out = add(matmul(hidden, bind(head_w2_)), bind(head_b2_));
  const Index rot = 3 * static_cast<Index>(config_.rotation_bins);
  r.rotation_logits = slice(out, 1, 0, rot);
  r.gripper_logits = slice(out, 1, rot, rot + 2);
  r.collision_logits = slice(out, 1, rot + 2, rot + 4);
  return r;
}

ForwardResult PolicyNet::forward(ParamBinder& bind, const std::vector<ViewInput>& views,
                                 const sim::Instruction& instruction, const ForwardOptions& options) const {
  if (static_cast<int>(views.size()) != config_.view_count) {
    throw Error(Errc::shape_mismatch, "forward: " + std::to_string(views.size()) + " views, model expects " +
                                          std::to_string(config_.view_count));
  }
  std::vector<AttentionMap> attention;
  std::vector<AttentionMap>* rec = options.record_attention ? &attention : nullptr;
  std::vector<Var> tokens;
  for (std::size_t v = 0; v < views.size(); ++v) {
    tokens.push_back(encode_view(bind, views[v], static_cast<int>(v), options, rec));
  }
  const Var language = instruction_tokens(bind, instruction);
  ForwardResult r = predict_sequence(bind, fuse_multiview(bind, tokens, language, options, rec));
  r.attention_maps = std::move(attention);
  return r;
}

PolicyOutput to_output(const ForwardResult& result) {
  PolicyOutput out;
  for (const Var& v : result.heatmap_logits) out.heatmap_logits.push_back(v.value().matrix());
  out.rotation_logits = result.rotation_logits.value().matrix();
  out.gripper_logits = result.gripper_logits.value().matrix();
  out.collision_logits = result.collision_logits.value().matrix();
  out.attention_maps = result.attention_maps;
  return out;
}

PolicyOutput PolicyNet::predict(const std::vector<ViewInput>& views, const sim::Instruction& instruction,
                                const ForwardOptions& options) const {
  nn::Graph g;
  ParamBinder bind(g, params_, false);
  return to_output(forward(bind, views, instruction, options));
}

Var sequence_loss(const ForwardResult& output, const codec::HeatmapTargets& targets) {
  using namespace nn;
  const int h = targets.horizon();
  const Var& rot = output.rotation_logits;
  if (rot.value().rows() != h || output.heatmap_logits.size() != targets.maps.size() ||
      static_cast<int>(targets.rotation_bins.size()) != h || static_cast<int>(targets.gripper.size()) != h ||
      static_cast<int>(targets.collision.size()) != h) {
    throw Error(Errc::shape_mismatch, "sequence_loss: output horizon " + std::to_string(rot.value().rows()) +
                                          " / views " + std::to_string(output.heatmap_logits.size()) +
                                          " do not match targets (" + std::to_string(h) + " / " +
                                          std::to_string(targets.maps.size()) + ")");
  }
  int valid = 0;
  for (int k = 0; k < h; ++k) {
    const bool on = targets.valid_mask[static_cast<std::size_t>(k)] != 0;
    if (on && valid != k) throw Error(Errc::shape_mismatch, "sequence_loss: valid_mask is not a prefix mask");
    valid += on ? 1 : 0;
  }
  if (valid == 0) throw Error(Errc::shape_mismatch, "sequence_loss: no valid channels");
  std::vector<Real> w(static_cast<std::size_t>(h), 0.0);
  for (int k = 0; k < valid; ++k) w[static_cast<std::size_t>(k)] = 1.0 / valid;

  Graph& g = *rot.graph;
  std::vector<Var> terms;
  for (std::size_t v = 0; v < targets.maps.size(); ++v) {
    const Var& heat = output.heatmap_logits[v];
    if (heat.value().rows() != h || heat.value().cols() != targets.maps[v].cols()) {
      throw Error(Errc::shape_mismatch, "sequence_loss: heatmap " + to_string(heat.shape()) + " vs target " +
                                            std::to_string(targets.maps[v].rows()) + "x" +
                                            std::to_string(targets.maps[v].cols()));
    }
    terms.push_back(cross_entropy_logits(heat, Tensor::from_matrix(targets.maps[v]), w));
  }
  const Index bins = rot.value().cols() / 3;
  for (int axis = 0; axis < 3; ++axis) {
    std::vector<Index> cls;
    for (const auto& b : targets.rotation_bins) cls.push_back(b[static_cast<std::size_t>(axis)]);
    terms.push_back(cross_entropy_logits(slice(rot, 1, axis * bins, (axis + 1) * bins), cls, w));
  }
  Tensor diff({2, 1});
  diff[0] = 1.0;
  diff[1] = -1.0;
  const Var d = g.constant(diff);
  const auto binary = [&](const Var& logits, const std::vector<std::uint8_t>& labels) {
    std::vector<Real> y(labels.begin(), labels.end());
    return binary_cross_entropy_logits(matmul(logits, d), y, w);
  };
  terms.push_back(binary(output.gripper_logits, targets.gripper));
  terms.push_back(binary(output.collision_logits, targets.collision));
  Var total = terms.front();
  for (std::size_t i = 1; i < terms.size(); ++i) total = add(total, terms[i]);
  return total;
}

double sequence_loss(const PolicyOutput& output, const codec::HeatmapTargets& targets) {
  nn::Graph g;
  ForwardResult r;
  for (const auto& m : output.heatmap_logits) r.heatmap_logits.push_back(g.constant(Tensor::from_matrix(m)));
  r.rotation_logits = g.constant(Tensor::from_matrix(output.rotation_logits));
  r.gripper_logits = g.constant(Tensor::from_matrix(output.gripper_logits));
  r.collision_logits = g.constant(Tensor::from_matrix(output.collision_logits));
  return sequence_loss(r, targets).value().item();
}

PolicyConfig gradcheck_config() {
  PolicyConfig c;
  c.resolution = 16;
  c.embed_dim = 16;
  c.heads = 2;
  return c;
}

EndToEndCheck end_to_end_gradient_check(const PolicyConfig& config, std::uint64_t seed, double eps) {
  PolicyNet net(config, seed);
  // Fresh adapters have b = 0, which makes every gradient of a vanish; give
  // them small values so both factors are exercised.
  std::mt19937_64 rng(seed ^ 0x5eedull);
  std::normal_distribution<double> normal(0.0, 0.05);
  for (const auto& ad : net.adapters()) {
    auto& b = net.params()[ad.b].value;
    for (Index i = 0; i < b.size(); ++i) b[i] = normal(rng);
  }

  const sim::EnvContract contract = sim::EnvContract::defaults();
  const sim::SceneState scene = sim::make_scene(contract, 0, seed);
  const sim::Trajectory traj = sim::expert_demo(contract, scene);
  auto samples = demo::build_training_samples(traj, demo::extract_keyframes(traj, {}), config.horizon);
  demo::CloudParams cloud;
  cloud.points_per_object = 100;
  cloud.options.table_points = 600;
  demo::attach_observations(samples, traj, contract, cloud, seed);
  const demo::TrainingSample& sample = samples.front();
  const auto views = render::cube_views(contract.workspace_bounds, config.resolution);
  std::vector<ViewInput> inputs;
  for (const auto& v : render::render_views(sample.observation, views)) inputs.push_back(view_input(v, config.patch_size));
  const codec::HeatmapTargets targets = codec::encode_targets(sample, views, 1.5);

  EndToEndCheck result;
  for (std::size_t i = 0; i < net.params().size(); ++i) {
    if (!net.params()[i].trainable) continue;
    const nn::ScalarFn f = [&](nn::Graph& g, Var x) {
      ParamBinder bind(g, net.params(), false);
      bind.bind(i, x);
      return sequence_loss(net.forward(bind, inputs, sample.instruction), targets);
    };
    const double err = nn::finite_difference_check(f, net.params()[i].value, eps);
    result.checked_values += net.params()[i].value.size();
    if (err >= result.max_relative_error) {
      result.max_relative_error = err;
      result.worst_parameter = net.params()[i].name;
    }
  }
  return result;
}

}  // namespace mvact::policy
