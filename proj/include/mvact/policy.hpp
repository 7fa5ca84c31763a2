// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "mvact/codec.hpp"
#include "mvact/nn/params.hpp"
#include "mvact/policy_output.hpp"
#include "mvact/render.hpp"
#include "mvact/sim.hpp"

namespace mvact::policy {

using nn::ParamBinder;
using nn::ParamSet;
using nn::Tensor;
using nn::Var;

struct PolicyConfig {
  int view_count = 5;
  int resolution = 32;
  int patch_size = 8;
  int embed_dim = 64;
  int encoder_layers = 2;
  int viewwise_layers = 1;
  int crossview_layers = 1;
  int heads = 4;
  int mlp_ratio = 2;
  int lora_rank = 4;
  int horizon = 5;
  int rotation_bins = kRotationBins;
  int template_vocab = 3;  ///< instruction templates
  int slot_vocab = 6;      ///< words a slot can bind
  int max_slots = 3;

  int patches_per_side() const { return resolution / patch_size; }
  int tokens_per_view() const { return patches_per_side() * patches_per_side(); }
  int encoder_dim() const { return embed_dim / 2; }

  /// Throws config_constraint naming the offending fields.
  void validate() const;

  friend bool operator==(const PolicyConfig&, const PolicyConfig&) = default;
};

/// Indices into the model's ParamSet: frozen w0 [k x d], trainable a [k x r]
/// and b [r x d]. In row form the projection is x w0 + (x a) b.
struct LoraAdapter {
  std::size_t w0 = 0;
  std::size_t a = 0;
  std::size_t b = 0;
  int rank = 0;
};

/// x w0 + (x a) b. Gradient reaches w0 only if its leaf requires grad.
Var lora_project(Var x, Var w0, Var a, Var b);

struct ForwardOptions {
  bool use_lora = true;          ///< false drops the low-rank bypass entirely
  bool record_attention = false;
  /// View-embedding row used for each input view; empty means identity.
  std::vector<int> view_order;
};

struct ForwardResult {
  std::vector<Var> heatmap_logits;  ///< per view [h x res^2]
  Var rotation_logits;              ///< [h x 3*bins]
  Var gripper_logits;               ///< [h x 2]
  Var collision_logits;             ///< [h x 2]
  std::vector<AttentionMap> attention_maps;
};

/// Network inputs derived from one rendered view: RGB patches [n x 3P^2] and
/// depth+xyz patches [n x 4P^2], pixel-major then channel within a patch.
struct ViewInput {
  Tensor rgb_patches;
  Tensor geometry_patches;
};

ViewInput view_input(const render::VirtualView& view, int patch_size);

class PolicyNet {
 public:
  PolicyNet(const PolicyConfig& config, std::uint64_t seed);

  const PolicyConfig& config() const { return config_; }
  ParamSet& params() { return params_; }
  const ParamSet& params() const { return params_; }
  const std::vector<LoraAdapter>& adapters() const { return adapters_; }

  /// Parameters that must never change: everything under "encoder." except
  /// LoRA factors.
  std::vector<std::size_t> frozen_parameters() const;

  Var encode_view(ParamBinder& bind, const ViewInput& view, int view_index, const ForwardOptions& options,
                  std::vector<AttentionMap>* attention) const;

  Var instruction_tokens(ParamBinder& bind, const sim::Instruction& instruction) const;

  std::vector<Var> fuse_multiview(ParamBinder& bind, const std::vector<Var>& view_tokens, Var language,
                                  const ForwardOptions& options, std::vector<AttentionMap>* attention) const;

  ForwardResult predict_sequence(ParamBinder& bind, const std::vector<Var>& fused) const;

  ForwardResult forward(ParamBinder& bind, const std::vector<ViewInput>& views, const sim::Instruction& instruction,
                        const ForwardOptions& options = {}) const;

  /// Inference-only forward returning plain matrices.
  PolicyOutput predict(const std::vector<ViewInput>& views, const sim::Instruction& instruction,
                       const ForwardOptions& options = {}) const;

 private:
  struct Block {
    std::size_t ln1_gain, ln1_bias, wq, wk, wv, wo, ln2_gain, ln2_bias, w1, b1, w2, b2;
    std::optional<LoraAdapter> lora_q, lora_v;
  };

  Block add_block(const std::string& prefix, int width, bool frozen, bool lora, std::mt19937_64& rng);
  Var run_block(ParamBinder& bind, const Block& block, Var x, const ForwardOptions& options,
                const std::string& label, std::vector<AttentionMap>* attention) const;
  std::size_t add_param(const std::string& name, nn::Shape shape, bool trainable, double stddev,
                        std::mt19937_64& rng, double fill = 0.0);

  PolicyConfig config_;
  ParamSet params_;
  std::vector<LoraAdapter> adapters_;

  std::size_t enc_patch_w_ = 0, enc_patch_b_ = 0, enc_pos_ = 0;
  std::vector<Block> encoder_;
  std::size_t geo_w_ = 0, geo_b_ = 0;
  std::vector<Block> viewwise_;
  std::size_t view_embed_ = 0;
  std::size_t lang_template_ = 0, lang_slot_ = 0, lang_slot_pos_ = 0;
  std::vector<Block> crossview_;
  std::size_t final_gain_ = 0, final_bias_ = 0;
  std::size_t heat_w_ = 0, heat_b_ = 0, step_embed_ = 0, head_w1_ = 0, head_b1_ = 0, head_w2_ = 0, head_b2_ = 0;

  std::vector<nn::Index> unpatch_index_;  ///< [n x hP^2] -> [h x res^2]
  Tensor patch_pool_;                     ///< [res^2 x n] ones where a pixel lies in a patch
};

/// Mean over valid channels of the summed per-view heatmap CE, per-axis
/// rotation CE, gripper BCE and collision BCE. Masked channels get weight 0.
Var sequence_loss(const ForwardResult& output, const codec::HeatmapTargets& targets);

/// Loss of plain logits, evaluated on a throwaway graph.
double sequence_loss(const PolicyOutput& output, const codec::HeatmapTargets& targets);

PolicyOutput to_output(const ForwardResult& result);

/// Finite-difference check of the full loss against every trainable tensor.
struct EndToEndCheck {
  std::string worst_parameter;
  double max_relative_error = 0.0;
  nn::Index checked_values = 0;
};

/// Small network used by the end-to-end check: 16 px views, width 16, 2 heads.
PolicyConfig gradcheck_config();

EndToEndCheck end_to_end_gradient_check(const PolicyConfig& config, std::uint64_t seed, double eps = 1e-5);

}  // namespace mvact::policy
