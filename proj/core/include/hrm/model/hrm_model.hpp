#pragma once

#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "hrm/numerics/autograd.hpp"

namespace hrm::model {

using num::Tensor;
using num::Var;

/// Network shape. Defaults match the reference hyperparameter table.
struct ModelConfig {
  int hidden_size = 64;
  int h_layers = 4;
  int l_layers = 4;
  int heads = 2;
  int expansion = 4;
  int h_cycles = 2;
  int l_cycles = 2;
  int recurrent_max_steps = 8;  // segments per environment step
  int vocab_size = 6;
  int seq_len = 121;
  int action_count = 4;

  int head_dim() const { return hidden_size / heads; }
  /// Throws ConfigError when the shape is unusable.
  void validate() const;
  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

/// Recurrent state for `rows / seq_len` observations, each tensor [rows x hidden].
struct LatentState {
  Tensor z_l;
  Tensor z_h;

  std::size_t batch(std::size_t seq_len) const { return z_l.shape().empty() ? 0 : z_l.dim(0) / seq_len; }
};

/// Concatenates per-observation latents along rows.
LatentState stack_latents(std::span<const LatentState* const> parts);
/// Row block `index` of a batched latent.
LatentState slice_latent(const LatentState& batched, std::size_t index, std::size_t seq_len);

enum class LatentMode { CarryZ, ResetZ };

struct NamedParameter {
  std::string name;
  Var var;
};

/// One post-norm transformer block: attention and SwiGLU sublayers, each
/// followed by residual add and RMSNorm.
struct BlockParams {
  Var attn_norm;
  Var wq, bq, wk, bk, wv, bv, wo, bo;
  Var mlp_norm;
  Var w_gate, b_gate, w_up, b_up, w_down, b_down;
};

/// All trainable tensors plus the fixed initial latent z0.
class HrmModel {
 public:
  HrmModel(const ModelConfig& config, std::uint64_t seed);

  HrmModel(HrmModel&&) noexcept = default;
  HrmModel& operator=(HrmModel&&) noexcept = default;
  HrmModel(const HrmModel&) = delete;
  HrmModel& operator=(const HrmModel&) = delete;

  /// Deep copy; the result shares no storage with this model.
  HrmModel clone() const;
  /// Overwrites every parameter and z0 value with `other`'s. Shapes must match.
  void copy_values_from(const HrmModel& other);

  const ModelConfig& config() const { return config_; }

  /// Trainable tensors in a stable order (embedding first).
  std::vector<NamedParameter> named_parameters() const;
  std::vector<Var> embedding_parameters() const { return {embed_}; }
  std::vector<Var> body_parameters() const;
  std::size_t parameter_count() const;

  /// Fixed initial latent for a single observation, [seq x hidden] each.
  const LatentState& initial_latent() const { return z0_; }
  /// Mutable access for checkpoint loading.
  LatentState& initial_latent_mut() { return z0_; }

  const Var& embed_table() const { return embed_; }
  const std::vector<BlockParams>& l_blocks() const { return l_blocks_; }
  const std::vector<BlockParams>& h_blocks() const { return h_blocks_; }
  const Var& head_fc1_weight() const { return head_w1_; }
  const Var& head_fc1_bias() const { return head_b1_; }
  const Var& head_fc2_weight() const { return head_w2_; }
  const Var& head_fc2_bias() const { return head_b2_; }

 private:
  HrmModel() = default;

  ModelConfig config_;
  Var embed_;
  std::vector<BlockParams> l_blocks_;
  std::vector<BlockParams> h_blocks_;
  Var head_w1_, head_b1_, head_w2_, head_b2_;
  LatentState z0_;
};

/// Token embedding scaled by sqrt(hidden). `tokens` holds batch * seq_len ids.
Var embed_observation(const HrmModel& model, std::span<const std::uint8_t> tokens);

/// z_L' = L-stack(z_L + z_H + x).
Var l_step(const HrmModel& model, const Var& z_l, const Var& z_h, const Var& x);
/// z_H' = H-stack(z_H + z_L).
Var h_step(const HrmModel& model, const Var& z_h, const Var& z_l);

/// Mean over positions, affine, SiLU, affine: [batch x action_count].
Var dqn_head(const HrmModel& model, const Var& z_h);

enum class TraceTag { LBlock, HUpdate };

struct TraceEntry {
  TraceTag tag;
  Tensor z_l;
  Tensor z_h;
};

/// Unrolled recurrence snapshots: one after each block of L-cycles and one
/// after each H update.
struct RecurrentTrace {
  std::vector<TraceEntry> entries;
};

struct ForwardResult {
  LatentState z_final;  // detached values
  Var q;                // [batch x action_count]; graph covers the final segment only
};

/// Runs recurrent_max_steps segments from `z_init`. All but the last segment
/// run without graph recording. Appends to `trace` when given.
ForwardResult recurrent_forward(const HrmModel& model, const Var& x, const LatentState& z_init,
                                RecurrentTrace* trace = nullptr);

/// Initial latent for one environment step. ResetZ or the first step of an
/// episode yield z0; otherwise a detached copy of `prev`.
LatentState init_latent(const HrmModel& model, LatentMode mode, const LatentState* prev, bool first_step);

/// z0 repeated for `batch` observations.
LatentState initial_latent_batch(const HrmModel& model, std::size_t batch);

}  // namespace hrm::model
