#include "hrm/model/hrm_model.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "hrm/error.hpp"
#include "hrm/numerics/ops.hpp"

namespace hrm::model {

namespace num = hrm::num;
using num::Shape;

void ModelConfig::validate() const {
  auto positive = [](int v, const char* name) {
    if (v < 1) throw ConfigError(std::string(name) + " must be >= 1, got " + std::to_string(v));
  };
  positive(hidden_size, "hidden_size");
  positive(h_layers, "h_layers");
  positive(l_layers, "l_layers");
  positive(heads, "heads");
  positive(expansion, "expansion");
  positive(h_cycles, "h_cycles");
  positive(l_cycles, "l_cycles");
  positive(recurrent_max_steps, "recurrent_max_steps");
  positive(vocab_size, "vocab_size");
  positive(seq_len, "seq_len");
  positive(action_count, "action_count");
  if (hidden_size % heads != 0) {
    throw ConfigError("hidden_size " + std::to_string(hidden_size) + " not divisible by heads " +
                      std::to_string(heads));
  }
  if (head_dim() % 2 != 0) throw ConfigError("head_dim must be even for rotary embeddings");
}

LatentState stack_latents(std::span<const LatentState* const> parts) {
  if (parts.empty()) return {};
  const std::size_t hidden = parts.front()->z_l.dim(1);
  std::size_t rows = 0;
  for (const LatentState* p : parts) rows += p->z_l.dim(0);
  LatentState out{Tensor({rows, hidden}), Tensor({rows, hidden})};
  std::size_t at = 0;
  for (const LatentState* p : parts) {
    if (p->z_l.dim(1) != hidden || p->z_h.shape() != p->z_l.shape()) {
      throw DimensionError("stack_latents: inconsistent latent shapes");
    }
    std::copy(p->z_l.data().begin(), p->z_l.data().end(), out.z_l.raw() + at);
    std::copy(p->z_h.data().begin(), p->z_h.data().end(), out.z_h.raw() + at);
    at += p->z_l.numel();
  }
  return out;
}

LatentState slice_latent(const LatentState& batched, std::size_t index, std::size_t seq_len) {
  const std::size_t hidden = batched.z_l.dim(1);
  const std::size_t n = seq_len * hidden;
  if ((index + 1) * seq_len > batched.z_l.dim(0)) throw DimensionError("slice_latent: index out of range");
  auto cut = [&](const Tensor& t) {
    const float* begin = t.raw() + index * n;
    return Tensor({seq_len, hidden}, std::vector<float>(begin, begin + n));
  };
  return {cut(batched.z_l), cut(batched.z_h)};
}

namespace {

Var normal_param(std::mt19937_64& rng, Shape shape, float stddev) {
  std::normal_distribution<float> dist(0.0f, stddev);
  Tensor t(std::move(shape));
  for (float& v : t.data()) v = dist(rng);
  return Var(std::move(t), true);
}

Var const_param(Shape shape, float value) { return Var(Tensor(std::move(shape), value), true); }

BlockParams make_block(std::mt19937_64& rng, const ModelConfig& c) {
  const auto d = static_cast<std::size_t>(c.hidden_size);
  const auto inner = static_cast<std::size_t>(c.hidden_size * c.expansion);
  const float in_std = 1.0f / std::sqrt(static_cast<float>(d));
  const float inner_std = 1.0f / std::sqrt(static_cast<float>(inner));
  BlockParams b;
  b.attn_norm = const_param({d}, 1.0f);
  b.wq = normal_param(rng, {d, d}, in_std);
  b.bq = const_param({d}, 0.0f);
  b.wk = normal_param(rng, {d, d}, in_std);
  b.bk = const_param({d}, 0.0f);
  b.wv = normal_param(rng, {d, d}, in_std);
  b.bv = const_param({d}, 0.0f);
  b.wo = normal_param(rng, {d, d}, in_std);
  b.bo = const_param({d}, 0.0f);
  b.mlp_norm = const_param({d}, 1.0f);
  b.w_gate = normal_param(rng, {d, inner}, in_std);
  b.b_gate = const_param({inner}, 0.0f);
  b.w_up = normal_param(rng, {d, inner}, in_std);
  b.b_up = const_param({inner}, 0.0f);
  b.w_down = normal_param(rng, {inner, d}, inner_std);
  b.b_down = const_param({d}, 0.0f);
  return b;
}

void append_block(std::vector<NamedParameter>& out, const std::string& prefix, const BlockParams& b) {
  out.push_back({prefix + ".attn_norm.gain", b.attn_norm});
  out.push_back({prefix + ".attn.q.weight", b.wq});
  out.push_back({prefix + ".attn.q.bias", b.bq});
  out.push_back({prefix + ".attn.k.weight", b.wk});
  out.push_back({prefix + ".attn.k.bias", b.bk});
  out.push_back({prefix + ".attn.v.weight", b.wv});
  out.push_back({prefix + ".attn.v.bias", b.bv});
  out.push_back({prefix + ".attn.o.weight", b.wo});
  out.push_back({prefix + ".attn.o.bias", b.bo});
  out.push_back({prefix + ".mlp_norm.gain", b.mlp_norm});
  out.push_back({prefix + ".mlp.gate.weight", b.w_gate});
  out.push_back({prefix + ".mlp.gate.bias", b.b_gate});
  out.push_back({prefix + ".mlp.up.weight", b.w_up});
  out.push_back({prefix + ".mlp.up.bias", b.b_up});
  out.push_back({prefix + ".mlp.down.weight", b.w_down});
  out.push_back({prefix + ".mlp.down.bias", b.b_down});
}

Var clone_var(const Var& v) { return Var(v.value(), v.requires_grad()); }

BlockParams clone_block(const BlockParams& b) {
  return {clone_var(b.attn_norm), clone_var(b.wq),    clone_var(b.bq),     clone_var(b.wk),
          clone_var(b.bk),        clone_var(b.wv),    clone_var(b.bv),     clone_var(b.wo),
          clone_var(b.bo),        clone_var(b.mlp_norm), clone_var(b.w_gate), clone_var(b.b_gate),
          clone_var(b.w_up),      clone_var(b.b_up),  clone_var(b.w_down), clone_var(b.b_down)};
}

std::vector<float> positions_for(std::size_t seq) {
  std::vector<float> pos(seq);
  std::iota(pos.begin(), pos.end(), 0.0f);
  return pos;
}

Var block_forward(const BlockParams& b, const Var& x, const ModelConfig& c) {
  const auto seq = static_cast<std::size_t>(c.seq_len);
  const auto heads = static_cast<std::size_t>(c.heads);
  const auto hd = static_cast<std::size_t>(c.head_dim());
  const std::size_t batch = x.shape()[0] / seq;
  const Shape split{batch, seq, heads, hd};
  static thread_local std::vector<float> positions;
  if (positions.size() != seq) positions = positions_for(seq);

  Var q = num::rope_apply(num::reshape(num::linear(x, b.wq, b.bq), split), positions);
  Var k = num::rope_apply(num::reshape(num::linear(x, b.wk, b.bk), split), positions);
  Var v = num::reshape(num::linear(x, b.wv, b.bv), split);
  Var attn = num::reshape(num::attention(q, k, v), x.shape());
  Var h = num::rms_norm(num::add(x, num::linear(attn, b.wo, b.bo)), b.attn_norm);

  Var inner = num::swiglu(num::linear(h, b.w_gate, b.b_gate), num::linear(h, b.w_up, b.b_up));
  return num::rms_norm(num::add(h, num::linear(inner, b.w_down, b.b_down)), b.mlp_norm);
}

Var stack_forward(const std::vector<BlockParams>& blocks, Var x, const ModelConfig& c) {
  for (const BlockParams& b : blocks) x = block_forward(b, x, c);
  return x;
}

void check_latent_rows(const Var& z, const ModelConfig& c, const char* what) {
  const auto& s = z.shape();
  if (s.size() != 2 || s[1] != static_cast<std::size_t>(c.hidden_size) ||
      s[0] % static_cast<std::size_t>(c.seq_len) != 0) {
    throw DimensionError(std::string(what) + ": expected [batch*" + std::to_string(c.seq_len) + " x " +
                         std::to_string(c.hidden_size) + "], got " + num::shape_string(s));
  }
}

}  // namespace

HrmModel::HrmModel(const ModelConfig& config, std::uint64_t seed) : config_(config) {
  config_.validate();
  std::mt19937_64 rng(seed);
  const auto d = static_cast<std::size_t>(config_.hidden_size);
  const float d_std = 1.0f / std::sqrt(static_cast<float>(d));

  embed_ = normal_param(rng, {static_cast<std::size_t>(config_.vocab_size), d}, d_std);
  for (int i = 0; i < config_.l_layers; ++i) l_blocks_.push_back(make_block(rng, config_));
  for (int i = 0; i < config_.h_layers; ++i) h_blocks_.push_back(make_block(rng, config_));
  head_w1_ = normal_param(rng, {d, d}, d_std);
  head_b1_ = const_param({d}, 0.0f);
  head_w2_ = normal_param(rng, {d, static_cast<std::size_t>(config_.action_count)}, d_std);
  head_b2_ = const_param({static_cast<std::size_t>(config_.action_count)}, 0.0f);

  // z0 draws from its own stream so changing layer shapes does not move it.
  std::mt19937_64 z_rng(seed ^ 0x9e3779b97f4a7c15ULL);
  std::normal_distribution<float> dist(0.0f, d_std);
  const auto seq = static_cast<std::size_t>(config_.seq_len);
  auto broadcast_row = [&] {
    std::vector<float> row(d);
    for (float& v : row) v = dist(z_rng);
    Tensor t({seq, d});
    for (std::size_t s = 0; s < seq; ++s) std::copy(row.begin(), row.end(), t.raw() + s * d);
    return t;
  };
  z0_.z_l = broadcast_row();
  z0_.z_h = broadcast_row();
}

HrmModel HrmModel::clone() const {
  HrmModel m;
  m.config_ = config_;
  m.embed_ = clone_var(embed_);
  for (const auto& b : l_blocks_) m.l_blocks_.push_back(clone_block(b));
  for (const auto& b : h_blocks_) m.h_blocks_.push_back(clone_block(b));
  m.head_w1_ = clone_var(head_w1_);
  m.head_b1_ = clone_var(head_b1_);
  m.head_w2_ = clone_var(head_w2_);
  m.head_b2_ = clone_var(head_b2_);
  m.z0_ = z0_;
  return m;
}

void HrmModel::copy_values_from(const HrmModel& other) {
  if (!(other.config_ == config_)) throw DimensionError("copy_values_from: model configs differ");
  auto mine = named_parameters();
  auto theirs = other.named_parameters();
  for (std::size_t i = 0; i < mine.size(); ++i) mine[i].var.value_mut() = theirs[i].var.value();
  z0_ = other.z0_;
}

std::vector<NamedParameter> HrmModel::named_parameters() const {
  std::vector<NamedParameter> out;
  out.push_back({"embed.weight", embed_});
  for (std::size_t i = 0; i < l_blocks_.size(); ++i) append_block(out, "l." + std::to_string(i), l_blocks_[i]);
  for (std::size_t i = 0; i < h_blocks_.size(); ++i) append_block(out, "h." + std::to_string(i), h_blocks_[i]);
  out.push_back({"head.fc1.weight", head_w1_});
  out.push_back({"head.fc1.bias", head_b1_});
  out.push_back({"head.fc2.weight", head_w2_});
  out.push_back({"head.fc2.bias", head_b2_});
  return out;
}

std::vector<Var> HrmModel::body_parameters() const {
  std::vector<Var> out;
  for (auto& p : named_parameters()) {
    if (p.name != "embed.weight") out.push_back(p.var);
  }
  return out;
}

std::size_t HrmModel::parameter_count() const {
  std::size_t n = 0;
  for (const auto& p : named_parameters()) n += p.var.numel();
  return n;
}

Var embed_observation(const HrmModel& model, std::span<const std::uint8_t> tokens) {
  const ModelConfig& c = model.config();
  if (tokens.empty() || tokens.size() % static_cast<std::size_t>(c.seq_len) != 0) {
    throw InputError("observation length " + std::to_string(tokens.size()) + " is not a multiple of " +
                     std::to_string(c.seq_len));
  }
  std::vector<int> ids(tokens.begin(), tokens.end());
  return num::scale(num::embedding(model.embed_table(), ids), std::sqrt(static_cast<float>(c.hidden_size)));
}

Var l_step(const HrmModel& model, const Var& z_l, const Var& z_h, const Var& x) {
  check_latent_rows(z_l, model.config(), "l_step");
  return stack_forward(model.l_blocks(), num::add(num::add(z_l, z_h), x), model.config());
}

Var h_step(const HrmModel& model, const Var& z_h, const Var& z_l) {
  check_latent_rows(z_h, model.config(), "h_step");
  return stack_forward(model.h_blocks(), num::add(z_h, z_l), model.config());
}

Var dqn_head(const HrmModel& model, const Var& z_h) {
  const ModelConfig& c = model.config();
  check_latent_rows(z_h, c, "dqn_head");
  const std::size_t batch = z_h.shape()[0] / static_cast<std::size_t>(c.seq_len);
  Var pooled = num::mean_pool_rows(z_h, batch);
  Var hidden = num::silu(num::linear(pooled, model.head_fc1_weight(), model.head_fc1_bias()));
  return num::linear(hidden, model.head_fc2_weight(), model.head_fc2_bias());
}

namespace {

void run_segment(const HrmModel& model, Var& z_l, Var& z_h, const Var& x, RecurrentTrace* trace) {
  const ModelConfig& c = model.config();
  for (int h = 0; h < c.h_cycles; ++h) {
    for (int l = 0; l < c.l_cycles; ++l) z_l = l_step(model, z_l, z_h, x);
    if (trace) trace->entries.push_back({TraceTag::LBlock, z_l.value(), z_h.value()});
    z_h = h_step(model, z_h, z_l);
    if (trace) trace->entries.push_back({TraceTag::HUpdate, z_l.value(), z_h.value()});
  }
}

}  // namespace

ForwardResult recurrent_forward(const HrmModel& model, const Var& x, const LatentState& z_init,
                                RecurrentTrace* trace) {
  const ModelConfig& c = model.config();
  check_latent_rows(x, c, "recurrent_forward");
  if (z_init.z_l.shape() != x.shape() || z_init.z_h.shape() != x.shape()) {
    throw DimensionError("recurrent_forward: latent " + num::shape_string(z_init.z_l.shape()) +
                         " does not match input " + num::shape_string(x.shape()));
  }
  Var z_l(z_init.z_l);
  Var z_h(z_init.z_h);
  {
    num::NoGradGuard no_grad;
    for (int s = 0; s + 1 < c.recurrent_max_steps; ++s) run_segment(model, z_l, z_h, x, trace);
  }
  // Only the final segment is recorded; it starts from detached values.
  z_l = z_l.detach();
  z_h = z_h.detach();
  run_segment(model, z_l, z_h, x, trace);
  ForwardResult result;
  result.q = dqn_head(model, z_h);
  result.z_final = {z_l.value(), z_h.value()};
  return result;
}

LatentState init_latent(const HrmModel& model, LatentMode mode, const LatentState* prev, bool first_step) {
  if (mode == LatentMode::ResetZ || first_step) return model.initial_latent();
  if (prev == nullptr) throw UsageError("init_latent: CarryZ after the first step needs the previous latent");
  return *prev;
}

LatentState initial_latent_batch(const HrmModel& model, std::size_t batch) {
  std::vector<const LatentState*> parts(batch, &model.initial_latent());
  return stack_latents(parts);
}

}  // namespace hrm::model
