#include "hrm/dqn/learner.hpp"

#include <algorithm>

#include "hrm/error.hpp"
#include "hrm/numerics/ops.hpp"

namespace hrm::dqn {

using model::LatentState;
using num::Tensor;
using num::Var;

void TrainerConfig::validate() const {
  if (batch_size == 0) throw ConfigError("batch size must be positive");
  if (!(gamma > 0.0f && gamma < 1.0f)) throw ConfigError("discount factor must lie in (0, 1)");
  if (!(target_delay > 0.0f && target_delay < 1.0f)) throw ConfigError("target delay factor must lie in (0, 1)");
  if (collector_workers < 1) throw ConfigError("need at least one collector worker");
  if (collector_update_interval < 1) throw ConfigError("collector update interval must be positive");
  if (env_steps_per_batch < 1) throw ConfigError("env steps per batch must be positive");
  if (replay_capacity < batch_size) throw ConfigError("replay capacity smaller than batch size");
  if (micro_batch == 0) throw ConfigError("micro batch must be positive");
  if (epsilon.decay_steps < 0) throw ConfigError("epsilon decay period must be non-negative");
  for (double e : {epsilon.initial, epsilon.final_value}) {
    if (!(e >= 0.0 && e <= 1.0)) throw ConfigError("epsilon endpoints must lie in [0, 1]");
  }
  for (const auto& o : {model_optimizer, embedding_optimizer}) {
    if (!(o.lr > 0.0f)) throw ConfigError("learning rate must be positive");
    if (!(o.beta1 >= 0.0f && o.beta1 < 1.0f) || !(o.beta2 >= 0.0f && o.beta2 < 1.0f)) {
      throw ConfigError("optimizer betas must lie in [0, 1)");
    }
    if (o.weight_decay < 0.0f) throw ConfigError("weight decay must be non-negative");
  }
}

float bellman_target(float reward, bool terminal, std::span<const float> q_next, float gamma) {
  if (terminal) return reward;
  if (q_next.empty()) throw InputError("bootstrapped target needs next-state values");
  return reward + gamma * *std::max_element(q_next.begin(), q_next.end());
}

Var td_loss(const Var& q_pred, const Tensor& targets) {
  if (q_pred.numel() != targets.numel()) {
    throw DimensionError("td_loss: " + std::to_string(q_pred.numel()) + " predictions vs " +
                         std::to_string(targets.numel()) + " targets");
  }
  return num::mse_loss(q_pred, targets);
}

void polyak_update(std::span<Tensor* const> target, std::span<const Tensor* const> online, float tau) {
  if (target.size() != online.size()) throw DimensionError("polyak_update: parameter count mismatch");
  const float keep = tau;
  const float mix = 1.0f - tau;
  for (std::size_t i = 0; i < target.size(); ++i) {
    Tensor& t = *target[i];
    const Tensor& o = *online[i];
    if (t.shape() != o.shape()) throw DimensionError("polyak_update: shape mismatch");
    float* tp = t.raw();
    const float* op = o.raw();
    for (std::size_t j = 0; j < t.numel(); ++j) tp[j] = keep * tp[j] + mix * op[j];
  }
}

void polyak_update(model::HrmModel& target, const model::HrmModel& online, float tau) {
  auto tp = target.named_parameters();
  auto op = online.named_parameters();
  std::vector<Tensor*> t;
  std::vector<const Tensor*> o;
  for (auto& p : tp) t.push_back(&p.var.value_mut());
  for (auto& p : op) o.push_back(&p.var.value());
  polyak_update(t, o, tau);
}

Learner::Learner(model::HrmModel online, const TrainerConfig& config, model::LatentMode variant)
    : config_(config), variant_(variant), online_(std::move(online)), target_(online_.clone()) {
  config_.validate();
  body_params_ = online_.body_parameters();
  embed_params_ = online_.embedding_parameters();
  model_opt_ = num::AdamWState(config_.model_optimizer, body_params_);
  embed_opt_ = num::AdamWState(config_.embedding_optimizer, embed_params_);
}

BatchResult Learner::train_step(const ReplayBuffer& buffer, std::mt19937_64& rng) {
  if (buffer.size() < config_.batch_size) return {};
  const auto slots = buffer.sample(config_.batch_size, rng);
  return train_on(buffer, slots);
}

BatchResult Learner::train_on(const ReplayBuffer& buffer, std::span<const std::size_t> slots) {
  const std::size_t batch = slots.size();
  if (batch == 0) return {};
  // The batch loss is the mean over all rows, so each chunk's mean is
  // weighted by its share of the batch and gradients accumulate.
  float loss_value = 0.0f;
  for (std::size_t begin = 0; begin < batch; begin += config_.micro_batch) {
    const auto chunk = slots.subspan(begin, std::min(config_.micro_batch, batch - begin));
    loss_value += accumulate_chunk(buffer, chunk, static_cast<float>(chunk.size()) / static_cast<float>(batch));
  }
  num::adamw_update(body_params_, model_opt_);
  num::adamw_update(embed_params_, embed_opt_);
  for (auto& p : body_params_) p.zero_grad();
  for (auto& p : embed_params_) p.zero_grad();
  if (config_.use_target_network) polyak_update(target_, online_, config_.target_delay);
  ++batches_;
  return {true, loss_value};
}

float Learner::accumulate_chunk(const ReplayBuffer& buffer, std::span<const std::size_t> slots, float weight) {
  const auto& mc = online_.config();
  const std::size_t seq = static_cast<std::size_t>(mc.seq_len);
  const std::size_t hidden = static_cast<std::size_t>(mc.hidden_size);
  const std::size_t batch = slots.size();

  std::vector<std::uint8_t> tokens;
  tokens.reserve(batch * seq);
  std::vector<int> actions;
  std::vector<LatentState> stored;
  std::vector<const LatentState*> parts;
  const bool use_stored = config_.replay_latent == ReplayLatent::Stored && variant_ == model::LatentMode::CarryZ;
  stored.reserve(batch);
  for (std::size_t s : slots) {
    const Transition& t = buffer[s];
    tokens.insert(tokens.end(), t.obs.begin(), t.obs.end());
    actions.push_back(t.action);
    if (use_stored && !t.z_init.empty()) {
      stored.push_back(t.z_init.expand(hidden));
    } else {
      stored.push_back(online_.initial_latent());
    }
  }
  for (const auto& z : stored) parts.push_back(&z);
  const LatentState z_init = model::stack_latents(parts);

  const Var x = model::embed_observation(online_, tokens);
  model::ForwardResult fwd = model::recurrent_forward(online_, x, z_init);

  Tensor targets({batch});
  std::vector<std::size_t> open_rows;
  for (std::size_t i = 0; i < batch; ++i) {
    if (!buffer[slots[i]].terminal) open_rows.push_back(i);
  }
  std::vector<float> q_next_all;
  if (!open_rows.empty()) {
    num::NoGradGuard no_grad;
    std::vector<std::uint8_t> next_tokens;
    next_tokens.reserve(open_rows.size() * seq);
    std::vector<LatentState> next_latents;
    next_latents.reserve(open_rows.size());
    for (std::size_t r : open_rows) {
      const Transition& t = buffer[slots[r]];
      next_tokens.insert(next_tokens.end(), t.next_obs.begin(), t.next_obs.end());
      if (use_stored) {
        next_latents.push_back(model::slice_latent(fwd.z_final, r, seq));
      } else {
        next_latents.push_back(online_.initial_latent());
      }
    }
    std::vector<const LatentState*> next_parts;
    for (const auto& z : next_latents) next_parts.push_back(&z);
    const model::HrmModel& net = config_.use_target_network ? target_ : online_;
    const Var nx = model::embed_observation(net, next_tokens);
    const model::ForwardResult nf = model::recurrent_forward(net, nx, model::stack_latents(next_parts));
    const auto q = nf.q.value().data();
    q_next_all.assign(q.begin(), q.end());
  }
  const std::size_t a = static_cast<std::size_t>(mc.action_count);
  std::size_t k = 0;
  for (std::size_t i = 0; i < batch; ++i) {
    const Transition& t = buffer[slots[i]];
    if (t.terminal) {
      targets[i] = bellman_target(t.reward, true, {}, config_.gamma);
    } else {
      targets[i] = bellman_target(t.reward, false, std::span<const float>(q_next_all).subspan(k * a, a),
                                  config_.gamma);
      ++k;
    }
  }

  const Var loss = td_loss(num::pick(fwd.q, actions), targets);
  const float chunk_loss = loss.value()[0];
  num::backward(weight == 1.0f ? loss : num::scale(loss, weight));
  return weight * chunk_loss;
}

}  // namespace hrm::dqn
