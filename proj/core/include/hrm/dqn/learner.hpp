#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <vector>

#include "hrm/dqn/policy.hpp"
#include "hrm/dqn/replay_buffer.hpp"
#include "hrm/model/hrm_model.hpp"
#include "hrm/numerics/adamw.hpp"

namespace hrm::dqn {

/// How replayed observations obtain their initial latent.
enum class ReplayLatent {
  Stored,  // the z_init recorded at collection time
  Reset,   // always z0
};

struct TrainerConfig {
  std::size_t batch_size = 256;
  float gamma = 0.95f;
  float target_delay = 0.999f;
  bool use_target_network = true;
  int collector_workers = 5;
  int collector_update_interval = 8;  // batches between snapshot refreshes
  int env_steps_per_batch = 4;
  std::size_t replay_capacity = 1048576;
  std::size_t learning_starts = 256;  // buffer size before the first batch
  std::size_t micro_batch = 32;      // rows per backward pass; bounds activation memory
  EpsilonSchedule epsilon;
  num::AdamWOptions model_optimizer{1e-4f, 0.9f, 0.95f, 0.0f, 1e-8f};
  num::AdamWOptions embedding_optimizer{1e-2f, 0.9f, 0.95f, 0.1f, 1e-8f};
  ReplayLatent replay_latent = ReplayLatent::Stored;

  void validate() const;
};

/// y = r + gamma * (1 - d) * max(q_next). Terminal targets are exactly r.
float bellman_target(float reward, bool terminal, std::span<const float> q_next, float gamma);

/// Mean squared error between taken-action values and targets.
num::Var td_loss(const num::Var& q_pred, const num::Tensor& targets);

/// target <- tau * target + (1 - tau) * online, elementwise.
void polyak_update(std::span<num::Tensor* const> target, std::span<const num::Tensor* const> online, float tau);
void polyak_update(model::HrmModel& target, const model::HrmModel& online, float tau);

struct BatchResult {
  bool trained = false;
  float loss = 0.0f;
};

/// Owns the online and target networks and both optimizers.
class Learner {
 public:
  Learner(model::HrmModel online, const TrainerConfig& config, model::LatentMode variant);

  /// One gradient batch from `buffer`. Skips when the buffer is smaller than
  /// the batch size.
  BatchResult train_step(const ReplayBuffer& buffer, std::mt19937_64& rng);
  /// Same, on explicit buffer slots.
  BatchResult train_on(const ReplayBuffer& buffer, std::span<const std::size_t> slots);

  const model::HrmModel& online() const { return online_; }
  model::HrmModel& online_mut() { return online_; }
  const model::HrmModel& target() const { return target_; }
  model::HrmModel& target_mut() { return target_; }
  num::AdamWState& model_optimizer() { return model_opt_; }
  num::AdamWState& embedding_optimizer() { return embed_opt_; }
  const num::AdamWState& model_optimizer() const { return model_opt_; }
  const num::AdamWState& embedding_optimizer() const { return embed_opt_; }
  std::int64_t batches() const { return batches_; }
  void set_batches(std::int64_t n) { batches_ = n; }

 private:
  float accumulate_chunk(const ReplayBuffer& buffer, std::span<const std::size_t> slots, float weight);

  TrainerConfig config_;
  model::LatentMode variant_;
  model::HrmModel online_;
  model::HrmModel target_;
  std::vector<num::Var> body_params_;
  std::vector<num::Var> embed_params_;
  num::AdamWState model_opt_;
  num::AdamWState embed_opt_;
  std::int64_t batches_ = 0;
};

}  // namespace hrm::dqn
