#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <random>
#include <string>

#include "hrm/dqn/learner.hpp"
#include "hrm/gridworld/maze.hpp"
#include "hrm/model/hrm_model.hpp"

namespace hrm::dqn {

struct TrainingOptions {
  grid::EnvConfig env;
  model::ModelConfig model;
  TrainerConfig trainer;
  model::LatentMode variant = model::LatentMode::CarryZ;
  std::uint64_t seed = 1;
  std::int64_t total_env_steps = 1000000;
  std::int64_t validation_interval = 10000;
  int validation_episodes = 100;
  std::int64_t checkpoint_interval = 50000;
};

struct TrainMetrics {
  std::int64_t env_steps = 0;
  std::int64_t batches = 0;
  double epsilon = 0.0;
  double success_frac = 0.0;
  double mean_ep_len = 0.0;
  double mean_loss = 0.0;  // NaN when no batch ran in the interval
  model::LatentMode variant = model::LatentMode::CarryZ;
  grid::EnvKind env_kind = grid::EnvKind::FourRooms;
  std::uint64_t seed = 0;
};

std::string to_string(model::LatentMode mode);
std::string to_string(grid::EnvKind kind);

/// Writes the metrics CSV header once, then one row per call.
class MetricsCsvWriter {
 public:
  explicit MetricsCsvWriter(std::ostream& out);
  void write(const TrainMetrics& m);

  static const char* header();

 private:
  std::ostream& out_;
};

/// Derives an independent 64-bit seed for a numbered stream.
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream);

class Trainer {
 public:
  using MetricsCallback = std::function<void(const TrainMetrics&)>;
  using CheckpointCallback = std::function<void(const Trainer&, bool final)>;

  explicit Trainer(TrainingOptions options);

  /// Trains until total_env_steps have been collected.
  void run(const MetricsCallback& on_metrics = {}, const CheckpointCallback& on_checkpoint = {});

  const TrainingOptions& options() const { return options_; }
  const Learner& learner() const { return learner_; }
  Learner& learner() { return learner_; }
  std::int64_t env_steps() const { return env_steps_; }
  std::int64_t episodes() const { return episodes_; }
  const std::mt19937_64& sample_rng() const { return sample_rng_; }
  std::uint64_t validation_seed() const { return derive_seed(options_.seed, 2); }

 private:
  void after_env_step(const MetricsCallback& on_metrics, const CheckpointCallback& on_checkpoint,
                      bool& refresh_snapshot);
  TrainMetrics evaluate_now();

  TrainingOptions options_;
  Learner learner_;
  ReplayBuffer buffer_;
  std::mt19937_64 sample_rng_;
  std::int64_t env_steps_ = 0;
  std::int64_t episodes_ = 0;
  double loss_sum_ = 0.0;
  std::int64_t loss_count_ = 0;
};

}  // namespace hrm::dqn
