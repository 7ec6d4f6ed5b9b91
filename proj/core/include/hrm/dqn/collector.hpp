#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <optional>

#include "hrm/dqn/policy.hpp"
#include "hrm/dqn/replay_buffer.hpp"
#include "hrm/gridworld/maze.hpp"
#include "hrm/model/hrm_model.hpp"
#include "hrm/probe/record.hpp"

namespace hrm::dqn {

using ProbeSink = std::function<void(probe::ProbeRecord&&)>;

struct EpisodeSummary {
  std::uint64_t episode = 0;
  bool success = false;
  int length = 0;
};

/// Acts in one environment with a read-only parameter snapshot.
class Collector {
 public:
  Collector(const grid::EnvConfig& env, std::uint64_t seed, model::LatentMode variant, bool store_latent);

  void set_snapshot(std::shared_ptr<const model::HrmModel> snapshot);
  const std::shared_ptr<const model::HrmModel>& snapshot() const { return snapshot_; }

  /// One environment step. Starts a new episode first when needed.
  Transition step(double epsilon, ActionMode mode, const ProbeSink& probe = {});

  /// Set when the last step finished an episode.
  const std::optional<EpisodeSummary>& last_episode() const { return finished_; }
  std::uint64_t episodes_started() const { return episode_; }
  const grid::MazeEnv& env() const { return env_; }
  std::mt19937_64& policy_rng() { return policy_rng_; }

  /// Drops the carried latent and forces a reset on the next step.
  void restart();

 private:
  grid::MazeEnv env_;
  std::mt19937_64 policy_rng_;
  model::LatentMode variant_;
  bool store_latent_;
  std::shared_ptr<const model::HrmModel> snapshot_;

  bool need_reset_ = true;
  grid::Observation obs_{};
  bool obs_changed_ = false;
  int t_ = 0;
  std::uint64_t episode_ = 0;
  std::optional<model::LatentState> carried_;
  std::optional<EpisodeSummary> finished_;
};

struct ValidationResult {
  int episodes = 0;
  double success_frac = 0.0;
  double mean_ep_len = 0.0;
};

/// Runs `episodes` greedy episodes with a dedicated environment stream.
ValidationResult validate(const model::HrmModel& model, const grid::EnvConfig& env, model::LatentMode variant,
                          int episodes, std::uint64_t seed, const ProbeSink& probe = {});

}  // namespace hrm::dqn
