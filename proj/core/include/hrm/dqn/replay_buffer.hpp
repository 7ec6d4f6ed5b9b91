#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <vector>

#include "hrm/gridworld/maze.hpp"
#include "hrm/model/hrm_model.hpp"

namespace hrm::dqn {

/// A latent stored at bfloat16 precision (z_l rows then z_h rows).
struct CompactLatent {
  std::vector<std::uint16_t> bits;

  bool empty() const { return bits.empty(); }
  static CompactLatent from(const model::LatentState& z);
  /// Rebuilds [rows x hidden] tensors.
  model::LatentState expand(std::size_t hidden) const;
};

struct Transition {
  grid::Observation obs{};
  grid::Observation next_obs{};
  int action = 0;
  float reward = 0.0f;
  bool terminal = false;   // goal reached (d = 1)
  bool truncated = false;  // step limit; bootstraps as non-terminal
  bool env_changed = false;
  std::uint64_t episode = 0;
  int step = 0;
  CompactLatent z_init;  // empty unless collected with stored-latent replay
};

/// Fixed-capacity FIFO ring of transitions.
class ReplayBuffer {
 public:
  explicit ReplayBuffer(std::size_t capacity);

  void push(Transition t);
  std::size_t size() const { return items_.size(); }
  std::size_t capacity() const { return capacity_; }
  std::uint64_t total_pushed() const { return pushed_; }

  /// i-th oldest stored transition.
  const Transition& oldest(std::size_t i) const;
  const Transition& operator[](std::size_t slot) const { return items_[slot]; }

  /// `count` distinct slots drawn uniformly (Floyd's algorithm).
  std::vector<std::size_t> sample(std::size_t count, std::mt19937_64& rng) const;

 private:
  std::size_t capacity_;
  std::size_t cursor_ = 0;
  std::uint64_t pushed_ = 0;
  std::vector<Transition> items_;
};

}  // namespace hrm::dqn
