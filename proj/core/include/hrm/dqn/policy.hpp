#pragma once

#include <cstdint>
#include <random>
#include <span>

namespace hrm::dqn {

/// Linear decay from `initial` to `final_value` over `decay_steps`, then flat.
struct EpsilonSchedule {
  double initial = 1.0;
  double final_value = 0.15;
  std::int64_t decay_steps = 300000;

  double at(std::int64_t step) const;
};

enum class ActionMode { Train, Validate };

/// Epsilon-greedy over q. Validate ignores epsilon; argmax ties go to the
/// lowest index.
int select_action(std::span<const float> q, double epsilon, std::mt19937_64& rng, ActionMode mode);

int argmax(std::span<const float> q);

}  // namespace hrm::dqn
