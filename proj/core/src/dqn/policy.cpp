#include "hrm/dqn/policy.hpp"

#include <algorithm>

#include "hrm/error.hpp"

namespace hrm::dqn {

double EpsilonSchedule::at(std::int64_t step) const {
  if (step <= 0 || decay_steps <= 0) return step <= 0 ? initial : final_value;
  if (step >= decay_steps) return final_value;
  const double frac = static_cast<double>(step) / static_cast<double>(decay_steps);
  return initial + (final_value - initial) * frac;
}

int argmax(std::span<const float> q) {
  if (q.empty()) throw InputError("argmax of an empty value vector");
  return static_cast<int>(std::max_element(q.begin(), q.end()) - q.begin());
}

int select_action(std::span<const float> q, double epsilon, std::mt19937_64& rng, ActionMode mode) {
  if (q.empty()) throw InputError("select_action needs at least one action value");
  if (mode == ActionMode::Train && std::uniform_real_distribution<double>(0.0, 1.0)(rng) < epsilon) {
    return static_cast<int>(std::uniform_int_distribution<std::size_t>(0, q.size() - 1)(rng));
  }
  return argmax(q);
}

}  // namespace hrm::dqn
