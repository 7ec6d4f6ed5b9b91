#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "hrm/numerics/autograd.hpp"

namespace hrm::num {

struct AdamWOptions {
  float lr = 1e-4f;
  float beta1 = 0.9f;
  float beta2 = 0.95f;
  float weight_decay = 0.0f;
  float eps = 1e-8f;
};

/// Moments and step count for one group of parameters.
struct AdamWState {
  AdamWOptions options;
  std::vector<Tensor> m;
  std::vector<Tensor> v;
  std::int64_t step = 0;

  AdamWState() = default;
  AdamWState(AdamWOptions opts, std::span<const Var> params);
};

/// One AdamW step with decoupled weight decay and bias-corrected moments.
/// Parameters without a gradient are treated as having a zero gradient.
void adamw_update(std::span<const Var> params, AdamWState& state);

}  // namespace hrm::num
