#pragma once

// Gradient checks shared by the unit tests and the acceptance runner.

#include <algorithm>
#include <cstdint>
#include <functional>
#include <random>
#include <vector>

#include "finite_diff.hpp"
#include "hrm/model/hrm_model.hpp"
#include "hrm/numerics/ops.hpp"
#include "reference_model.hpp"

namespace hrm::oracle {

using OpBuilder = std::function<num::Var(const std::vector<num::Var>&)>;

/// Worst relative error over all inputs of L = sum(w * op(inputs)).
inline double op_gradient_error(const OpBuilder& op, std::vector<num::Tensor> values, std::uint64_t seed) {
  std::vector<num::Var> inputs;
  for (auto& v : values) inputs.emplace_back(v, true);
  num::Var y = op(inputs);
  num::Tensor w = random_tensor(y.shape(), seed + 1000);
  num::backward(num::sum(num::mul(y, num::Var(w))));
  double worst = 0.0;
  for (const num::Var& in : inputs) {
    auto numeric = central_difference(in, [&] { return weighted_sum(op(inputs).value(), w); });
    worst = std::max(worst, relative_error(gather(in.grad(), {}), numeric));
  }
  return worst;
}

inline std::vector<std::uint8_t> random_observation_tokens(std::size_t n, std::uint64_t seed, int vocab = 6) {
  std::mt19937_64 rng(seed);
  std::vector<std::uint8_t> t(n);
  for (auto& v : t) v = static_cast<std::uint8_t>(rng() % static_cast<unsigned>(vocab));
  return t;
}

/// Relative error of the TD-regression loss gradient over 100 sampled
/// parameter entries. The oracle holds the latent entering the recorded
/// segment fixed (a model with one segment fewer computes it), which is what
/// the one-step gradient differentiates. The loss is evaluated in float64.
inline double full_loss_gradient_error(std::uint64_t seed) {
  model::ModelConfig c;
  c.hidden_size = 16;
  c.h_layers = 2;
  c.l_layers = 2;
  c.heads = 2;
  c.expansion = 2;
  c.h_cycles = 2;
  c.l_cycles = 2;
  c.recurrent_max_steps = 2;
  model::HrmModel m(c, seed);
  const std::size_t batch = 2;
  auto tokens = random_observation_tokens(121 * batch, seed + 1);
  std::vector<int> actions{static_cast<int>(seed % 4), static_cast<int>((seed + 1) % 4)};
  num::Tensor y({batch}, {0.3f, -0.2f});

  num::Var x = model::embed_observation(m, tokens);
  auto out = model::recurrent_forward(m, x, model::initial_latent_batch(m, batch));
  num::backward(num::mse_loss(num::pick(out.q, actions), y));

  model::ModelConfig pre_c = c;
  pre_c.recurrent_max_steps = 1;
  model::HrmModel pre(pre_c, seed);
  model::LatentState z_pre;
  {
    num::NoGradGuard no_grad;
    z_pre = model::recurrent_forward(pre, model::embed_observation(pre, tokens),
                                      model::initial_latent_batch(pre, batch))
                .z_final;
  }
  model::HrmModel last(pre_c, seed);
  auto loss = [&] {
    const auto q = reference_q(last, tokens, z_pre);
    double acc = 0.0;
    for (std::size_t b = 0; b < batch; ++b) {
      const double d = q[b * 4 + static_cast<std::size_t>(actions[b])] - y[b];
      acc += d * d;
    }
    return acc / double(batch);
  };

  std::mt19937_64 rng(seed);
  auto params = m.named_parameters();
  auto last_params = last.named_parameters();
  std::vector<double> analytic, numeric;
  for (int i = 0; i < 100; ++i) {
    const std::size_t p = rng() % params.size();
    const std::size_t e = rng() % params[p].var.numel();
    analytic.push_back(params[p].var.grad()[e]);
    numeric.push_back(central_difference(last_params[p].var, loss, {e})[0]);
  }
  return relative_error(analytic, numeric);
}

}  // namespace hrm::oracle
