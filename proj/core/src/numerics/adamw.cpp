#include "hrm/numerics/adamw.hpp"

#include <cmath>

#include "hrm/error.hpp"

namespace hrm::num {

AdamWState::AdamWState(AdamWOptions opts, std::span<const Var> params) : options(opts) {
  m.reserve(params.size());
  v.reserve(params.size());
  for (const Var& p : params) {
    m.emplace_back(p.shape());
    v.emplace_back(p.shape());
  }
}

void adamw_update(std::span<const Var> params, AdamWState& state) {
  if (params.size() != state.m.size() || params.size() != state.v.size()) {
    throw DimensionError("adamw_update: optimizer state tracks " + std::to_string(state.m.size()) +
                         " tensors, got " + std::to_string(params.size()));
  }
  const AdamWOptions& o = state.options;
  ++state.step;
  const auto t = static_cast<double>(state.step);
  const float bc1 = static_cast<float>(1.0 - std::pow(static_cast<double>(o.beta1), t));
  const float bc2 = static_cast<float>(1.0 - std::pow(static_cast<double>(o.beta2), t));
  const float decay = 1.0f - o.lr * o.weight_decay;

  for (std::size_t i = 0; i < params.size(); ++i) {
    Tensor& p = params[i].value_mut();
    Tensor& m = state.m[i];
    Tensor& v = state.v[i];
    if (m.shape() != p.shape() || v.shape() != p.shape()) {
      throw DimensionError("adamw_update: moment shape mismatch for parameter " + std::to_string(i));
    }
    const bool has_grad = params[i].has_grad();
    const float* g = has_grad ? params[i].node()->grad.raw() : nullptr;
    for (std::size_t j = 0, n = p.numel(); j < n; ++j) {
      const float gj = g ? g[j] : 0.0f;
      m[j] = o.beta1 * m[j] + (1.0f - o.beta1) * gj;
      v[j] = o.beta2 * v[j] + (1.0f - o.beta2) * gj * gj;
      const float m_hat = m[j] / bc1;
      const float v_hat = v[j] / bc2;
      p[j] = p[j] * decay - o.lr * m_hat / (std::sqrt(v_hat) + o.eps);
    }
  }
}

}  // namespace hrm::num
