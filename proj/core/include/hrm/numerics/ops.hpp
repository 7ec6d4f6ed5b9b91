#pragma once

#include <cstddef>
#include <span>

#include "hrm/numerics/autograd.hpp"

namespace hrm::num {

// Differentiable operations. Each records its backward rule when called with
// recording enabled and a gradient-requiring input.

Var add(const Var& a, const Var& b);
Var mul(const Var& a, const Var& b);
Var scale(const Var& a, float s);
Var sum(const Var& a);
Var reshape(const Var& a, Shape shape);

/// a[m x k] . b[k x n]
Var matmul(const Var& a, const Var& b);

/// x[rows x in] . weight[in x out] (+ bias[out] when defined).
Var linear(const Var& x, const Var& weight, const Var& bias = {});

/// Numerically stable softmax along `axis`.
Var softmax(const Var& x, std::size_t axis);

inline constexpr float kRmsNormEps = 1e-6f;

/// gain * x / sqrt(mean(x^2) + eps) over the last axis.
Var rms_norm(const Var& x, const Var& gain);

/// Rotary position embedding on x[..., seq, heads, head_dim]; positions has
/// one entry per seq index. Adjacent pairs (2j, 2j+1) rotate by
/// position * 10000^(-2j/head_dim). Throws ConfigError for odd head_dim.
Var rope_apply(const Var& x, std::span<const float> positions);

/// Unmasked scaled dot-product attention over q, k, v[batch, seq, heads, head_dim].
Var attention(const Var& q, const Var& k, const Var& v);

Var silu(const Var& x);
/// silu(gate) * up, elementwise.
Var swiglu(const Var& gate, const Var& up);

/// Row lookup: output row i is table[ids[i]]. Throws InputError for ids
/// outside the table.
Var embedding(const Var& table, std::span<const int> ids);

/// x[groups*n x d] -> per-group mean over its n rows, [groups x d].
Var mean_pool_rows(const Var& x, std::size_t groups);

/// q[batch x k] -> q[b, index[b]], shape [batch].
Var pick(const Var& q, std::span<const int> index);

/// Mean of squared differences against a constant target of equal length.
Var mse_loss(const Var& prediction, const Tensor& target);

}  // namespace hrm::num
