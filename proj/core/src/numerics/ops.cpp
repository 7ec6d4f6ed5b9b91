#include "hrm/numerics/ops.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "hrm/error.hpp"

namespace hrm::num {

namespace {

using RowMat = Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MatMap = Eigen::Map<RowMat>;
using ConstMatMap = Eigen::Map<const RowMat>;
using StridedMap = Eigen::Map<RowMat, 0, Eigen::OuterStride<>>;
using ConstStridedMap = Eigen::Map<const RowMat, 0, Eigen::OuterStride<>>;
using VecMap = Eigen::Map<Eigen::VectorXf>;
using ConstVecMap = Eigen::Map<const Eigen::VectorXf>;

ConstMatMap as_matrix(const Tensor& t) {
  return ConstMatMap(t.raw(), static_cast<Eigen::Index>(t.dim(0)), static_cast<Eigen::Index>(t.dim(1)));
}
MatMap as_matrix(Tensor& t) {
  return MatMap(t.raw(), static_cast<Eigen::Index>(t.dim(0)), static_cast<Eigen::Index>(t.dim(1)));
}

// Builds the message only on failure.
#define HRM_REQUIRE(cond, what)                    \
  do {                                             \
    if (!(cond)) throw DimensionError(what);       \
  } while (0)

void require_same_shape(const Var& a, const Var& b, const char* op) {
  HRM_REQUIRE(a.shape() == b.shape(), std::string(op) + ": shape mismatch " + shape_string(a.shape()) +
                                      " vs " + shape_string(b.shape()));
}

void require_rank(const Var& a, std::size_t rank, const char* op) {
  HRM_REQUIRE(a.value().rank() == rank, std::string(op) + ": expected rank " + std::to_string(rank) +
                                        ", got " + shape_string(a.shape()));
}

bool wants(const Node& self, std::size_t i) { return self.inputs[i]->requires_grad; }

}  // namespace

Var add(const Var& a, const Var& b) {
  require_same_shape(a, b, "add");
  Tensor out = a.value();
  float* o = out.raw();
  const float* bv = b.value().raw();
  for (std::size_t i = 0, n = out.numel(); i < n; ++i) o[i] += bv[i];
  return make_result(std::move(out), {a, b}, "add", [](Node& self) {
    for (std::size_t i = 0; i < 2; ++i) {
      if (wants(self, i)) self.inputs[i]->accumulate(self.grad);
    }
  });
}

Var mul(const Var& a, const Var& b) {
  require_same_shape(a, b, "mul");
  Tensor out = a.value();
  float* o = out.raw();
  const float* bv = b.value().raw();
  for (std::size_t i = 0, n = out.numel(); i < n; ++i) o[i] *= bv[i];
  return make_result(std::move(out), {a, b}, "mul", [](Node& self) {
    for (std::size_t i = 0; i < 2; ++i) {
      if (!wants(self, i)) continue;
      Tensor g = self.grad;
      const float* other = self.inputs[1 - i]->value.raw();
      for (std::size_t j = 0, n = g.numel(); j < n; ++j) g[j] *= other[j];
      self.inputs[i]->accumulate(g);
    }
  });
}

Var scale(const Var& a, float s) {
  Tensor out = a.value();
  for (float& v : out.data()) v *= s;
  return make_result(std::move(out), {a}, "scale", [s](Node& self) {
    Tensor g = self.grad;
    for (float& v : g.data()) v *= s;
    self.inputs[0]->accumulate(g);
  });
}

Var sum(const Var& a) {
  double total = 0.0;
  for (float v : a.value().data()) total += v;
  return make_result(Tensor(Shape{}, static_cast<float>(total)), {a}, "sum", [](Node& self) {
    self.inputs[0]->accumulate(Tensor(self.inputs[0]->value.shape(), self.grad[0]));
  });
}

Var reshape(const Var& a, Shape shape) {
  Tensor out = a.value().reshaped(std::move(shape));
  return make_result(std::move(out), {a}, "reshape", [](Node& self) {
    self.inputs[0]->accumulate(self.grad.reshaped(self.inputs[0]->value.shape()));
  });
}

Var matmul(const Var& a, const Var& b) {
  require_rank(a, 2, "matmul");
  require_rank(b, 2, "matmul");
  HRM_REQUIRE(a.shape()[1] == b.shape()[0], "matmul: inner extents differ " + shape_string(a.shape()) +
                                            " . " + shape_string(b.shape()));
  Tensor out = Tensor::uninitialized(Shape{a.shape()[0], b.shape()[1]});
  as_matrix(out).noalias() = as_matrix(a.value()) * as_matrix(b.value());
  return make_result(std::move(out), {a, b}, "matmul", [](Node& self) {
    const Tensor& av = self.inputs[0]->value;
    const Tensor& bv = self.inputs[1]->value;
    auto g = as_matrix(self.grad);
    if (wants(self, 0)) {
      Tensor& da = self.inputs[0]->grad_buffer();
      as_matrix(da).noalias() += g * as_matrix(bv).transpose();
    }
    if (wants(self, 1)) {
      Tensor& db = self.inputs[1]->grad_buffer();
      as_matrix(db).noalias() += as_matrix(av).transpose() * g;
    }
  });
}

Var linear(const Var& x, const Var& weight, const Var& bias) {
  require_rank(x, 2, "linear");
  require_rank(weight, 2, "linear");
  const std::size_t in = weight.shape()[0];
  const std::size_t out_dim = weight.shape()[1];
  HRM_REQUIRE(x.shape()[1] == in, "linear: input width " + std::to_string(x.shape()[1]) +
                                  " does not match weight " + shape_string(weight.shape()));
  const bool has_bias = bias.defined();
  if (has_bias) HRM_REQUIRE(bias.shape() == Shape{out_dim}, "linear: bias shape " + shape_string(bias.shape()));

  Tensor out = Tensor::uninitialized(Shape{x.shape()[0], out_dim});
  auto o = as_matrix(out);
  o.noalias() = as_matrix(x.value()) * as_matrix(weight.value());
  if (has_bias) o.rowwise() += ConstVecMap(bias.value().raw(), static_cast<Eigen::Index>(out_dim)).transpose();

  std::vector<Var> inputs{x, weight};
  if (has_bias) inputs.push_back(bias);
  return make_result(std::move(out), std::move(inputs), "linear", [](Node& self) {
    auto g = as_matrix(self.grad);
    const Tensor& xv = self.inputs[0]->value;
    const Tensor& wv = self.inputs[1]->value;
    if (wants(self, 0)) as_matrix(self.inputs[0]->grad_buffer()).noalias() += g * as_matrix(wv).transpose();
    if (wants(self, 1)) as_matrix(self.inputs[1]->grad_buffer()).noalias() += as_matrix(xv).transpose() * g;
    if (self.inputs.size() > 2 && wants(self, 2)) {
      Tensor& db = self.inputs[2]->grad_buffer();
      VecMap(db.raw(), static_cast<Eigen::Index>(db.numel())) += g.colwise().sum().transpose();
    }
  });
}

Var softmax(const Var& x, std::size_t axis) {
  const Shape& shape = x.shape();
  HRM_REQUIRE(axis < shape.size(), "softmax: axis " + std::to_string(axis) + " out of range for " +
                                   shape_string(shape));
  std::size_t outer = 1, inner = 1;
  for (std::size_t i = 0; i < axis; ++i) outer *= shape[i];
  for (std::size_t i = axis + 1; i < shape.size(); ++i) inner *= shape[i];
  const std::size_t n = shape[axis];

  Tensor out = Tensor::uninitialized(shape);
  const float* in = x.value().raw();
  float* y = out.raw();
  for (std::size_t o = 0; o < outer; ++o) {
    for (std::size_t j = 0; j < inner; ++j) {
      const std::size_t base = o * n * inner + j;
      float mx = -INFINITY;
      for (std::size_t i = 0; i < n; ++i) mx = std::max(mx, in[base + i * inner]);
      double total = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        const float e = std::exp(in[base + i * inner] - mx);
        y[base + i * inner] = e;
        total += e;
      }
      const float inv = static_cast<float>(1.0 / total);
      for (std::size_t i = 0; i < n; ++i) y[base + i * inner] *= inv;
    }
  }
  return make_result(std::move(out), {x}, "softmax", [outer, inner, n](Node& self) {
    const float* yv = self.value.raw();
    const float* g = self.grad.raw();
    Tensor dx = Tensor::uninitialized(self.value.shape());
    float* d = dx.raw();
    for (std::size_t o = 0; o < outer; ++o) {
      for (std::size_t j = 0; j < inner; ++j) {
        const std::size_t base = o * n * inner + j;
        double dot = 0.0;
        for (std::size_t i = 0; i < n; ++i) dot += g[base + i * inner] * yv[base + i * inner];
        for (std::size_t i = 0; i < n; ++i) {
          const std::size_t k = base + i * inner;
          d[k] = yv[k] * (g[k] - static_cast<float>(dot));
        }
      }
    }
    self.inputs[0]->accumulate(dx);
  });
}

Var rms_norm(const Var& x, const Var& gain) {
  const std::size_t d = x.shape().back();
  HRM_REQUIRE(gain.shape() == Shape{d}, "rms_norm: gain " + shape_string(gain.shape()) +
                                        " does not match last axis of " + shape_string(x.shape()));
  const std::size_t rows = x.numel() / d;
  Tensor out = Tensor::uninitialized(x.shape());
  Tensor inv_rms = Tensor::uninitialized(Shape{rows});
  const float* xv = x.value().raw();
  const float* gv = gain.value().raw();
  float* y = out.raw();
  for (std::size_t r = 0; r < rows; ++r) {
    const float* xr = xv + r * d;
    double ss = 0.0;
    for (std::size_t i = 0; i < d; ++i) ss += static_cast<double>(xr[i]) * xr[i];
    const float inv = static_cast<float>(1.0 / std::sqrt(ss / static_cast<double>(d) + kRmsNormEps));
    inv_rms[r] = inv;
    for (std::size_t i = 0; i < d; ++i) y[r * d + i] = gv[i] * xr[i] * inv;
  }
  return make_result(std::move(out), {x, gain}, "rms_norm",
                     [rows, d, inv_rms = std::move(inv_rms)](Node& self) {
    const float* xv = self.inputs[0]->value.raw();
    const float* gv = self.inputs[1]->value.raw();
    const float* g = self.grad.raw();
    if (wants(self, 0)) {
      float* dx = self.inputs[0]->grad_buffer().raw();
      for (std::size_t r = 0; r < rows; ++r) {
        const float inv = inv_rms[r];
        const float* xr = xv + r * d;
        const float* gr = g + r * d;
        double dot = 0.0;
        for (std::size_t i = 0; i < d; ++i) dot += static_cast<double>(gv[i]) * gr[i] * xr[i];
        const float coeff = static_cast<float>(dot) * inv * inv * inv / static_cast<float>(d);
        for (std::size_t i = 0; i < d; ++i) dx[r * d + i] += inv * gv[i] * gr[i] - coeff * xr[i];
      }
    }
    if (wants(self, 1)) {
      float* dg = self.inputs[1]->grad_buffer().raw();
      for (std::size_t r = 0; r < rows; ++r) {
        for (std::size_t i = 0; i < d; ++i) dg[i] += g[r * d + i] * xv[r * d + i] * inv_rms[r];
      }
    }
  });
}

namespace {

struct RopeTables {
  std::vector<float> positions;
  std::size_t head_dim = 0;
  std::vector<float> cos_t, sin_t;
};

// Most calls reuse the same positions, so the last table per thread is kept.
std::shared_ptr<const RopeTables> rope_tables(std::span<const float> positions, std::size_t head_dim) {
  thread_local std::shared_ptr<const RopeTables> cached;
  if (cached && cached->head_dim == head_dim &&
      std::equal(positions.begin(), positions.end(), cached->positions.begin(), cached->positions.end())) {
    return cached;
  }
  auto t = std::make_shared<RopeTables>();
  t->positions.assign(positions.begin(), positions.end());
  t->head_dim = head_dim;
  const std::size_t seq = positions.size();
  const std::size_t pairs = head_dim / 2;
  t->cos_t.resize(seq * pairs);
  t->sin_t.resize(seq * pairs);
  for (std::size_t s = 0; s < seq; ++s) {
    for (std::size_t j = 0; j < pairs; ++j) {
      const double theta = std::pow(10000.0, -2.0 * static_cast<double>(j) / static_cast<double>(head_dim));
      const double angle = static_cast<double>(positions[s]) * theta;
      t->cos_t[s * pairs + j] = static_cast<float>(std::cos(angle));
      t->sin_t[s * pairs + j] = static_cast<float>(std::sin(angle));
    }
  }
  cached = t;
  return t;
}

}  // namespace

Var rope_apply(const Var& x, std::span<const float> positions) {
  const Shape& shape = x.shape();
  HRM_REQUIRE(shape.size() >= 3, "rope_apply: expected [..., seq, heads, head_dim], got " + shape_string(shape));
  const std::size_t head_dim = shape[shape.size() - 1];
  const std::size_t heads = shape[shape.size() - 2];
  const std::size_t seq = shape[shape.size() - 3];
  if (head_dim % 2 != 0) throw ConfigError("rope_apply: head_dim must be even, got " + std::to_string(head_dim));
  HRM_REQUIRE(positions.size() == seq, "rope_apply: " + std::to_string(positions.size()) +
                                       " positions for sequence length " + std::to_string(seq));
  const std::size_t pairs = head_dim / 2;
  const std::shared_ptr<const RopeTables> tables = rope_tables(positions, head_dim);
  const std::vector<float>& cos_t = tables->cos_t;
  const std::vector<float>& sin_t = tables->sin_t;
  const std::size_t outer = x.numel() / (seq * heads * head_dim);

  // direction = +1 rotates forward, -1 applies the transpose (inverse) rotation.
  auto rotate = [=, &cos_t, &sin_t](const float* in, float* out, float direction) {
    for (std::size_t o = 0; o < outer; ++o) {
      for (std::size_t s = 0; s < seq; ++s) {
        for (std::size_t h = 0; h < heads; ++h) {
          const std::size_t base = ((o * seq + s) * heads + h) * head_dim;
          for (std::size_t j = 0; j < pairs; ++j) {
            const float c = cos_t[s * pairs + j];
            const float sn = direction * sin_t[s * pairs + j];
            const float a = in[base + 2 * j];
            const float b = in[base + 2 * j + 1];
            out[base + 2 * j] = a * c - b * sn;
            out[base + 2 * j + 1] = a * sn + b * c;
          }
        }
      }
    }
  };

  Tensor out = Tensor::uninitialized(shape);
  rotate(x.value().raw(), out.raw(), 1.0f);
  return make_result(std::move(out), {x}, "rope_apply", [rotate, tables](Node& self) {
    Tensor dx = Tensor::uninitialized(self.value.shape());
    rotate(self.grad.raw(), dx.raw(), -1.0f);
    self.inputs[0]->accumulate(dx);
  });
}

Var attention(const Var& q, const Var& k, const Var& v) {
  require_rank(q, 4, "attention");
  require_same_shape(q, k, "attention");
  require_same_shape(q, v, "attention");
  const std::size_t batch = q.shape()[0], seq = q.shape()[1], heads = q.shape()[2], hd = q.shape()[3];
  const auto S = static_cast<Eigen::Index>(seq);
  const auto D = static_cast<Eigen::Index>(hd);
  const Eigen::OuterStride<> stride(static_cast<Eigen::Index>(heads * hd));
  const float scale_factor = 1.0f / std::sqrt(static_cast<float>(hd));

  Tensor out = Tensor::uninitialized(q.shape());
  Tensor probs = Tensor::uninitialized(Shape{batch, heads, seq, seq});
  RowMat scores(S, S);
  for (std::size_t b = 0; b < batch; ++b) {
    for (std::size_t h = 0; h < heads; ++h) {
      const std::size_t offset = (b * seq * heads + h) * hd;
      ConstStridedMap qm(q.value().raw() + offset, S, D, stride);
      ConstStridedMap km(k.value().raw() + offset, S, D, stride);
      ConstStridedMap vm(v.value().raw() + offset, S, D, stride);
      StridedMap om(out.raw() + offset, S, D, stride);
      MatMap p(probs.raw() + (b * heads + h) * seq * seq, S, S);
      scores.noalias() = (qm * km.transpose()) * scale_factor;
      for (Eigen::Index r = 0; r < S; ++r) {
        const float mx = scores.row(r).maxCoeff();
        p.row(r) = (scores.row(r).array() - mx).exp();
        p.row(r) /= p.row(r).sum();
      }
      om.noalias() = p * vm;
    }
  }

  return make_result(std::move(out), {q, k, v}, "attention",
                     [=, probs = std::move(probs)](Node& self) {
    const Tensor& qv = self.inputs[0]->value;
    const Tensor& kv = self.inputs[1]->value;
    const Tensor& vv = self.inputs[2]->value;
    float* dq = wants(self, 0) ? self.inputs[0]->grad_buffer().raw() : nullptr;
    float* dk = wants(self, 1) ? self.inputs[1]->grad_buffer().raw() : nullptr;
    float* dv = wants(self, 2) ? self.inputs[2]->grad_buffer().raw() : nullptr;
    RowMat dp(S, S);
    for (std::size_t b = 0; b < batch; ++b) {
      for (std::size_t h = 0; h < heads; ++h) {
        const std::size_t offset = (b * seq * heads + h) * hd;
        ConstStridedMap qm(qv.raw() + offset, S, D, stride);
        ConstStridedMap km(kv.raw() + offset, S, D, stride);
        ConstStridedMap vm(vv.raw() + offset, S, D, stride);
        ConstStridedMap gm(self.grad.raw() + offset, S, D, stride);
        ConstMatMap p(probs.raw() + (b * heads + h) * seq * seq, S, S);
        if (dv) StridedMap(dv + offset, S, D, stride).noalias() += p.transpose() * gm;
        if (!dq && !dk) continue;
        dp.noalias() = gm * vm.transpose();
        // dS = P * (dP - rowsum(dP * P)), folded with the score scale.
        for (Eigen::Index r = 0; r < S; ++r) {
          const float dot = dp.row(r).dot(p.row(r));
          dp.row(r) = (p.row(r).array() * (dp.row(r).array() - dot)) * scale_factor;
        }
        if (dq) StridedMap(dq + offset, S, D, stride).noalias() += dp * km;
        if (dk) StridedMap(dk + offset, S, D, stride).noalias() += dp.transpose() * qm;
      }
    }
  });
}

namespace {


using ArrMap = Eigen::Map<Eigen::ArrayXf>;
using ConstArrMap = Eigen::Map<const Eigen::ArrayXf>;

ConstArrMap as_array(const Tensor& t) { return ConstArrMap(t.raw(), static_cast<Eigen::Index>(t.numel())); }
ArrMap as_array(Tensor& t) { return ArrMap(t.raw(), static_cast<Eigen::Index>(t.numel())); }

Eigen::ArrayXf sigmoid(const ConstArrMap& a) { return (1.0f + (-a).exp()).inverse(); }

}  // namespace

Var silu(const Var& x) {
  const ConstArrMap xa = as_array(x.value());
  Tensor out = Tensor::uninitialized(x.shape());
  as_array(out) = xa * sigmoid(xa);
  return make_result(std::move(out), {x}, "silu", [](Node& self) {
    const ConstArrMap xa = as_array(std::as_const(self.inputs[0]->value));
    const Eigen::ArrayXf s = sigmoid(xa);
    Tensor dx = Tensor::uninitialized(self.grad.shape());
    as_array(dx) = as_array(std::as_const(self.grad)) * s * (1.0f + xa * (1.0f - s));
    self.inputs[0]->accumulate(dx);
  });
}

Var swiglu(const Var& gate, const Var& up) {
  require_same_shape(gate, up, "swiglu");
  const ConstArrMap a = as_array(gate.value());
  const ConstArrMap b = as_array(up.value());
  Tensor out = Tensor::uninitialized(gate.shape());
  as_array(out) = a * sigmoid(a) * b;
  return make_result(std::move(out), {gate, up}, "swiglu", [](Node& self) {
    const ConstArrMap a = as_array(std::as_const(self.inputs[0]->value));
    const ConstArrMap b = as_array(std::as_const(self.inputs[1]->value));
    const ConstArrMap g = as_array(std::as_const(self.grad));
    const Eigen::ArrayXf s = sigmoid(a);
    if (wants(self, 0)) as_array(self.inputs[0]->grad_buffer()) += g * b * s * (1.0f + a * (1.0f - s));
    if (wants(self, 1)) as_array(self.inputs[1]->grad_buffer()) += g * a * s;
  });
}

Var embedding(const Var& table, std::span<const int> ids) {
  require_rank(table, 2, "embedding");
  const std::size_t vocab = table.shape()[0];
  const std::size_t d = table.shape()[1];
  std::vector<int> rows(ids.begin(), ids.end());
  Tensor out = Tensor::uninitialized(Shape{rows.size(), d});
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i] < 0 || static_cast<std::size_t>(rows[i]) >= vocab) {
      throw InputError("token id " + std::to_string(rows[i]) + " outside vocabulary of " + std::to_string(vocab));
    }
    std::copy_n(table.value().raw() + static_cast<std::size_t>(rows[i]) * d, d, out.raw() + i * d);
  }
  return make_result(std::move(out), {table}, "embedding", [rows = std::move(rows), d](Node& self) {
    float* dt = self.inputs[0]->grad_buffer().raw();
    const float* g = self.grad.raw();
    for (std::size_t i = 0; i < rows.size(); ++i) {
      float* dst = dt + static_cast<std::size_t>(rows[i]) * d;
      for (std::size_t j = 0; j < d; ++j) dst[j] += g[i * d + j];
    }
  });
}

Var mean_pool_rows(const Var& x, std::size_t groups) {
  require_rank(x, 2, "mean_pool_rows");
  HRM_REQUIRE(groups > 0 && x.shape()[0] % groups == 0,
          "mean_pool_rows: " + std::to_string(x.shape()[0]) + " rows not divisible into " +
              std::to_string(groups) + " groups");
  const std::size_t n = x.shape()[0] / groups;
  const std::size_t d = x.shape()[1];
  Tensor out({groups, d});
  const float* xv = x.value().raw();
  for (std::size_t g = 0; g < groups; ++g) {
    for (std::size_t j = 0; j < d; ++j) {
      double acc = 0.0;
      for (std::size_t r = 0; r < n; ++r) acc += xv[(g * n + r) * d + j];
      out[g * d + j] = static_cast<float>(acc / static_cast<double>(n));
    }
  }
  return make_result(std::move(out), {x}, "mean_pool_rows", [groups, n, d](Node& self) {
    float* dx = self.inputs[0]->grad_buffer().raw();
    const float inv = 1.0f / static_cast<float>(n);
    for (std::size_t g = 0; g < groups; ++g) {
      for (std::size_t r = 0; r < n; ++r) {
        for (std::size_t j = 0; j < d; ++j) dx[(g * n + r) * d + j] += self.grad[g * d + j] * inv;
      }
    }
  });
}

Var pick(const Var& q, std::span<const int> index) {
  require_rank(q, 2, "pick");
  const std::size_t batch = q.shape()[0];
  const std::size_t width = q.shape()[1];
  HRM_REQUIRE(index.size() == batch, "pick: " + std::to_string(index.size()) + " indices for batch of " +
                                     std::to_string(batch));
  std::vector<int> idx(index.begin(), index.end());
  Tensor out(Shape{batch});
  for (std::size_t b = 0; b < batch; ++b) {
    if (idx[b] < 0 || static_cast<std::size_t>(idx[b]) >= width) {
      throw InputError("pick: index " + std::to_string(idx[b]) + " out of range");
    }
    out[b] = q.value()[b * width + static_cast<std::size_t>(idx[b])];
  }
  return make_result(std::move(out), {q}, "pick", [idx = std::move(idx), width](Node& self) {
    float* dq = self.inputs[0]->grad_buffer().raw();
    for (std::size_t b = 0; b < idx.size(); ++b) dq[b * width + static_cast<std::size_t>(idx[b])] += self.grad[b];
  });
}

Var mse_loss(const Var& prediction, const Tensor& target) {
  HRM_REQUIRE(prediction.numel() == target.numel(),
          "mse_loss: " + std::to_string(prediction.numel()) + " predictions vs " +
              std::to_string(target.numel()) + " targets");
  HRM_REQUIRE(prediction.numel() > 0, "mse_loss: empty batch");
  const std::size_t n = target.numel();
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double diff = static_cast<double>(prediction.value()[i]) - target[i];
    acc += diff * diff;
  }
  return make_result(Tensor(Shape{}, static_cast<float>(acc / static_cast<double>(n))), {prediction}, "mse_loss",
                     [target, n](Node& self) {
    const float coeff = 2.0f * self.grad[0] / static_cast<float>(n);
    Tensor d(self.inputs[0]->value.shape());
    for (std::size_t i = 0; i < n; ++i) d[i] = coeff * (self.inputs[0]->value[i] - target[i]);
    self.inputs[0]->accumulate(d);
  });
}

}  // namespace hrm::num
