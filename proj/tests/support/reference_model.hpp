#pragma once

// Naive double-precision forward pass of the recurrent model, written from the
// architecture description with plain loops. Used as a low-noise oracle.

#include <cmath>
#include <cstdint>
#include <span>
#include <vector>

#include "hrm/model/hrm_model.hpp"

namespace hrm::oracle {

using Mat = std::vector<double>;  // row-major [rows x cols]

inline Mat to_double(const num::Tensor& t) { return Mat(t.data().begin(), t.data().end()); }

inline Mat ref_linear(const Mat& x, std::size_t rows, std::size_t in, const num::Tensor& w, const num::Tensor& b) {
  const std::size_t out = w.dim(1);
  Mat y(rows * out);
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t o = 0; o < out; ++o) {
      double acc = b[o];
      for (std::size_t i = 0; i < in; ++i) acc += x[r * in + i] * double(w[i * out + o]);
      y[r * out + o] = acc;
    }
  }
  return y;
}

inline void ref_rms_norm(Mat& x, std::size_t rows, std::size_t d, const num::Tensor& gain) {
  for (std::size_t r = 0; r < rows; ++r) {
    double ss = 0.0;
    for (std::size_t i = 0; i < d; ++i) ss += x[r * d + i] * x[r * d + i];
    const double inv = 1.0 / std::sqrt(ss / double(d) + 1e-6);
    for (std::size_t i = 0; i < d; ++i) x[r * d + i] *= inv * double(gain[i]);
  }
}

inline void ref_rope(Mat& x, std::size_t batch, std::size_t seq, std::size_t heads, std::size_t hd) {
  for (std::size_t b = 0; b < batch; ++b) {
    for (std::size_t s = 0; s < seq; ++s) {
      for (std::size_t h = 0; h < heads; ++h) {
        double* v = x.data() + ((b * seq + s) * heads + h) * hd;
        for (std::size_t j = 0; j < hd / 2; ++j) {
          const double angle = double(s) * std::pow(10000.0, -2.0 * double(j) / double(hd));
          const double c = std::cos(angle), sn = std::sin(angle);
          const double a = v[2 * j], bb = v[2 * j + 1];
          v[2 * j] = a * c - bb * sn;
          v[2 * j + 1] = a * sn + bb * c;
        }
      }
    }
  }
}

inline Mat ref_block(const model::BlockParams& p, const Mat& x, std::size_t batch, const model::ModelConfig& c) {
  const std::size_t seq = std::size_t(c.seq_len), d = std::size_t(c.hidden_size);
  const std::size_t heads = std::size_t(c.heads), hd = d / heads, rows = batch * seq;
  Mat q = ref_linear(x, rows, d, p.wq.value(), p.bq.value());
  Mat k = ref_linear(x, rows, d, p.wk.value(), p.bk.value());
  const Mat v = ref_linear(x, rows, d, p.wv.value(), p.bv.value());
  ref_rope(q, batch, seq, heads, hd);
  ref_rope(k, batch, seq, heads, hd);
  Mat attn(rows * d, 0.0);
  std::vector<double> w(seq);
  for (std::size_t b = 0; b < batch; ++b) {
    for (std::size_t h = 0; h < heads; ++h) {
      for (std::size_t i = 0; i < seq; ++i) {
        double mx = -1e300;
        for (std::size_t j = 0; j < seq; ++j) {
          double dot = 0.0;
          for (std::size_t e = 0; e < hd; ++e) {
            dot += q[((b * seq + i) * heads + h) * hd + e] * k[((b * seq + j) * heads + h) * hd + e];
          }
          w[j] = dot / std::sqrt(double(hd));
          mx = std::max(mx, w[j]);
        }
        double z = 0.0;
        for (double& a : w) z += (a = std::exp(a - mx));
        for (std::size_t j = 0; j < seq; ++j) {
          for (std::size_t e = 0; e < hd; ++e) {
            attn[((b * seq + i) * heads + h) * hd + e] += w[j] / z * v[((b * seq + j) * heads + h) * hd + e];
          }
        }
      }
    }
  }
  Mat hmat = ref_linear(attn, rows, d, p.wo.value(), p.bo.value());
  for (std::size_t i = 0; i < hmat.size(); ++i) hmat[i] += x[i];
  ref_rms_norm(hmat, rows, d, p.attn_norm.value());

  const std::size_t inner = p.w_gate.value().dim(1);
  const Mat gate = ref_linear(hmat, rows, d, p.w_gate.value(), p.b_gate.value());
  Mat up = ref_linear(hmat, rows, d, p.w_up.value(), p.b_up.value());
  for (std::size_t i = 0; i < up.size(); ++i) up[i] *= gate[i] / (1.0 + std::exp(-gate[i]));
  Mat out = ref_linear(up, rows, inner, p.w_down.value(), p.b_down.value());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += hmat[i];
  ref_rms_norm(out, rows, d, p.mlp_norm.value());
  return out;
}

/// Q values [batch x actions] after recurrent_max_steps segments from z_init.
inline std::vector<double> reference_q(const model::HrmModel& m, std::span<const std::uint8_t> tokens,
                                       const model::LatentState& z_init) {
  const auto& c = m.config();
  const std::size_t seq = std::size_t(c.seq_len), d = std::size_t(c.hidden_size);
  const std::size_t batch = tokens.size() / seq, rows = batch * seq;
  const num::Tensor& table = m.embed_table().value();
  Mat x(rows * d);
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t i = 0; i < d; ++i) x[r * d + i] = double(table[tokens[r] * d + i]) * std::sqrt(double(d));
  }
  Mat zl = to_double(z_init.z_l), zh = to_double(z_init.z_h);
  auto stack = [&](const std::vector<model::BlockParams>& blocks, Mat in) {
    for (const auto& b : blocks) in = ref_block(b, in, batch, c);
    return in;
  };
  for (int s = 0; s < c.recurrent_max_steps; ++s) {
    for (int h = 0; h < c.h_cycles; ++h) {
      for (int l = 0; l < c.l_cycles; ++l) {
        Mat in(rows * d);
        for (std::size_t i = 0; i < in.size(); ++i) in[i] = zl[i] + zh[i] + x[i];
        zl = stack(m.l_blocks(), std::move(in));
      }
      Mat in(rows * d);
      for (std::size_t i = 0; i < in.size(); ++i) in[i] = zh[i] + zl[i];
      zh = stack(m.h_blocks(), std::move(in));
    }
  }
  Mat pooled(batch * d, 0.0);
  for (std::size_t b = 0; b < batch; ++b) {
    for (std::size_t s = 0; s < seq; ++s) {
      for (std::size_t i = 0; i < d; ++i) pooled[b * d + i] += zh[(b * seq + s) * d + i] / double(seq);
    }
  }
  Mat hid = ref_linear(pooled, batch, d, m.head_fc1_weight().value(), m.head_fc1_bias().value());
  for (double& v : hid) v = v / (1.0 + std::exp(-v));
  return ref_linear(hid, batch, d, m.head_fc2_weight().value(), m.head_fc2_bias().value());
}

}  // namespace hrm::oracle
