#pragma once

// Brute-force reference evaluations, kept deliberately naive and separate from
// the optimized paths they check.

#include <cmath>
#include <vector>

#include "mixerlab/attention.hpp"
#include "mixerlab/matrix.hpp"
#include "mixerlab/posenc.hpp"
#include "mixerlab/ssm.hpp"

namespace mixerlab::reference {

// Plain i-j-k triple loop.
inline DenseMatrix matmul_naive(const DenseMatrix& a, const DenseMatrix& b) {
  if (a.cols() != b.rows()) throw DimensionError("matmul_naive shape mismatch");
  DenseMatrix out(a.rows(), b.cols());
  for (int i = 0; i < a.rows(); ++i)
    for (int j = 0; j < b.cols(); ++j) {
      double acc = 0.0;
      for (int k = 0; k < a.cols(); ++k) acc += a(i, k) * b(k, j);
      out(i, j) = acc;
    }
  return out;
}

// Direct double-loop evaluation of softmax attention with an explicit
// normalizing sum, no max subtraction.
inline TokenMatrix softmax_attention_direct(const TokenMatrix& x, const AttnParams& p) {
  DenseMatrix q = matmul_naive(x, p.w_q);
  DenseMatrix k = matmul_naive(x, p.w_k);
  DenseMatrix v = matmul_naive(x, p.w_v);
  const int n = x.rows(), d = q.cols(), c = v.cols();
  const double inv_sqrt_d = 1.0 / std::sqrt(static_cast<double>(d));
  TokenMatrix y(n, c);
  for (int i = 0; i < n; ++i) {
    double denom = 0.0;
    std::vector<double> w(n);
    for (int j = 0; j < n; ++j) {
      double dot = 0.0;
      for (int m = 0; m < d; ++m) dot += q(i, m) * k(j, m);
      w[j] = std::exp(dot * inv_sqrt_d);
      denom += w[j];
    }
    for (int j = 0; j < n; ++j) {
      const double wij = w[j] / denom;
      for (int cc = 0; cc < c; ++cc) y(i, cc) += wij * v(j, cc);
    }
  }
  return y;
}

// Un-reordered middle expression of the global linear attention: attention
// weights (Q_i K_j^T) / (sum_j Q_i K_j^T) materialized, then applied to V.
inline TokenMatrix linear_attention_unreordered(const TokenMatrix& x, const AttnParams& p) {
  DenseMatrix q = apply_kernel(p.kernel, matmul_naive(x, p.w_q));
  DenseMatrix k = apply_kernel(p.kernel, matmul_naive(x, p.w_k));
  DenseMatrix v = matmul_naive(x, p.w_v);
  const int n = x.rows(), d = q.cols(), c = v.cols();
  TokenMatrix y(n, c);
  for (int i = 0; i < n; ++i) {
    std::vector<double> w(n);
    double denom = 0.0;
    for (int j = 0; j < n; ++j) {
      double dot = 0.0;
      for (int m = 0; m < d; ++m) dot += q(i, m) * k(j, m);
      w[j] = dot;
      denom += dot;
    }
    for (int j = 0; j < n; ++j) {
      const double wij = w[j] / denom;
      for (int cc = 0; cc < c; ++cc) y(i, cc) += wij * v(j, cc);
    }
  }
  return y;
}

// Causal linear attention by per-i brute-force prefix sums (no running state).
inline TokenMatrix linear_attention_causal_bruteforce(const TokenMatrix& x,
                                                      const AttnParams& p) {
  DenseMatrix q = apply_kernel(p.kernel, matmul_naive(x, p.w_q));
  DenseMatrix k = apply_kernel(p.kernel, matmul_naive(x, p.w_k));
  DenseMatrix v = matmul_naive(x, p.w_v);
  const int n = x.rows(), d = q.cols(), c = v.cols();
  TokenMatrix y(n, c);
  for (int i = 0; i < n; ++i) {
    DenseMatrix s(d, c);
    std::vector<double> z(d, 0.0);
    for (int j = 0; j <= i; ++j)
      for (int m = 0; m < d; ++m) {
        z[m] += k(j, m);
        for (int cc = 0; cc < c; ++cc) s(m, cc) += k(j, m) * v(j, cc);
      }
    double den = 0.0;
    for (int m = 0; m < d; ++m) den += q(i, m) * z[m];
    for (int cc = 0; cc < c; ++cc) {
      double num = 0.0;
      for (int m = 0; m < d; ++m) num += q(i, m) * s(m, cc);
      y(i, cc) = num / den;
    }
  }
  return y;
}

// Unrolled convolution form of the fixed-parameter scalar SSM:
// y_i = sum_{j<=i} c . (a_bar^(i-j) (.) b_bar) x_j + d_skip x_i.
inline std::vector<double> scalar_ssm_convolution(const std::vector<double>& x,
                                                  const ScalarSsm& p) {
  const size_t n = x.size(), d = p.a_bar.size();
  std::vector<double> y(n, 0.0);
  for (size_t i = 0; i < n; ++i) {
    double acc = 0.0;
    for (size_t j = 0; j <= i; ++j) {
      double kernel = 0.0;
      for (size_t m = 0; m < d; ++m) {
        kernel += p.c[m] * std::pow(p.a_bar[m], static_cast<double>(i - j)) * p.b_bar[m];
      }
      acc += kernel * x[j];
    }
    y[i] = acc + p.d_skip * x[i];
  }
  return y;
}

// Fully unrolled selective scan, scalar loops over every channel and state
// dimension, with the diagonal transition materialized per step.
inline TokenMatrix selective_scan_scalar_unroll(const TokenMatrix& x, const SsmParams& p) {
  const int n = x.rows(), c = x.cols(), d = p.state_dim;
  DenseMatrix b_proj = matmul_naive(x, p.w_b);
  DenseMatrix c_proj = matmul_naive(x, p.w_c);
  DenseMatrix delta = matmul_naive(matmul_naive(x, p.w_1), p.w_2);
  for (auto& v : delta.data()) v = softplus(v);

  TokenMatrix y(n, c);
  for (int ch = 0; ch < c; ++ch) {
    std::vector<double> h(d, 0.0);
    for (int i = 0; i < n; ++i) {
      double out = 0.0;
      for (int m = 0; m < d; ++m) {
        const double a_bar = std::exp(p.a_diag[m] * delta(i, ch));
        h[m] = a_bar * h[m] + b_proj(i, m) * (delta(i, ch) * x(i, ch));
        out += c_proj(i, m) * h[m];
      }
      y(i, ch) = out + p.d_skip[ch] * x(i, ch);
    }
  }
  return y;
}

// Matrix form of the per-channel recurrence: the diagonal transition is
// materialized as a full d x d matrix and applied by matmul.
inline TokenMatrix selective_scan_matrix_form(const TokenMatrix& x, const SsmParams& p) {
  const int n = x.rows(), c = x.cols(), d = p.state_dim;
  DenseMatrix b_proj = matmul_naive(x, p.w_b);
  DenseMatrix c_proj = matmul_naive(x, p.w_c);
  DenseMatrix delta = matmul_naive(matmul_naive(x, p.w_1), p.w_2);
  for (auto& v : delta.data()) v = softplus(v);

  TokenMatrix y(n, c);
  for (int ch = 0; ch < c; ++ch) {
    DenseMatrix h(d, 1);
    for (int i = 0; i < n; ++i) {
      DenseMatrix a_bar(d, d);
      for (int m = 0; m < d; ++m) a_bar(m, m) = std::exp(p.a_diag[m] * delta(i, ch));
      DenseMatrix hb = matmul_naive(a_bar, h);
      const double scaled_x = delta(i, ch) * x(i, ch);
      for (int m = 0; m < d; ++m) hb(m, 0) += b_proj(i, m) * scaled_x;
      h = hb;
      double out = 0.0;
      for (int m = 0; m < d; ++m) out += c_proj(i, m) * h(m, 0);
      y(i, ch) = out + p.d_skip[ch] * x(i, ch);
    }
  }
  return y;
}

// Hadamard rewrite of the same recurrence, d x 1 vectors per channel.
inline TokenMatrix selective_scan_hadamard_form(const TokenMatrix& x, const SsmParams& p) {
  const int n = x.rows(), c = x.cols(), d = p.state_dim;
  DenseMatrix b_proj = matmul_naive(x, p.w_b);
  DenseMatrix c_proj = matmul_naive(x, p.w_c);
  DenseMatrix delta = matmul_naive(matmul_naive(x, p.w_1), p.w_2);
  for (auto& v : delta.data()) v = softplus(v);

  TokenMatrix y(n, c);
  for (int ch = 0; ch < c; ++ch) {
    std::vector<double> h(d, 0.0), gate(d);
    for (int i = 0; i < n; ++i) {
      for (int m = 0; m < d; ++m) gate[m] = std::exp(p.a_diag[m] * delta(i, ch));
      const double scaled_x = delta(i, ch) * x(i, ch);
      double out = 0.0;
      for (int m = 0; m < d; ++m) {
        h[m] = gate[m] * h[m] + b_proj(i, m) * scaled_x;
        out += c_proj(i, m) * h[m];
      }
      y(i, ch) = out + p.d_skip[ch] * x(i, ch);
    }
  }
  return y;
}

// Sliding-window depthwise convolution with explicit zero tests.
inline TokenMatrix depthwise_conv2d_window(const TokenMatrix& x, const Grid2D& grid,
                                           const DepthwiseKernel& kern) {
  const int h = grid.height, w = grid.width, c = x.cols(), k = kern.k, r = k / 2;
  TokenMatrix out(x.rows(), c);
  for (int ch = 0; ch < c; ++ch)
    for (int row = 0; row < h; ++row)
      for (int col = 0; col < w; ++col) {
        double acc = 0.0;
        for (int kr = 0; kr < k; ++kr)
          for (int kc = 0; kc < k; ++kc) {
            const int rr = row + kr - r, cc = col + kc - r;
            const double pix = (rr >= 0 && rr < h && cc >= 0 && cc < w)
                                   ? x(rr * w + cc, ch)
                                   : 0.0;
            acc += kern.weights(ch, kr * k + kc) * pix;
          }
        out(row * w + col, ch) = acc;
      }
  return out;
}

}  // namespace mixerlab::reference
