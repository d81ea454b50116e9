#pragma once

#include <cmath>
#include <string>
#include <utility>
#include <vector>

#include "mixerlab/matrix.hpp"
#include "mixerlab/numerics.hpp"

namespace mixerlab {

// Selective SSM parameter bundle. a_diag holds the (strictly negative)
// diagonal of A; B, C and the timescale are predicted from the input via
// w_b, w_c and the low-rank pair w_1 w_2; d_skip is the learnable shortcut.
struct SsmParams {
  std::vector<double> a_diag;  // d, all entries < 0
  DenseMatrix w_b;             // C x d
  DenseMatrix w_c;             // C x d
  DenseMatrix w_1;             // C x C0
  DenseMatrix w_2;             // C0 x C
  std::vector<double> d_skip;  // C
  int state_dim = 0;           // d
  int low_rank = 0;            // C0

  int channels() const { return w_b.rows(); }
};

inline void check_ssm_params(const SsmParams& p) {
  if (static_cast<int>(p.a_diag.size()) != p.state_dim) {
    throw DimensionError("a_diag length must equal state_dim");
  }
  for (double a : p.a_diag) {
    if (!(a < 0.0)) throw NumericError("a_diag entries must be strictly negative");
  }
  const int c = p.w_b.rows();
  if (p.w_b.cols() != p.state_dim || p.w_c.rows() != c || p.w_c.cols() != p.state_dim ||
      p.w_1.rows() != c || p.w_1.cols() != p.low_rank || p.w_2.rows() != p.low_rank ||
      p.w_2.cols() != c || static_cast<int>(p.d_skip.size()) != c) {
    throw DimensionError("inconsistent selective-SSM parameter shapes");
  }
}

// a_diag is drawn as -exp(u), u ~ U[-4, 0], giving log-spaced magnitudes in
// (-1, -0.018]. D starts at all-ones so the shortcut is active from step one.
inline SsmParams make_ssm_params(Rng& rng, int channels, int state_dim, int low_rank = 0) {
  if (low_rank <= 0) low_rank = std::max(1, channels / 16);
  SsmParams p;
  p.state_dim = state_dim;
  p.low_rank = low_rank;
  Rng ra = rng.split(1), rb = rng.split(2), rc = rng.split(3), r1 = rng.split(4),
      r2 = rng.split(5);
  p.a_diag.resize(state_dim);
  for (auto& a : p.a_diag) a = -std::exp(ra.uniform(-4.0, 0.0));
  p.w_b = init_projection(rb, channels, state_dim);
  p.w_c = init_projection(rc, channels, state_dim);
  p.w_1 = init_projection(r1, channels, low_rank);
  p.w_2 = init_projection(r2, low_rank, channels);
  p.d_skip.assign(channels, 1.0);
  check_ssm_params(p);
  return p;
}

enum class Discretization { ExactZoh, Simplified };

// Zero-order-hold pair: a_bar in (0,1) elementwise when delta > 0 and a < 0.
struct DiscretizedPair {
  std::vector<double> a_bar;
  std::vector<double> b_bar;
};

// Zero-order-hold discretization of the continuous system
// h'(t) = A h(t) + B x(t) over a timescale delta (the continuous form itself
// is never integrated; it exists only as the origin of these formulas).
// a_bar = exp(delta * a); ExactZoh b_bar = (exp(delta*a) - 1)/a * b for the
// diagonal case; Simplified drops the correction and uses delta * b.
inline DiscretizedPair discretize(const std::vector<double>& a_diag,
                                  const std::vector<double>& b, double delta,
                                  Discretization mode) {
  if (!(delta > 0.0)) {
    throw NumericError("discretization timescale must be positive");
  }
  if (a_diag.size() != b.size()) {
    throw DimensionError("discretize: a and b lengths differ");
  }
  DiscretizedPair out;
  out.a_bar.resize(a_diag.size());
  out.b_bar.resize(a_diag.size());
  for (size_t i = 0; i < a_diag.size(); ++i) {
    const double a = a_diag[i];
    if (a == 0.0) throw NumericError("discretize: zero diagonal entry");
    out.a_bar[i] = std::exp(delta * a);
    if (mode == Discretization::Simplified) {
      out.b_bar[i] = delta * b[i];
    } else {
      out.b_bar[i] = (std::exp(delta * a) - 1.0) / a * b[i];
    }
  }
  return out;
}

// One scalar channel with fixed discretized parameters:
// h_i = a_bar (.) h_{i-1} + b_bar * x_i, y_i = c . h_i + d_skip * x_i.
struct ScalarSsm {
  std::vector<double> a_bar;
  std::vector<double> b_bar;
  std::vector<double> c;
  double d_skip = 0.0;
};

inline std::vector<double> discrete_ssm_scalar(const std::vector<double>& x,
                                               const ScalarSsm& p) {
  const size_t d = p.a_bar.size();
  if (p.b_bar.size() != d || p.c.size() != d) {
    throw DimensionError("scalar SSM parameter lengths differ");
  }
  std::vector<double> h(d, 0.0), y(x.size(), 0.0);
  for (size_t i = 0; i < x.size(); ++i) {
    double out = 0.0;
    for (size_t m = 0; m < d; ++m) {
      h[m] = p.a_bar[m] * h[m] + p.b_bar[m] * x[i];
      out += p.c[m] * h[m];
    }
    y[i] = out + p.d_skip * x[i];
  }
  return y;
}

// Input-dependent quantities of one token: B_i = (x_i w_b)^T, C_i = x_i w_c,
// Delta_i = softplus(x_i w_1 w_2), and the d x C forget-gate grid
// gate[m][c] = exp(a_diag[m] * Delta_i[c]).
struct SelectiveGates {
  DenseMatrix delta;                // N x C, strictly positive
  std::vector<DenseMatrix> gate;    // per token, d x C, entries in (0,1)
  DenseMatrix b;                    // N x d (row i is B_i^T)
  DenseMatrix c;                    // N x d (row i is C_i)
};

inline SelectiveGates selective_gates(const TokenMatrix& x, const SsmParams& p) {
  check_ssm_params(p);
  if (x.cols() != p.channels()) {
    throw DimensionError("selective scan: token width does not match parameters");
  }
  SelectiveGates g;
  g.b = matmul(x, p.w_b);
  g.c = matmul(x, p.w_c);
  g.delta = matmul(matmul(x, p.w_1), p.w_2);
  for (auto& v : g.delta.data()) v = softplus(v);
  g.gate.reserve(x.rows());
  for (int i = 0; i < x.rows(); ++i) {
    DenseMatrix gi(p.state_dim, x.cols());
    for (int m = 0; m < p.state_dim; ++m)
      for (int c = 0; c < x.cols(); ++c) gi(m, c) = std::exp(p.a_diag[m] * g.delta(i, c));
    g.gate.push_back(std::move(gi));
  }
  return g;
}

// Hidden state of the selective scan, d x C, zero before the first token.
struct SsmHidden {
  DenseMatrix h;
  int step = 0;

  SsmHidden() = default;
  SsmHidden(int d, int c) : h(d, c), step(0) {}
};

// Per-channel selective scan:
//   h_i = gate_i (.) h_{i-1} + B_i (Delta_i (.) x_i)
//   y_i = C_i h_i + D (.) x_i
// Passing a hidden state continues a previously scanned prefix (the gates are
// functions of the current token only, so chunked evaluation is exact).
inline TokenMatrix selective_scan_serial(const TokenMatrix& x, const SsmParams& p,
                                         SsmHidden* state = nullptr) {
  SelectiveGates g = selective_gates(x, p);
  const int n = x.rows(), c = x.cols(), d = p.state_dim;
  DenseMatrix h(d, c);
  if (state != nullptr && !state->h.empty()) {
    if (state->h.rows() != d || state->h.cols() != c) {
      throw DimensionError("selective scan: carried state shape mismatch");
    }
    h = state->h;
  }
  TokenMatrix y(n, c);
  for (int i = 0; i < n; ++i) {
    const DenseMatrix& gate = g.gate[i];
    for (int m = 0; m < d; ++m) {
      const double bi = g.b(i, m);
      double* h_row = h.row_ptr(m);
      const double* gate_row = gate.row_ptr(m);
      for (int cc = 0; cc < c; ++cc) {
        h_row[cc] = gate_row[cc] * h_row[cc] + bi * (g.delta(i, cc) * x(i, cc));
      }
    }
    double* y_row = y.row_ptr(i);
    for (int m = 0; m < d; ++m) {
      const double ci = g.c(i, m);
      const double* h_row = h.row_ptr(m);
      for (int cc = 0; cc < c; ++cc) y_row[cc] += ci * h_row[cc];
    }
    for (int cc = 0; cc < c; ++cc) y_row[cc] += p.d_skip[cc] * x(i, cc);
  }
  if (state != nullptr) {
    state->h = std::move(h);
    state->step += n;
  }
  return y;
}

// Mean forget-gate value per token plus the k-step attenuation a^k.
struct ForgetGateStats {
  std::vector<double> mean_gate;  // per token
};

inline ForgetGateStats forget_gate_stats(const TokenMatrix& x, const SsmParams& p) {
  SelectiveGates g = selective_gates(x, p);
  ForgetGateStats stats;
  stats.mean_gate.reserve(x.rows());
  for (const DenseMatrix& gate : g.gate) {
    double sum = 0.0;
    for (double v : gate.data()) sum += v;
    stats.mean_gate.push_back(sum / static_cast<double>(gate.size()));
  }
  return stats;
}

// Effective weight of a token k steps back under a constant gate value a.
inline double attenuation(double gate_value, int steps_back) {
  return std::pow(gate_value, steps_back);
}

inline std::vector<double> attenuation_curve(double gate_value, int max_steps) {
  std::vector<double> curve(max_steps + 1);
  for (int k = 0; k <= max_steps; ++k) curve[k] = attenuation(gate_value, k);
  return curve;
}

}  // namespace mixerlab
