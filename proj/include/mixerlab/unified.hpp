#pragma once

#include <cmath>
#include <string>
#include <utility>
#include <vector>

#include "mixerlab/attention.hpp"
#include "mixerlab/matrix.hpp"
#include "mixerlab/numerics.hpp"
#include "mixerlab/posenc.hpp"
#include "mixerlab/ssm.hpp"

namespace mixerlab {

enum class BlockDesign { Transformer, Mamba, Mila };

struct MixerDims {
  int n = 0;   // informational; forwards accept any token count
  int c = 0;   // channels
  int d = 0;   // query/key width (total across heads)
  int c0 = 1;  // low-rank width of the timescale projection
  int heads = 1;
};

// The six distinctions as data. input_gate scales the value by Delta_i,
// forget_gate decays the state by exp(a_diag * Delta_i), shortcut adds
// D (.) x_i, normalization divides by the running key sum, heads > 1 splits
// channels, block_design is consumed by the block layer.
struct MixerConfig {
  bool input_gate = false;
  bool forget_gate = false;
  bool shortcut = false;
  bool normalization = true;
  int heads = 1;
  BlockDesign block_design = BlockDesign::Transformer;
  MixerDims dims;
};

inline MixerConfig linear_attention_preset(MixerDims dims) {
  MixerConfig cfg;
  cfg.input_gate = false;
  cfg.forget_gate = false;
  cfg.shortcut = false;
  cfg.normalization = true;
  cfg.heads = dims.heads;
  cfg.block_design = BlockDesign::Transformer;
  cfg.dims = dims;
  return cfg;
}

inline MixerConfig selective_ssm_preset(MixerDims dims) {
  MixerConfig cfg;
  cfg.input_gate = true;
  cfg.forget_gate = true;
  cfg.shortcut = true;
  cfg.normalization = false;
  cfg.heads = 1;
  cfg.block_design = BlockDesign::Mamba;
  cfg.dims = dims;
  cfg.dims.heads = 1;
  return cfg;
}

inline MixerConfig mila_preset(MixerDims dims) {
  MixerConfig cfg = linear_attention_preset(dims);
  cfg.block_design = BlockDesign::Mila;
  return cfg;
}

inline MixerConfig preset_config(const std::string& name, MixerDims dims) {
  if (name == "linear-attention") return linear_attention_preset(dims);
  if (name == "selective-ssm") return selective_ssm_preset(dims);
  if (name == "mila") return mila_preset(dims);
  throw DimensionError("unknown preset: " + name +
                       " (expected linear-attention, selective-ssm or mila)");
}

enum class ValuePath { RawInput, Projected };

// Parameter union covering both source formulations. The attention reading
// uses (w_query, w_key, w_value); the SSM reading maps w_query <- W_C,
// w_key <- W_B, value = raw token, plus the gate parameters.
struct UnifiedParams {
  DenseMatrix w_query;  // C x d
  DenseMatrix w_key;    // C x d
  ValuePath value_path = ValuePath::Projected;
  DenseMatrix w_value;  // C x C when Projected
  Kernel kernel = Kernel::EluPlusOne;

  std::vector<double> a_diag;  // d, < 0 when the forget gate is on
  DenseMatrix w_gate_1;        // C x C0
  DenseMatrix w_gate_2;        // C0 x C
  std::vector<double> d_skip;  // C
};

namespace detail {

inline void check_unified(const TokenMatrix& x, const UnifiedParams& p,
                          const MixerConfig& cfg) {
  const int c = x.cols();
  if (p.w_query.rows() != c || p.w_key.rows() != c ||
      p.w_query.cols() != p.w_key.cols()) {
    throw DimensionError("unified mixer: query/key projection shapes inconsistent");
  }
  if (p.value_path == ValuePath::Projected &&
      (p.w_value.rows() != c || p.w_value.cols() != c)) {
    throw DimensionError("unified mixer: w_value must be CxC");
  }
  if (cfg.heads < 1 || c % cfg.heads != 0 || p.w_query.cols() % cfg.heads != 0) {
    throw DimensionError("unified mixer: channels and qk width must divide head count");
  }
  if (cfg.input_gate || cfg.forget_gate) {
    if (p.w_gate_1.rows() != c || p.w_gate_2.cols() != c ||
        p.w_gate_1.cols() != p.w_gate_2.rows()) {
      throw DimensionError("unified mixer: gate projection shapes inconsistent");
    }
  }
  if (cfg.forget_gate) {
    if (static_cast<int>(p.a_diag.size()) != p.w_query.cols()) {
      throw DimensionError("unified mixer: a_diag length must equal qk width");
    }
    for (double a : p.a_diag) {
      if (!(a < 0.0)) {
        throw NumericError("unified mixer: forget gate needs strictly negative a_diag");
      }
    }
  }
  if (cfg.shortcut && static_cast<int>(p.d_skip.size()) != c) {
    throw DimensionError("unified mixer: d_skip length must equal channels");
  }
}

inline UnifiedParams unified_head_slice(const UnifiedParams& p, const MixerConfig& cfg,
                                        int channels, int head) {
  const int h = cfg.heads;
  const int cw = channels / h;
  const int dw = p.w_query.cols() / h;
  UnifiedParams out;
  out.value_path = p.value_path;
  out.kernel = p.kernel;
  out.w_query = DenseMatrix(cw, dw);
  out.w_key = DenseMatrix(cw, dw);
  for (int r = 0; r < cw; ++r)
    for (int c = 0; c < dw; ++c) {
      out.w_query(r, c) = p.w_query(head * cw + r, head * dw + c);
      out.w_key(r, c) = p.w_key(head * cw + r, head * dw + c);
    }
  if (p.value_path == ValuePath::Projected) {
    out.w_value = DenseMatrix(cw, cw);
    for (int r = 0; r < cw; ++r)
      for (int c = 0; c < cw; ++c) out.w_value(r, c) = p.w_value(head * cw + r, head * cw + c);
  }
  if (cfg.forget_gate) {
    out.a_diag.assign(p.a_diag.begin() + head * dw, p.a_diag.begin() + (head + 1) * dw);
  }
  if (cfg.input_gate || cfg.forget_gate) {
    const int c0 = p.w_gate_1.cols();
    out.w_gate_1 = DenseMatrix(cw, c0);
    out.w_gate_2 = DenseMatrix(c0, cw);
    for (int r = 0; r < cw; ++r)
      for (int c = 0; c < c0; ++c) out.w_gate_1(r, c) = p.w_gate_1(head * cw + r, c);
    for (int r = 0; r < c0; ++r)
      for (int c = 0; c < cw; ++c) out.w_gate_2(r, c) = p.w_gate_2(r, head * cw + c);
  }
  if (cfg.shortcut) {
    out.d_skip.assign(p.d_skip.begin() + head * cw, p.d_skip.begin() + (head + 1) * cw);
  }
  return out;
}

// Single-head causal path of the unified rule:
//   S_i = Gf(i) (.) S_{i-1} + K_i^T (Gin(i) (.) V_i)
//   Z_i = Gf(i) (.) Z_{i-1} + K_i^T          (kept per channel)
//   y_i = Q_i S_i / (Q_i Z_i or 1) + (D (.) x_i or 0)
inline TokenMatrix unified_forward_single(const TokenMatrix& x, const UnifiedParams& p,
                                          const MixerConfig& cfg, AttnDiag* diag) {
  const int n = x.rows(), c = x.cols(), d = p.w_query.cols();
  DenseMatrix q = apply_kernel(p.kernel, matmul(x, p.w_query));
  DenseMatrix k = apply_kernel(p.kernel, matmul(x, p.w_key));
  TokenMatrix v = p.value_path == ValuePath::Projected ? matmul(x, p.w_value) : x;

  DenseMatrix delta;
  if (cfg.input_gate || cfg.forget_gate) {
    delta = matmul(matmul(x, p.w_gate_1), p.w_gate_2);
    for (auto& val : delta.data()) val = softplus(val);
  }

  DenseMatrix s(d, c);
  DenseMatrix z;
  if (cfg.normalization) z = DenseMatrix(d, c);

  TokenMatrix y(n, c);
  std::vector<double> gate_row(c);
  for (int i = 0; i < n; ++i) {
    for (int m = 0; m < d; ++m) {
      double* s_row = s.row_ptr(m);
      const double ki = k(i, m);
      if (cfg.forget_gate) {
        const double am = p.a_diag[m];
        for (int cc = 0; cc < c; ++cc) gate_row[cc] = std::exp(am * delta(i, cc));
        for (int cc = 0; cc < c; ++cc) {
          const double gin = cfg.input_gate ? delta(i, cc) : 1.0;
          s_row[cc] = gate_row[cc] * s_row[cc] + ki * (gin * v(i, cc));
        }
        if (cfg.normalization) {
          double* z_row = z.row_ptr(m);
          for (int cc = 0; cc < c; ++cc) z_row[cc] = gate_row[cc] * z_row[cc] + ki;
        }
      } else {
        for (int cc = 0; cc < c; ++cc) {
          const double gin = cfg.input_gate ? delta(i, cc) : 1.0;
          s_row[cc] += ki * (gin * v(i, cc));
        }
        if (cfg.normalization) {
          double* z_row = z.row_ptr(m);
          for (int cc = 0; cc < c; ++cc) z_row[cc] += ki;
        }
      }
    }
    double* y_row = y.row_ptr(i);
    for (int m = 0; m < d; ++m) {
      const double qi = q(i, m);
      const double* s_row = s.row_ptr(m);
      for (int cc = 0; cc < c; ++cc) y_row[cc] += qi * s_row[cc];
    }
    if (cfg.normalization) {
      for (int cc = 0; cc < c; ++cc) {
        double den = 0.0;
        for (int m = 0; m < d; ++m) den += q(i, m) * z(m, cc);
        y_row[cc] /= clamp_denominator(den, diag);
      }
    }
    if (cfg.shortcut) {
      for (int cc = 0; cc < c; ++cc) y_row[cc] += p.d_skip[cc] * x(i, cc);
    }
  }
  return y;
}

}  // namespace detail

// Causal unified mixer. Multi-head applies the whole rule per contiguous
// channel group with per-head parameter slices.
inline TokenMatrix unified_forward(const TokenMatrix& x, const UnifiedParams& p,
                                   const MixerConfig& cfg, AttnDiag* diag = nullptr) {
  detail::check_unified(x, p, cfg);
  if (cfg.normalization && p.kernel == Kernel::Identity) {
    throw NumericError(
        "unified mixer: normalization in causal mode needs a nonnegative kernel");
  }
  if (cfg.heads == 1) return detail::unified_forward_single(x, p, cfg, diag);

  const int cw = x.cols() / cfg.heads;
  TokenMatrix out(x.rows(), x.cols());
  for (int head = 0; head < cfg.heads; ++head) {
    TokenMatrix xs(x.rows(), cw);
    for (int i = 0; i < x.rows(); ++i)
      for (int c = 0; c < cw; ++c) xs(i, c) = x(i, head * cw + c);
    UnifiedParams ps = detail::unified_head_slice(p, cfg, x.cols(), head);
    MixerConfig sub = cfg;
    sub.heads = 1;
    TokenMatrix ys = detail::unified_forward_single(xs, ps, sub, diag);
    for (int i = 0; i < x.rows(); ++i)
      for (int c = 0; c < cw; ++c) out(i, head * cw + c) = ys(i, c);
  }
  return out;
}

// Optional rotary context for the global path: the rotation is applied to the
// numerator's q/k only, the normalization keeps the unrotated (nonnegative)
// features so denominators stay positive.
struct RopeContext {
  Grid2D grid;
  double base = 10000.0;
};

namespace detail {

inline TokenMatrix unified_parallel_single(const TokenMatrix& x, const UnifiedParams& p,
                                           const MixerConfig& cfg, const RopeContext* rope,
                                           AttnDiag* diag) {
  const int n = x.rows(), c = x.cols(), d = p.w_query.cols();
  DenseMatrix q = apply_kernel(p.kernel, matmul(x, p.w_query));
  DenseMatrix k = apply_kernel(p.kernel, matmul(x, p.w_key));
  TokenMatrix v = p.value_path == ValuePath::Projected ? matmul(x, p.w_value) : x;

  DenseMatrix delta;
  if (cfg.input_gate) {
    delta = matmul(matmul(x, p.w_gate_1), p.w_gate_2);
    for (auto& val : delta.data()) val = softplus(val);
  }

  DenseMatrix qn = rope ? rope_rotate(q, rope->grid, rope->base) : q;
  DenseMatrix kn = rope ? rope_rotate(k, rope->grid, rope->base) : k;

  DenseMatrix s(d, c);
  std::vector<double> z(d, 0.0);
  for (int j = 0; j < n; ++j) {
    for (int m = 0; m < d; ++m) {
      const double kj = kn(j, m);
      double* s_row = s.row_ptr(m);
      for (int cc = 0; cc < c; ++cc) {
        const double gin = cfg.input_gate ? delta(j, cc) : 1.0;
        s_row[cc] += kj * (gin * v(j, cc));
      }
      z[m] += k(j, m);
    }
  }

  TokenMatrix y(n, c);
  for (int i = 0; i < n; ++i) {
    double* y_row = y.row_ptr(i);
    for (int m = 0; m < d; ++m) {
      const double qi = qn(i, m);
      const double* s_row = s.row_ptr(m);
      for (int cc = 0; cc < c; ++cc) y_row[cc] += qi * s_row[cc];
    }
    if (cfg.normalization) {
      double den = 0.0;
      for (int m = 0; m < d; ++m) den += q(i, m) * z[m];
      den = clamp_denominator(den, diag);
      for (int cc = 0; cc < c; ++cc) y_row[cc] /= den;
    }
    if (cfg.shortcut) {
      for (int cc = 0; cc < c; ++cc) y_row[cc] += p.d_skip[cc] * x(i, cc);
    }
  }
  return y;
}

}  // namespace detail

// Global-receptive-field variant of the unified rule. Only the forget gate
// forces recurrence; with it off, the gated sums are order-independent and
// every query can see the whole sequence.
inline TokenMatrix unified_forward_parallel(const TokenMatrix& x, const UnifiedParams& p,
                                            const MixerConfig& cfg,
                                            const RopeContext* rope = nullptr,
                                            AttnDiag* diag = nullptr) {
  detail::check_unified(x, p, cfg);
  if (cfg.forget_gate) {
    throw NumericError(
        "the forget gate requires the causal path; use unified_forward");
  }
  if (cfg.heads == 1) return detail::unified_parallel_single(x, p, cfg, rope, diag);

  const int cw = x.cols() / cfg.heads;
  TokenMatrix out(x.rows(), x.cols());
  for (int head = 0; head < cfg.heads; ++head) {
    TokenMatrix xs(x.rows(), cw);
    for (int i = 0; i < x.rows(); ++i)
      for (int c = 0; c < cw; ++c) xs(i, c) = x(i, head * cw + c);
    UnifiedParams ps = detail::unified_head_slice(p, cfg, x.cols(), head);
    MixerConfig sub = cfg;
    sub.heads = 1;
    TokenMatrix ys = detail::unified_parallel_single(xs, ps, sub, rope, diag);
    for (int i = 0; i < x.rows(); ++i)
      for (int c = 0; c < cw; ++c) out(i, head * cw + c) = ys(i, c);
  }
  return out;
}

// Maps a selective-SSM bundle onto the unified template:
// query <- W_C, key <- W_B, value = raw token, gates and shortcut on,
// normalization off, single head. Round-trips against selective_scan_serial.
inline std::pair<UnifiedParams, MixerConfig> from_ssm(const SsmParams& p) {
  check_ssm_params(p);
  UnifiedParams u;
  u.w_query = p.w_c;
  u.w_key = p.w_b;
  u.value_path = ValuePath::RawInput;
  u.kernel = Kernel::Identity;
  u.a_diag = p.a_diag;
  u.w_gate_1 = p.w_1;
  u.w_gate_2 = p.w_2;
  u.d_skip = p.d_skip;
  MixerDims dims;
  dims.c = p.channels();
  dims.d = p.state_dim;
  dims.c0 = p.low_rank;
  dims.heads = 1;
  return {std::move(u), selective_ssm_preset(dims)};
}

// Maps attention parameters onto the unified template: no gates, no shortcut,
// normalization on. Round-trips against linear_attention_causal.
inline std::pair<UnifiedParams, MixerConfig> from_attention(const AttnParams& p) {
  UnifiedParams u;
  u.w_query = p.w_q;
  u.w_key = p.w_k;
  u.value_path = ValuePath::Projected;
  u.w_value = p.w_v;
  u.kernel = p.kernel;
  MixerDims dims;
  dims.c = p.w_q.rows();
  dims.d = p.w_q.cols();
  dims.heads = p.heads;
  return {std::move(u), linear_attention_preset(dims)};
}

// Fresh parameters covering whatever the config enables.
inline UnifiedParams make_unified_params(Rng& rng, const MixerDims& dims,
                                         const MixerConfig& cfg,
                                         ValuePath value_path = ValuePath::Projected,
                                         Kernel kernel = Kernel::EluPlusOne) {
  UnifiedParams p;
  Rng rq = rng.split(11), rk = rng.split(12), rv = rng.split(13), ra = rng.split(14),
      r1 = rng.split(15), r2 = rng.split(16);
  p.w_query = init_projection(rq, dims.c, dims.d);
  p.w_key = init_projection(rk, dims.c, dims.d);
  p.value_path = value_path;
  p.kernel = kernel;
  if (value_path == ValuePath::Projected) p.w_value = init_projection(rv, dims.c, dims.c);
  if (cfg.forget_gate) {
    p.a_diag.resize(dims.d);
    for (auto& a : p.a_diag) a = -std::exp(ra.uniform(-4.0, 0.0));
  }
  if (cfg.input_gate || cfg.forget_gate) {
    p.w_gate_1 = init_projection(r1, dims.c, dims.c0);
    p.w_gate_2 = init_projection(r2, dims.c0, dims.c);
  }
  if (cfg.shortcut) p.d_skip.assign(dims.c, 1.0);
  return p;
}

}  // namespace mixerlab
