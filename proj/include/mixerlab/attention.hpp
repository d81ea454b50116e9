#pragma once

#include <cmath>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "mixerlab/matrix.hpp"
#include "mixerlab/numerics.hpp"

namespace mixerlab {

// Feature map applied to Q and K in linear attention. ReluPlusEps and
// EluPlusOne keep keys strictly positive, which guarantees nonzero
// normalization denominators in causal mode. Identity is reserved for
// unnormalized configurations.
enum class Kernel { Identity, ReluPlusEps, EluPlusOne };

inline constexpr double kReluEps = 1e-6;

// Denominators with |q.z| below this are clamped (sign-preserving) and the
// event is counted instead of producing Inf.
inline constexpr double kDenomFloor = 1e-12;

inline double apply_kernel_scalar(Kernel k, double x) {
  switch (k) {
    case Kernel::Identity:
      return x;
    case Kernel::ReluPlusEps:
      return std::max(x, 0.0) + kReluEps;
    case Kernel::EluPlusOne:
      return elu_plus_one(x);
  }
  return x;
}

template <typename T>
MatrixT<T> apply_kernel(Kernel k, const MatrixT<T>& m) {
  if (k == Kernel::Identity) return m;
  MatrixT<T> out = m;
  for (auto& v : out.data()) v = static_cast<T>(apply_kernel_scalar(k, static_cast<double>(v)));
  return out;
}

template <typename T>
struct AttnParamsT {
  MatrixT<T> w_q;  // C x d
  MatrixT<T> w_k;  // C x d
  MatrixT<T> w_v;  // C x C
  int heads = 1;
  Kernel kernel = Kernel::EluPlusOne;
};

using AttnParams = AttnParamsT<double>;

inline AttnParams make_attn_params(Rng& rng, int channels, int qk_dim, int heads = 1,
                                   Kernel kernel = Kernel::EluPlusOne) {
  AttnParams p;
  Rng rq = rng.split(1), rk = rng.split(2), rv = rng.split(3);
  p.w_q = init_projection(rq, channels, qk_dim);
  p.w_k = init_projection(rk, channels, qk_dim);
  p.w_v = init_projection(rv, channels, channels);
  p.heads = heads;
  p.kernel = kernel;
  return p;
}

// Running prefix state of the recurrent form: s accumulates K^T V, z
// accumulates K^T. Both are zero before the first token.
struct RecurrentState {
  DenseMatrix s;  // d x C
  DenseMatrix z;  // d x 1
  int step = 0;

  RecurrentState() = default;
  RecurrentState(int d, int c) : s(d, c), z(d, 1), step(0) {}
};

struct AttnDiag {
  long clamp_events = 0;
};

struct RecurrentOptions {
  const RecurrentState* initial = nullptr;
  // Test hook: accumulate z with flipped sign. Breaks the causal/recurrent
  // identity on purpose so the verification suite can prove it would notice.
  bool negate_z_update = false;
};

namespace detail {

template <typename T>
void check_attention_shapes(const MatrixT<T>& x, const AttnParamsT<T>& p) {
  if (x.cols() != p.w_q.rows() || x.cols() != p.w_k.rows()) {
    throw DimensionError("attention: token width does not match projection rows");
  }
  if (!p.w_v.empty() && (p.w_v.rows() != x.cols() || p.w_v.cols() != x.cols())) {
    throw DimensionError("attention: w_v must be CxC");
  }
  if (p.w_q.cols() != p.w_k.cols()) {
    throw DimensionError("attention: w_q and w_k widths differ");
  }
}

inline double clamp_denominator(double den, AttnDiag* diag) {
  if (std::abs(den) < kDenomFloor) {
    if (diag) diag->clamp_events++;
    return std::copysign(kDenomFloor, den == 0.0 ? 1.0 : den);
  }
  return den;
}

}  // namespace detail

// Softmax attention, O(N^2): y_i = sum_j softmax(Q_i K_j^T / sqrt(d)) V_j.
template <typename T>
MatrixT<T> softmax_attention(const MatrixT<T>& x, const AttnParamsT<T>& p) {
  detail::check_attention_shapes(x, p);
  MatrixT<T> q = matmul(x, p.w_q);
  MatrixT<T> k = matmul(x, p.w_k);
  MatrixT<T> v = matmul(x, p.w_v);
  const T inv_sqrt_d = T(1) / std::sqrt(static_cast<T>(p.w_q.cols()));
  MatrixT<T> scores(x.rows(), x.rows());
  for (int i = 0; i < x.rows(); ++i) {
    for (int j = 0; j < x.rows(); ++j) {
      T dot = T(0);
      for (int m = 0; m < q.cols(); ++m) dot += q(i, m) * k(j, m);
      scores(i, j) = dot * inv_sqrt_d;
    }
  }
  return matmul(softmax_rows(scores), v);
}

// Linear attention in the reordered O(N) form of the global (non-causal)
// formulation: y_i = Q_i (sum_j K_j^T V_j) / Q_i (sum_j K_j^T).
template <typename T>
MatrixT<T> linear_attention_parallel(const MatrixT<T>& x, const AttnParamsT<T>& p,
                                     AttnDiag* diag = nullptr) {
  detail::check_attention_shapes(x, p);
  MatrixT<T> q = apply_kernel(p.kernel, matmul(x, p.w_q));
  MatrixT<T> k = apply_kernel(p.kernel, matmul(x, p.w_k));
  MatrixT<T> v = matmul(x, p.w_v);
  const int n = x.rows(), d = q.cols(), c = v.cols();

  MatrixT<T> s(d, c);  // sum_j K_j^T V_j
  std::vector<T> z(d, T(0));
  for (int j = 0; j < n; ++j) {
    for (int m = 0; m < d; ++m) {
      const T kj = k(j, m);
      z[m] += kj;
      T* s_row = s.row_ptr(m);
      const T* v_row = v.row_ptr(j);
      for (int cc = 0; cc < c; ++cc) s_row[cc] += kj * v_row[cc];
    }
  }

  MatrixT<T> y(n, c);
  for (int i = 0; i < n; ++i) {
    T den = T(0);
    for (int m = 0; m < d; ++m) den += q(i, m) * z[m];
    den = static_cast<T>(detail::clamp_denominator(static_cast<double>(den), diag));
    T* y_row = y.row_ptr(i);
    for (int m = 0; m < d; ++m) {
      const T qi = q(i, m);
      const T* s_row = s.row_ptr(m);
      for (int cc = 0; cc < c; ++cc) y_row[cc] += qi * s_row[cc];
    }
    for (int cc = 0; cc < c; ++cc) y_row[cc] /= den;
  }
  return y;
}

// Causal linear attention: sums restricted to j <= i.
template <typename T>
MatrixT<T> linear_attention_causal(const MatrixT<T>& x, const AttnParamsT<T>& p,
                                   AttnDiag* diag = nullptr) {
  detail::check_attention_shapes(x, p);
  if (p.kernel == Kernel::Identity) {
    throw NumericError(
        "causal linear attention requires a nonnegative kernel so the running "
        "normalization stays positive");
  }
  MatrixT<T> q = apply_kernel(p.kernel, matmul(x, p.w_q));
  MatrixT<T> k = apply_kernel(p.kernel, matmul(x, p.w_k));
  MatrixT<T> v = matmul(x, p.w_v);
  const int n = x.rows(), d = q.cols(), c = v.cols();

  MatrixT<T> s(d, c);
  std::vector<T> z(d, T(0));
  MatrixT<T> y(n, c);
  for (int i = 0; i < n; ++i) {
    for (int m = 0; m < d; ++m) {
      const T ki = k(i, m);
      z[m] += ki;
      T* s_row = s.row_ptr(m);
      const T* v_row = v.row_ptr(i);
      for (int cc = 0; cc < c; ++cc) s_row[cc] += ki * v_row[cc];
    }
    T den = T(0);
    for (int m = 0; m < d; ++m) den += q(i, m) * z[m];
    den = static_cast<T>(detail::clamp_denominator(static_cast<double>(den), diag));
    T* y_row = y.row_ptr(i);
    for (int m = 0; m < d; ++m) {
      const T qi = q(i, m);
      const T* s_row = s.row_ptr(m);
      for (int cc = 0; cc < c; ++cc) y_row[cc] += qi * s_row[cc];
    }
    for (int cc = 0; cc < c; ++cc) y_row[cc] /= den;
  }
  return y;
}

// Recurrent form: S_i = S_{i-1} + K_i^T V_i, Z_i = Z_{i-1} + K_i^T,
// y_i = Q_i S_i / Q_i Z_i. Returns the final state so a sequence can be fed
// in chunks.
inline std::pair<TokenMatrix, RecurrentState> linear_attention_recurrent(
    const TokenMatrix& x, const AttnParams& p, const RecurrentOptions& opts = {},
    AttnDiag* diag = nullptr) {
  detail::check_attention_shapes(x, p);
  if (p.kernel == Kernel::Identity) {
    throw NumericError(
        "recurrent linear attention requires a nonnegative kernel so the running "
        "normalization stays positive");
  }
  DenseMatrix q = apply_kernel(p.kernel, matmul(x, p.w_q));
  DenseMatrix k = apply_kernel(p.kernel, matmul(x, p.w_k));
  DenseMatrix v = matmul(x, p.w_v);
  const int n = x.rows(), d = q.cols(), c = v.cols();

  RecurrentState state(d, c);
  if (opts.initial) {
    if (opts.initial->s.rows() != d || opts.initial->s.cols() != c ||
        opts.initial->z.rows() != d) {
      throw DimensionError("recurrent state shape does not match parameters");
    }
    state = *opts.initial;
  }
  const double z_sign = opts.negate_z_update ? -1.0 : 1.0;

  TokenMatrix y(n, c);
  for (int i = 0; i < n; ++i) {
    for (int m = 0; m < d; ++m) {
      const double ki = k(i, m);
      state.z(m, 0) += z_sign * ki;
      double* s_row = state.s.row_ptr(m);
      const double* v_row = v.row_ptr(i);
      for (int cc = 0; cc < c; ++cc) s_row[cc] += ki * v_row[cc];
    }
    double den = 0.0;
    for (int m = 0; m < d; ++m) den += q(i, m) * state.z(m, 0);
    den = detail::clamp_denominator(den, diag);
    double* y_row = y.row_ptr(i);
    for (int m = 0; m < d; ++m) {
      const double qi = q(i, m);
      const double* s_row = state.s.row_ptr(m);
      for (int cc = 0; cc < c; ++cc) y_row[cc] += qi * s_row[cc];
    }
    for (int cc = 0; cc < c; ++cc) y_row[cc] /= den;
    state.step++;
  }
  return {std::move(y), std::move(state)};
}

// Per-head slice of full-size projections. Head h owns channel rows
// [h*C/H, (h+1)*C/H) and query/key columns [h*d/H, (h+1)*d/H); w_v is the
// matching diagonal block.
template <typename T>
AttnParamsT<T> head_slice(const AttnParamsT<T>& p, int channels, int head) {
  const int h = p.heads;
  const int cw = channels / h;
  const int dw = p.w_q.cols() / h;
  AttnParamsT<T> out;
  out.heads = 1;
  out.kernel = p.kernel;
  out.w_q = MatrixT<T>(cw, dw);
  out.w_k = MatrixT<T>(cw, dw);
  for (int r = 0; r < cw; ++r)
    for (int c = 0; c < dw; ++c) {
      out.w_q(r, c) = p.w_q(head * cw + r, head * dw + c);
      out.w_k(r, c) = p.w_k(head * cw + r, head * dw + c);
    }
  if (!p.w_v.empty()) {
    out.w_v = MatrixT<T>(cw, cw);
    for (int r = 0; r < cw; ++r)
      for (int c = 0; c < cw; ++c) out.w_v(r, c) = p.w_v(head * cw + r, head * cw + c);
  }
  return out;
}

// Splits channels into H contiguous groups, runs the inner mixer per group
// with that head's projection slices, and concatenates the outputs.
template <typename T, typename Inner>
MatrixT<T> multi_head(const MatrixT<T>& x, const AttnParamsT<T>& p, Inner&& inner) {
  const int h = p.heads;
  if (h < 1) throw DimensionError("head count must be >= 1");
  if (x.cols() % h != 0) {
    throw DimensionError("channel count " + std::to_string(x.cols()) +
                         " not divisible by head count " + std::to_string(h));
  }
  if (p.w_q.cols() % h != 0) {
    throw DimensionError("query/key width " + std::to_string(p.w_q.cols()) +
                         " not divisible by head count " + std::to_string(h));
  }
  if (h == 1) return inner(x, p);

  const int cw = x.cols() / h;
  MatrixT<T> out(x.rows(), x.cols());
  for (int head = 0; head < h; ++head) {
    MatrixT<T> xs(x.rows(), cw);
    for (int i = 0; i < x.rows(); ++i)
      for (int c = 0; c < cw; ++c) xs(i, c) = x(i, head * cw + c);
    AttnParamsT<T> ps = head_slice(p, x.cols(), head);
    MatrixT<T> ys = inner(xs, ps);
    if (ys.rows() != x.rows() || ys.cols() != cw) {
      throw DimensionError("multi_head: inner mixer changed the token shape");
    }
    for (int i = 0; i < x.rows(); ++i)
      for (int c = 0; c < cw; ++c) out(i, head * cw + c) = ys(i, c);
  }
  return out;
}

}  // namespace mixerlab
