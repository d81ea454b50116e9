#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "mixerlab/attention.hpp"
#include "mixerlab/reference.hpp"

using namespace mixerlab;

namespace {

TokenMatrix random_tokens(Rng& rng, int n, int c) { return rng.matrix(n, c, -1.0, 1.0); }

}  // namespace

TEST_CASE("softmax attention: single token returns its value") {
  Rng rng(1);
  AttnParams p = make_attn_params(rng, 4, 4);
  TokenMatrix x = random_tokens(rng, 1, 4);
  TokenMatrix v = matmul(x, p.w_v);
  TokenMatrix y = softmax_attention(x, p);
  CHECK(max_abs_diff(y, v) < 1e-14);
}

TEST_CASE("softmax attention: identical tokens give the shared value row") {
  Rng rng(2);
  AttnParams p = make_attn_params(rng, 4, 4);
  TokenMatrix x(6, 4);
  for (int i = 0; i < 6; ++i)
    for (int j = 0; j < 4; ++j) x(i, j) = 0.3 * (j + 1);
  TokenMatrix v = matmul(x, p.w_v);
  TokenMatrix y = softmax_attention(x, p);
  for (int i = 0; i < 6; ++i)
    for (int j = 0; j < 4; ++j) CHECK(y(i, j) == Catch::Approx(v(0, j)).margin(1e-12));
}

TEST_CASE("softmax attention matches the direct double-loop oracle") {
  Rng rng(3);
  AttnParams p = make_attn_params(rng, 4, 4);
  TokenMatrix x = random_tokens(rng, 8, 4);
  CHECK(max_abs_diff(softmax_attention(x, p), reference::softmax_attention_direct(x, p)) <
        1e-10);
}

TEST_CASE("softmax weights are a convex combination") {
  Rng rng(17);
  AttnParams p = make_attn_params(rng, 6, 4);
  TokenMatrix x = random_tokens(rng, 7, 6);
  DenseMatrix q = matmul(x, p.w_q), k = matmul(x, p.w_k);
  DenseMatrix scores(7, 7);
  const double inv = 1.0 / std::sqrt(4.0);
  for (int i = 0; i < 7; ++i)
    for (int j = 0; j < 7; ++j) {
      double dot = 0;
      for (int m = 0; m < 4; ++m) dot += q(i, m) * k(j, m);
      scores(i, j) = dot * inv;
    }
  DenseMatrix w = softmax_rows(scores);
  for (int i = 0; i < 7; ++i) {
    double sum = 0.0;
    for (int j = 0; j < 7; ++j) {
      CHECK(w(i, j) >= 0.0);
      sum += w(i, j);
    }
    CHECK(std::abs(sum - 1.0) < 1e-10);
  }
}

TEST_CASE("parallel linear attention: single token and uniform keys") {
  Rng rng(4);
  AttnParams p = make_attn_params(rng, 4, 3);
  TokenMatrix x1 = random_tokens(rng, 1, 4);
  CHECK(max_abs_diff(linear_attention_parallel(x1, p), matmul(x1, p.w_v)) < 1e-12);

  // zero key projection makes every key elu_plus_one(0) = 1: uniform weights
  AttnParams pu = p;
  pu.w_k = DenseMatrix(4, 3);
  TokenMatrix x = random_tokens(rng, 5, 4);
  TokenMatrix v = matmul(x, pu.w_v);
  TokenMatrix y = linear_attention_parallel(x, pu);
  for (int j = 0; j < 4; ++j) {
    double mean = 0.0;
    for (int i = 0; i < 5; ++i) mean += v(i, j);
    mean /= 5;
    for (int i = 0; i < 5; ++i) CHECK(y(i, j) == Catch::Approx(mean).margin(1e-12));
  }
}

TEST_CASE("reordered linear attention equals the un-reordered middle expression") {
  Rng rng(5);
  for (int trial = 0; trial < 20; ++trial) {
    Rng r = rng.split(trial);
    AttnParams p = make_attn_params(r, 6, 5);
    TokenMatrix x = r.matrix(16, 6, -1.0, 1.0);
    CHECK(max_rel_diff(linear_attention_parallel(x, p),
                       reference::linear_attention_unreordered(x, p)) < 1e-10);
  }
}

TEST_CASE("causal linear attention basics") {
  Rng rng(6);
  AttnParams p = make_attn_params(rng, 4, 4);
  TokenMatrix x = random_tokens(rng, 12, 4);
  TokenMatrix y = linear_attention_causal(x, p);

  TokenMatrix v = matmul(x, p.w_v);
  for (int j = 0; j < 4; ++j) CHECK(y(0, j) == Catch::Approx(v(0, j)).margin(1e-12));

  TokenMatrix yp = linear_attention_parallel(x, p);
  for (int j = 0; j < 4; ++j) CHECK(y(11, j) == Catch::Approx(yp(11, j)).margin(1e-12));

  CHECK(max_abs_diff(y, reference::linear_attention_causal_bruteforce(x, p)) < 1e-10);
}

TEST_CASE("recurrent form equals causal form") {
  Rng rng(7);
  for (int trial = 0; trial < 10; ++trial) {
    Rng r = rng.split(trial);
    AttnParams p = make_attn_params(r, 5, 4);
    TokenMatrix x = r.matrix(9, 5, -1.0, 1.0);
    auto [y, state] = linear_attention_recurrent(x, p);
    CHECK(max_abs_diff(y, linear_attention_causal(x, p)) < 1e-12);
    CHECK(state.step == 9);
  }
}

TEST_CASE("recurrent first step fills the state with K1^T V1 and K1^T") {
  Rng rng(8);
  AttnParams p = make_attn_params(rng, 4, 3);
  TokenMatrix x = random_tokens(rng, 1, 4);
  auto [y, state] = linear_attention_recurrent(x, p);
  DenseMatrix k = apply_kernel(p.kernel, matmul(x, p.w_k));
  DenseMatrix v = matmul(x, p.w_v);
  for (int m = 0; m < 3; ++m) {
    CHECK(state.z(m, 0) == Catch::Approx(k(0, m)).margin(1e-15));
    for (int c = 0; c < 4; ++c)
      CHECK(state.s(m, c) == Catch::Approx(k(0, m) * v(0, c)).margin(1e-15));
  }
}

TEST_CASE("feeding the sequence in two chunks matches one-shot processing") {
  Rng rng(9);
  AttnParams p = make_attn_params(rng, 4, 4);
  TokenMatrix x = random_tokens(rng, 10, 4);
  auto [y_whole, state_whole] = linear_attention_recurrent(x, p);

  TokenMatrix a(4, 4), b(6, 4);
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 4; ++j) a(i, j) = x(i, j);
  for (int i = 0; i < 6; ++i)
    for (int j = 0; j < 4; ++j) b(i, j) = x(4 + i, j);

  auto [ya, sa] = linear_attention_recurrent(a, p);
  RecurrentOptions opts;
  opts.initial = &sa;
  auto [yb, sb] = linear_attention_recurrent(b, p, opts);

  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 4; ++j) CHECK(ya(i, j) == Catch::Approx(y_whole(i, j)).margin(1e-12));
  for (int i = 0; i < 6; ++i)
    for (int j = 0; j < 4; ++j)
      CHECK(yb(i, j) == Catch::Approx(y_whole(4 + i, j)).margin(1e-12));
  CHECK(sb.step == 10);
  CHECK(max_abs_diff(sb.s, state_whole.s) < 1e-12);
}

TEST_CASE("reconstructed linear attention weights sum to one") {
  Rng rng(10);
  AttnParams p = make_attn_params(rng, 6, 4);
  TokenMatrix x = random_tokens(rng, 8, 6);
  DenseMatrix q = apply_kernel(p.kernel, matmul(x, p.w_q));
  DenseMatrix k = apply_kernel(p.kernel, matmul(x, p.w_k));
  for (int i = 0; i < 8; ++i) {
    std::vector<double> w(i + 1, 0.0);
    double den = 0.0;
    for (int j = 0; j <= i; ++j) {
      double dot = 0.0;
      for (int m = 0; m < 4; ++m) dot += q(i, m) * k(j, m);
      w[j] = dot;
      den += dot;
    }
    double sum = 0.0;
    for (int j = 0; j <= i; ++j) {
      CHECK(w[j] / den >= 0.0);
      sum += w[j] / den;
    }
    CHECK(std::abs(sum - 1.0) < 1e-10);
  }
}

TEST_CASE("without a forget gate, swapping the first two tokens is invisible later") {
  Rng rng(11);
  AttnParams p = make_attn_params(rng, 5, 4);
  TokenMatrix x = random_tokens(rng, 9, 5);
  TokenMatrix xs = x;
  for (int j = 0; j < 5; ++j) std::swap(xs(0, j), xs(1, j));
  TokenMatrix y = linear_attention_causal(x, p);
  TokenMatrix ys = linear_attention_causal(xs, p);
  for (int i = 2; i < 9; ++i)
    for (int j = 0; j < 5; ++j) CHECK(std::abs(y(i, j) - ys(i, j)) < 1e-12);
}

TEST_CASE("causal mode rejects the identity kernel") {
  Rng rng(12);
  AttnParams p = make_attn_params(rng, 4, 4, 1, Kernel::Identity);
  TokenMatrix x = random_tokens(rng, 3, 4);
  CHECK_THROWS_AS(linear_attention_causal(x, p), NumericError);
  CHECK_THROWS_AS(linear_attention_recurrent(x, p), NumericError);
}

TEST_CASE("degenerate denominators are clamped and counted") {
  Rng rng(13);
  AttnParams p = make_attn_params(rng, 4, 4, 1, Kernel::Identity);
  TokenMatrix x(2, 4);
  for (int j = 0; j < 4; ++j) {
    x(0, j) = 1.0 + j;
    x(1, j) = -x(0, j);  // keys cancel, so the global key sum is zero
  }
  AttnDiag diag;
  TokenMatrix y = linear_attention_parallel(x, p, &diag);
  CHECK(diag.clamp_events > 0);
  CHECK(y.all_finite());
}

TEST_CASE("relu-plus-eps kernel keeps keys strictly positive") {
  Rng rng(14);
  AttnParams p = make_attn_params(rng, 4, 4, 1, Kernel::ReluPlusEps);
  TokenMatrix x = random_tokens(rng, 6, 4);
  DenseMatrix k = apply_kernel(p.kernel, matmul(x, p.w_k));
  for (double v : k.data()) CHECK(v > 0.0);
  CHECK(max_abs_diff(linear_attention_causal(x, p),
                     reference::linear_attention_causal_bruteforce(x, p)) < 1e-10);
}

TEST_CASE("multi_head: one head is the inner mixer itself") {
  Rng rng(15);
  AttnParams p = make_attn_params(rng, 6, 4, 1);
  TokenMatrix x = random_tokens(rng, 7, 6);
  auto inner = [](const TokenMatrix& t, const AttnParams& q) {
    return linear_attention_causal(t, q);
  };
  CHECK(max_abs_diff(multi_head(x, p, inner), linear_attention_causal(x, p)) == 0.0);
}

TEST_CASE("multi_head with block-diagonal weights equals independent halves") {
  Rng rng(16);
  const int c = 8, d = 4, h = 2;
  AttnParams p = make_attn_params(rng, c, d, h);
  TokenMatrix x = random_tokens(rng, 6, c);
  auto inner = [](const TokenMatrix& t, const AttnParams& q) {
    return linear_attention_causal(t, q);
  };
  TokenMatrix y = multi_head(x, p, inner);

  // manual split oracle: run each half as its own mixer
  for (int head = 0; head < h; ++head) {
    TokenMatrix xs(6, c / h);
    for (int i = 0; i < 6; ++i)
      for (int j = 0; j < c / h; ++j) xs(i, j) = x(i, head * c / h + j);
    AttnParams ps = head_slice(p, c, head);
    TokenMatrix ys = linear_attention_causal(xs, ps);
    for (int i = 0; i < 6; ++i)
      for (int j = 0; j < c / h; ++j)
        CHECK(y(i, head * c / h + j) == Catch::Approx(ys(i, j)).margin(1e-15));
  }
}

TEST_CASE("multi_head: permuting heads and un-permuting outputs is identity") {
  Rng rng(17);
  const int c = 8, h = 2, cw = c / 2, dw = 2;
  AttnParams p = make_attn_params(rng, c, 4, h);
  TokenMatrix x = random_tokens(rng, 5, c);
  auto inner = [](const TokenMatrix& t, const AttnParams& q) {
    return linear_attention_causal(t, q);
  };
  TokenMatrix y = multi_head(x, p, inner);

  // swap the two head blocks in the input and in the projections
  TokenMatrix xp(5, c);
  for (int i = 0; i < 5; ++i)
    for (int j = 0; j < c; ++j) xp(i, (j + cw) % c) = x(i, j);
  AttnParams pp = p;
  for (int r = 0; r < c; ++r)
    for (int col = 0; col < p.w_q.cols(); ++col) {
      pp.w_q((r + cw) % c, (col + dw) % p.w_q.cols()) = p.w_q(r, col);
      pp.w_k((r + cw) % c, (col + dw) % p.w_k.cols()) = p.w_k(r, col);
    }
  for (int r = 0; r < c; ++r)
    for (int col = 0; col < c; ++col) pp.w_v((r + cw) % c, (col + cw) % c) = p.w_v(r, col);

  TokenMatrix yp = multi_head(xp, pp, inner);
  for (int i = 0; i < 5; ++i)
    for (int j = 0; j < c; ++j) CHECK(yp(i, (j + cw) % c) == Catch::Approx(y(i, j)).margin(1e-15));
}

TEST_CASE("multi_head rejects indivisible widths") {
  Rng rng(18);
  AttnParams p = make_attn_params(rng, 6, 4, 4);
  TokenMatrix x = random_tokens(rng, 3, 6);
  auto inner = [](const TokenMatrix& t, const AttnParams& q) {
    return linear_attention_causal(t, q);
  };
  CHECK_THROWS_AS(multi_head(x, p, inner), DimensionError);
}
