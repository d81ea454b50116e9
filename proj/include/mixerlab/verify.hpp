#pragma once

// The equivalence suite behind `mixerlab verify`: every formulation identity
// the library promises, run over seeded random instances and reported with
// the worst observed error.

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "mixerlab/attention.hpp"
#include "mixerlab/costs.hpp"
#include "mixerlab/reference.hpp"
#include "mixerlab/scan.hpp"
#include "mixerlab/ssm.hpp"
#include "mixerlab/unified.hpp"

namespace mixerlab {

struct CheckResult {
  std::string name;
  double max_error = 0.0;
  double tolerance = 0.0;
  int trials = 0;
  bool pass = false;
};

struct VerifyReport {
  uint64_t seed = 0;
  int trials = 0;
  std::string inject_fault;
  bool all_pass = false;
  std::vector<CheckResult> checks;
  int schema_version = 1;
};

struct VerifyOptions {
  uint64_t seed = 1;
  int trials = 100;
  std::string inject_fault;  // "" or "recurrent-z-sign"
};

namespace detail {

struct RandomDims {
  int n, c, d, heads;
};

// Instance sizes bounded by N <= 64, C <= 32, d <= 16, with widths kept
// divisible by the head count.
inline RandomDims sample_dims(Rng& rng, bool multi_head_allowed) {
  static const int head_choices[3] = {1, 2, 4};
  int heads = multi_head_allowed ? head_choices[rng.uniform_int(0, 2)] : 1;
  int cw = rng.uniform_int(1, 32 / heads);
  int dw = rng.uniform_int(1, 16 / heads);
  return {rng.uniform_int(1, 64), heads * cw, heads * dw, heads};
}

class Suite {
 public:
  explicit Suite(const VerifyOptions& opts) : opts_(opts) {}

  VerifyReport run() {
    if (!opts_.inject_fault.empty() && opts_.inject_fault != "recurrent-z-sign") {
      throw DimensionError("unknown fault: " + opts_.inject_fault);
    }
    check_matmul_associativity();
    check_softmax_oracle();
    check_eq2_reorder();
    check_causal_recurrent();
    check_chunked_continuation();
    check_ssm_forms();
    check_unified_presets();
    check_unified_parallel();
    check_scan();
    check_posenc();
    check_gate_range();
    check_weight_sums();
    check_cost_identity();
    check_eq13_closed_form();

    VerifyReport report;
    report.seed = opts_.seed;
    report.trials = opts_.trials;
    report.inject_fault = opts_.inject_fault;
    report.checks = std::move(checks_);
    report.all_pass = true;
    for (const auto& c : report.checks) report.all_pass = report.all_pass && c.pass;
    return report;
  }

 private:
  VerifyOptions opts_;
  std::vector<CheckResult> checks_;

  Rng trial_rng(const char* name, int trial) const {
    uint64_t h = 1469598103934665603ull;
    for (const char* p = name; *p; ++p) h = (h ^ static_cast<uint64_t>(*p)) * 1099511628211ull;
    return Rng(opts_.seed).split(h).split(static_cast<uint64_t>(trial));
  }

  void record(const std::string& name, double max_error, double tolerance, int trials) {
    checks_.push_back({name, max_error, tolerance, trials,
                       max_error <= tolerance && std::isfinite(max_error)});
  }

  void check_matmul_associativity() {
    double worst = 0.0;
    for (int t = 0; t < opts_.trials; ++t) {
      Rng r = trial_rng("matmul", t);
      int n = r.uniform_int(1, 12), k = r.uniform_int(1, 12), m = r.uniform_int(1, 12),
          q = r.uniform_int(1, 12);
      DenseMatrix a = r.matrix(n, k, -1.0, 1.0), b = r.matrix(k, m, -1.0, 1.0),
                  c = r.matrix(m, q, -1.0, 1.0);
      worst = std::max(worst, max_rel_diff(matmul(matmul(a, b), c), matmul(a, matmul(b, c))));
    }
    record("matmul-associativity", worst, 1e-9, opts_.trials);
  }

  void check_softmax_oracle() {
    double worst = 0.0;
    for (int t = 0; t < opts_.trials; ++t) {
      Rng r = trial_rng("softmax-oracle", t);
      auto dims = sample_dims(r, false);
      AttnParams p = make_attn_params(r, dims.c, dims.d);
      TokenMatrix x = r.matrix(dims.n, dims.c, -1.0, 1.0);
      worst = std::max(worst, max_abs_diff(softmax_attention(x, p),
                                           reference::softmax_attention_direct(x, p)));
    }
    record("softmax-attention-oracle", worst, 1e-10, opts_.trials);
  }

  void check_eq2_reorder() {
    double worst = 0.0;
    for (int t = 0; t < opts_.trials; ++t) {
      Rng r = trial_rng("eq2", t);
      auto dims = sample_dims(r, false);
      AttnParams p = make_attn_params(r, dims.c, dims.d);
      TokenMatrix x = r.matrix(dims.n, dims.c, -1.0, 1.0);
      worst = std::max(worst, max_rel_diff(linear_attention_parallel(x, p),
                                           reference::linear_attention_unreordered(x, p)));
    }
    record("eq2-reordered-vs-unreordered", worst, 1e-10, opts_.trials);
  }

  void check_causal_recurrent() {
    double worst = 0.0;
    RecurrentOptions ropts;
    ropts.negate_z_update = opts_.inject_fault == "recurrent-z-sign";
    for (int t = 0; t < opts_.trials; ++t) {
      Rng r = trial_rng("eq3eq4", t);
      auto dims = sample_dims(r, false);
      AttnParams p = make_attn_params(r, dims.c, dims.d);
      TokenMatrix x = r.matrix(dims.n, dims.c, -1.0, 1.0);
      auto [y, state] = linear_attention_recurrent(x, p, ropts);
      worst = std::max(worst, max_abs_diff(y, linear_attention_causal(x, p)));
    }
    record("eq3-causal-vs-eq4-recurrent", worst, 1e-12, opts_.trials);
  }

  void check_chunked_continuation() {
    double worst = 0.0;
    RecurrentOptions base;
    base.negate_z_update = opts_.inject_fault == "recurrent-z-sign";
    for (int t = 0; t < opts_.trials; ++t) {
      Rng r = trial_rng("chunked", t);
      auto dims = sample_dims(r, false);
      if (dims.n < 2) dims.n = 2;
      AttnParams p = make_attn_params(r, dims.c, dims.d);
      TokenMatrix x = r.matrix(dims.n, dims.c, -1.0, 1.0);
      TokenMatrix whole = linear_attention_causal(x, p);

      int cut = r.uniform_int(1, dims.n - 1);
      TokenMatrix a(cut, dims.c), b(dims.n - cut, dims.c);
      for (int i = 0; i < cut; ++i)
        for (int j = 0; j < dims.c; ++j) a(i, j) = x(i, j);
      for (int i = cut; i < dims.n; ++i)
        for (int j = 0; j < dims.c; ++j) b(i - cut, j) = x(i, j);
      auto [ya, sa] = linear_attention_recurrent(a, p, base);
      RecurrentOptions cont = base;
      cont.initial = &sa;
      auto [yb, sb] = linear_attention_recurrent(b, p, cont);

      for (int i = 0; i < cut; ++i)
        for (int j = 0; j < dims.c; ++j)
          worst = std::max(worst, std::abs(ya(i, j) - whole(i, j)));
      for (int i = cut; i < dims.n; ++i)
        for (int j = 0; j < dims.c; ++j)
          worst = std::max(worst, std::abs(yb(i - cut, j) - whole(i, j)));
    }
    record("eq4-chunked-state-continuation", worst, 1e-12, opts_.trials);
  }

  void check_ssm_forms() {
    double worst89 = 0.0, worst910 = 0.0;
    for (int t = 0; t < opts_.trials; ++t) {
      Rng r = trial_rng("ssm-forms", t);
      auto dims = sample_dims(r, false);
      SsmParams p = make_ssm_params(r, dims.c, dims.d);
      TokenMatrix x = r.matrix(dims.n, dims.c, -1.0, 1.0);
      TokenMatrix y8 = reference::selective_scan_matrix_form(x, p);
      TokenMatrix y9 = reference::selective_scan_hadamard_form(x, p);
      TokenMatrix y10 = selective_scan_serial(x, p);
      worst89 = std::max(worst89, max_abs_diff(y8, y9));
      worst910 = std::max(worst910, max_abs_diff(y9, y10));
    }
    record("eq8-matrix-vs-eq9-hadamard", worst89, 1e-12, opts_.trials);
    record("eq9-hadamard-vs-eq10-per-channel", worst910, 1e-12, opts_.trials);
  }

  void check_unified_presets() {
    double worst_la = 0.0, worst_ssm = 0.0;
    for (int t = 0; t < opts_.trials; ++t) {
      Rng r = trial_rng("preset-la", t);
      auto dims = sample_dims(r, true);
      AttnParams p = make_attn_params(r, dims.c, dims.d, dims.heads);
      TokenMatrix x = r.matrix(dims.n, dims.c, -1.0, 1.0);
      auto [up, cfg] = from_attention(p);
      TokenMatrix expected = multi_head(x, p, [](const TokenMatrix& xs, const AttnParams& ps) {
        return linear_attention_causal(xs, ps);
      });
      worst_la = std::max(worst_la, max_abs_diff(unified_forward(x, up, cfg), expected));
    }
    for (int t = 0; t < opts_.trials; ++t) {
      Rng r = trial_rng("preset-ssm", t);
      auto dims = sample_dims(r, false);
      SsmParams p = make_ssm_params(r, dims.c, dims.d);
      TokenMatrix x = r.matrix(dims.n, dims.c, -1.0, 1.0);
      auto [up, cfg] = from_ssm(p);
      worst_ssm = std::max(worst_ssm,
                           max_abs_diff(unified_forward(x, up, cfg), selective_scan_serial(x, p)));
    }
    record("unified-preset-linear-attention", worst_la, 1e-12, opts_.trials);
    record("unified-preset-selective-ssm", worst_ssm, 1e-12, opts_.trials);
  }

  void check_unified_parallel() {
    double worst = 0.0;
    for (int t = 0; t < opts_.trials; ++t) {
      Rng r = trial_rng("unified-parallel", t);
      auto dims = sample_dims(r, true);
      AttnParams p = make_attn_params(r, dims.c, dims.d, dims.heads);
      TokenMatrix x = r.matrix(dims.n, dims.c, -1.0, 1.0);
      auto [up, cfg] = from_attention(p);
      TokenMatrix expected = multi_head(x, p, [](const TokenMatrix& xs, const AttnParams& ps) {
        return linear_attention_parallel(xs, ps);
      });
      worst = std::max(worst, max_abs_diff(unified_forward_parallel(x, up, cfg), expected));
    }
    record("unified-parallel-vs-eq2", worst, 1e-12, opts_.trials);
  }

  void check_scan() {
    double worst_chunk = 0.0, worst_assoc = 0.0;
    for (int t = 0; t < opts_.trials; ++t) {
      Rng r = trial_rng("scan", t);
      int n = r.uniform_int(1, 64), rows = r.uniform_int(1, 8), cols = r.uniform_int(1, 8);
      std::vector<ScanElement> elems;
      elems.reserve(n);
      for (int i = 0; i < n; ++i) {
        Rng re = r.split(100 + i);
        elems.push_back({re.matrix(rows, cols, 0.05, 1.0), re.matrix(rows, cols, -1.0, 1.0)});
      }
      auto serial = scan_serial(elems);
      for (size_t chunk : {size_t(1), size_t(2), size_t(7), size_t(16)}) {
        auto par = scan_parallel(elems, chunk, 2);
        for (size_t i = 0; i < elems.size(); ++i)
          worst_chunk = std::max(worst_chunk, max_abs_diff(serial[i], par[i]));
      }
      if (n >= 3) {
        ScanElement lhs = compose(compose(elems[0], elems[1]), elems[2]);
        ScanElement rhs = compose(elems[0], compose(elems[1], elems[2]));
        worst_assoc = std::max(worst_assoc, max_abs_diff(lhs.g, rhs.g));
        worst_assoc = std::max(worst_assoc, max_abs_diff(lhs.u, rhs.u));
      }
    }
    record("scan-chunk-sweep", worst_chunk, 1e-12, opts_.trials);
    record("scan-operator-associativity", worst_assoc, 1e-14, opts_.trials);
  }

  void check_posenc() {
    double worst_dw = 0.0, worst_lin = 0.0, worst_iso = 0.0, worst_rel = 0.0;
    for (int t = 0; t < opts_.trials; ++t) {
      Rng r = trial_rng("posenc", t);
      int h = r.uniform_int(1, 8), w = r.uniform_int(1, 8), c = r.uniform_int(1, 8);
      Grid2D grid{h, w};
      DepthwiseKernel kern = random_dw_kernel(r, c, 3);
      TokenMatrix x = r.matrix(grid.tokens(), c, -1.0, 1.0);
      worst_dw = std::max(worst_dw, max_abs_diff(depthwise_conv2d(x, grid, kern),
                                                 reference::depthwise_conv2d_window(x, grid, kern)));

      TokenMatrix y = r.matrix(grid.tokens(), c, -1.0, 1.0);
      double alpha = r.uniform(-2.0, 2.0), beta = r.uniform(-2.0, 2.0);
      TokenMatrix mix = add(scale(x, alpha), scale(y, beta));
      TokenMatrix lhs = depthwise_conv2d(mix, grid, kern);
      TokenMatrix rhs = add(scale(depthwise_conv2d(x, grid, kern), alpha),
                            scale(depthwise_conv2d(y, grid, kern), beta));
      worst_lin = std::max(worst_lin, max_abs_diff(lhs, rhs));

      // rope isometry + relative offsets on a single-row grid
      int width4 = 4 * r.uniform_int(1, 4);
      Grid2D line{1, 8};
      TokenMatrix q = r.matrix(8, width4, -1.0, 1.0);
      TokenMatrix k = r.matrix(8, width4, -1.0, 1.0);
      TokenMatrix qr = rope_rotate(q, line, 100.0);
      TokenMatrix kr = rope_rotate(k, line, 100.0);
      for (int i = 0; i < 8; ++i) {
        double n0 = 0.0, n1 = 0.0;
        for (int j = 0; j < width4; ++j) {
          n0 += q(i, j) * q(i, j);
          n1 += qr(i, j) * qr(i, j);
        }
        worst_iso = std::max(worst_iso, std::abs(std::sqrt(n0) - std::sqrt(n1)));
      }
      // dot products of tokens with a shared relative offset must agree; copy
      // token contents so only the position changes
      TokenMatrix q2(8, width4), k2(8, width4);
      for (int j = 0; j < width4; ++j) {
        for (int i = 0; i < 8; ++i) {
          q2(i, j) = q(0, j);
          k2(i, j) = k(3, j);
        }
      }
      TokenMatrix q2r = rope_rotate(q2, line, 100.0);
      TokenMatrix k2r = rope_rotate(k2, line, 100.0);
      auto dot = [&](const TokenMatrix& a, int i, const TokenMatrix& b, int j) {
        double s = 0.0;
        for (int m = 0; m < width4; ++m) s += a(i, m) * b(j, m);
        return s;
      };
      double base_dot = dot(q2r, 1, k2r, 4);  // offset 3
      for (int shift = 0; shift < 4; ++shift) {
        worst_rel = std::max(worst_rel,
                             std::abs(dot(q2r, shift, k2r, shift + 3) - base_dot));
      }
    }
    record("posenc-dwconv-oracle", worst_dw, 1e-12, opts_.trials);
    record("posenc-dwconv-linearity", worst_lin, 1e-12, opts_.trials);
    record("posenc-rope-isometry", worst_iso, 1e-12, opts_.trials);
    record("posenc-rope-relative-offset", worst_rel, 1e-10, opts_.trials);
  }

  void check_gate_range() {
    double worst = 0.0;  // distance outside the legal ranges
    for (int t = 0; t < opts_.trials; ++t) {
      Rng r = trial_rng("gates", t);
      auto dims = sample_dims(r, false);
      SsmParams p = make_ssm_params(r, dims.c, dims.d);
      TokenMatrix x = r.matrix(dims.n, dims.c, -4.0, 4.0);
      SelectiveGates g = selective_gates(x, p);
      for (double v : g.delta.data()) worst = std::max(worst, v <= 0.0 ? -v + 1e-300 : 0.0);
      for (const auto& gate : g.gate)
        for (double v : gate.data()) {
          if (v <= 0.0) worst = std::max(worst, -v + 1e-300);
          if (v >= 1.0) worst = std::max(worst, v - 1.0 + 1e-300);
        }
    }
    record("gate-range", worst, 0.0, opts_.trials);
  }

  void check_weight_sums() {
    double worst = 0.0;
    for (int t = 0; t < opts_.trials; ++t) {
      Rng r = trial_rng("weight-sum", t);
      auto dims = sample_dims(r, false);
      AttnParams p = make_attn_params(r, dims.c, dims.d);
      TokenMatrix x = r.matrix(dims.n, dims.c, -1.0, 1.0);
      DenseMatrix q = apply_kernel(p.kernel, matmul(x, p.w_q));
      DenseMatrix k = apply_kernel(p.kernel, matmul(x, p.w_k));
      for (int i = 0; i < dims.n; ++i) {
        double den = 0.0, sum = 0.0, min_w = 0.0;
        std::vector<double> dots(i + 1, 0.0);
        for (int j = 0; j <= i; ++j) {
          for (int m = 0; m < dims.d; ++m) dots[j] += q(i, m) * k(j, m);
          den += dots[j];
        }
        for (int j = 0; j <= i; ++j) {
          sum += dots[j] / den;
          min_w = std::min(min_w, dots[j] / den);
        }
        worst = std::max(worst, std::abs(sum - 1.0));
        worst = std::max(worst, -min_w);
      }
    }
    record("normalized-weights-sum-to-one", worst, 1e-10, opts_.trials);
  }

  void check_cost_identity() {
    ModelSpec tiny;
    tiny.name = "tiny";
    tiny.stages = {StageSpec{8, 1, 1}, StageSpec{16, 2, 1}, StageSpec{32, 4, 1},
                   StageSpec{64, 8, 2}};
    tiny.stem_out = 8;
    tiny.num_classes = 10;
    tiny.block = mila_block_template();
    Model model = build_model(tiny, opts_.seed);
    CostReport report = count_costs(tiny, 64);
    double err = std::abs(static_cast<double>(report.total_params) -
                          static_cast<double>(model.param_count()));
    // scope/term breakdown must add back up to the totals
    uint64_t scope_sum = 0;
    for (const auto& s : report.scopes) scope_sum += s.params;
    err = std::max(err, std::abs(static_cast<double>(scope_sum) -
                                 static_cast<double>(report.total_params)));
    uint64_t term_sum = 0;
    for (const auto& [_, v] : report.term_flops) term_sum += v;
    err = std::max(err, std::abs(static_cast<double>(term_sum) -
                                 static_cast<double>(report.total_flops)));
    record("cost-report-vs-allocated-params", err, 0.0, 1);
  }

  void check_eq13_closed_form() {
    BlockSpec spec = mila_block_template();
    spec.dim = 256;
    spec.heads = 8;  // head width d = 32
    MixerConfig cfg = mila_preset(MixerDims{});
    const uint64_t n = 196;
    uint64_t itemized = block_term_flops(spec, cfg, n).total();
    uint64_t closed = mila_block_flops(n, 256, 32, 3);
    double err = std::abs(static_cast<double>(itemized) - static_cast<double>(closed));
    err = std::max(err, std::abs(static_cast<double>(closed) - 170648576.0));

    BlockSpec tf = spec;
    tf.design = BlockDesign::Transformer;
    tf.posenc.clear();
    uint64_t tf_total = block_term_flops(tf, linear_attention_preset(MixerDims{}), n).total();
    uint64_t expected_gap = n * 256 * 256 + 9ull * n * 256;
    err = std::max(err, std::abs(static_cast<double>(itemized - tf_total) -
                                 static_cast<double>(expected_gap)));
    record("eq13-closed-form-and-block-gap", err, 0.0, 1);
  }
};

}  // namespace detail

inline VerifyReport run_verify_suite(const VerifyOptions& opts) {
  return detail::Suite(opts).run();
}

}  // namespace mixerlab
