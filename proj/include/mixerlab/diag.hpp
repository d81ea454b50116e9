#pragma once

#include <cmath>
#include <map>
#include <string>
#include <vector>

#include "mixerlab/ssm.hpp"
#include "mixerlab/unified.hpp"

namespace mixerlab {

// Diagnostic bundle: forget-gate statistics through a stack of selective-SSM
// layers, attenuation curves, the token-length spread with and without
// normalization, and prefix-permutation sensitivity.
struct DiagReport {
  uint64_t seed = 0;
  int layers = 4;
  int tokens = 64;
  int channels = 16;
  double input_scale = 8.0;
  std::vector<double> mean_forget_gate_per_layer;
  std::map<std::string, std::vector<double>> attenuation_curves;  // a -> a^k, k = 0..10
  std::vector<double> token_length_std_norm_on;   // per layer
  std::vector<double> token_length_std_norm_off;  // per layer
  double permutation_delta_forget_off = 0.0;  // max |dy_i|, i >= 3, after x1<->x2 swap
  double permutation_delta_forget_on = 0.0;
  long denominator_clamp_events = 0;  // floor hits across every probe in the bundle
  int schema_version = 1;
};

namespace detail {

inline double token_length_std(const TokenMatrix& x) {
  std::vector<double> lengths(x.rows());
  double mean = 0.0;
  for (int i = 0; i < x.rows(); ++i) {
    double s = 0.0;
    for (int j = 0; j < x.cols(); ++j) s += x(i, j) * x(i, j);
    lengths[i] = std::sqrt(s);
    mean += lengths[i];
  }
  mean /= x.rows();
  double var = 0.0;
  for (double l : lengths) var += (l - mean) * (l - mean);
  return std::sqrt(var / x.rows());
}

inline TokenMatrix swap_first_two(const TokenMatrix& x) {
  TokenMatrix out = x;
  for (int j = 0; j < x.cols(); ++j) std::swap(out(0, j), out(1, j));
  return out;
}

}  // namespace detail

inline DiagReport run_diag(uint64_t seed, int layers = 4, int tokens = 64,
                           int channels = 16) {
  DiagReport report;
  report.seed = seed;
  report.layers = layers;
  report.tokens = tokens;
  report.channels = channels;
  Rng rng(seed);

  // (a) mean forget-gate value per layer of a selective-SSM stack
  {
    const int state_dim = 8;
    TokenMatrix x = rng.split(1).matrix(tokens, channels, -1.0, 1.0);
    for (int layer = 0; layer < layers; ++layer) {
      Rng rl = rng.split(100 + layer);
      SsmParams p = make_ssm_params(rl, channels, state_dim);
      ForgetGateStats stats = forget_gate_stats(x, p);
      double mean = 0.0;
      for (double v : stats.mean_gate) mean += v;
      report.mean_forget_gate_per_layer.push_back(mean / stats.mean_gate.size());
      x = selective_scan_serial(x, p);
    }
  }

  // (b) attenuation curves a^k
  for (double a : {0.2, 0.6, 0.8}) {
    char key[8];
    std::snprintf(key, sizeof(key), "%.1f", a);
    report.attenuation_curves[key] = attenuation_curve(a, 10);
  }

  // (c) token-length standard deviation per layer, normalization on vs off,
  // on an 8x-scaled input through a stack of linear-attention mixers
  AttnDiag attn_diag;
  {
    MixerDims dims;
    dims.c = channels;
    dims.d = channels;
    dims.heads = 1;
    MixerConfig on = linear_attention_preset(dims);
    MixerConfig off = on;
    off.normalization = false;
    TokenMatrix x0 = rng.split(2).matrix(tokens, channels, -1.0, 1.0);
    TokenMatrix x_on = scale(x0, report.input_scale);
    TokenMatrix x_off = x_on;
    for (int layer = 0; layer < layers; ++layer) {
      Rng rl = rng.split(200 + layer);
      UnifiedParams p = make_unified_params(rl, dims, on);
      x_on = unified_forward(x_on, p, on, &attn_diag);
      x_off = unified_forward(x_off, p, off, &attn_diag);
      report.token_length_std_norm_on.push_back(detail::token_length_std(x_on));
      report.token_length_std_norm_off.push_back(detail::token_length_std(x_off));
    }
  }

  // (d) prefix-permutation sensitivity with the forget gate on vs off
  {
    MixerDims dims;
    dims.c = channels;
    dims.d = 8;
    dims.heads = 1;
    MixerConfig gated = selective_ssm_preset(dims);
    MixerConfig ungated = gated;
    ungated.forget_gate = false;
    ungated.input_gate = false;
    Rng rp = rng.split(3);
    UnifiedParams p = make_unified_params(rp, dims, gated, ValuePath::RawInput,
                                          Kernel::EluPlusOne);
    TokenMatrix x = rp.matrix(tokens, channels, -1.0, 1.0);
    TokenMatrix xs = detail::swap_first_two(x);
    TokenMatrix y_on = unified_forward(x, p, gated, &attn_diag);
    TokenMatrix ys_on = unified_forward(xs, p, gated, &attn_diag);
    TokenMatrix y_off = unified_forward(x, p, ungated, &attn_diag);
    TokenMatrix ys_off = unified_forward(xs, p, ungated, &attn_diag);
    for (int i = 2; i < tokens; ++i)
      for (int j = 0; j < channels; ++j) {
        report.permutation_delta_forget_on =
            std::max(report.permutation_delta_forget_on, std::abs(y_on(i, j) - ys_on(i, j)));
        report.permutation_delta_forget_off =
            std::max(report.permutation_delta_forget_off,
                     std::abs(y_off(i, j) - ys_off(i, j)));
      }
  }

  report.denominator_clamp_events = attn_diag.clamp_events;
  return report;
}

}  // namespace mixerlab
