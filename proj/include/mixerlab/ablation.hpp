#pragma once

#include <cmath>
#include <string>

#include "mixerlab/blocks.hpp"
#include "mixerlab/unified.hpp"

namespace mixerlab {

enum class Toggle { InputGate, ForgetGate, Shortcut, Normalization, MultiHead, BlockDesign };

inline Toggle toggle_from_name(const std::string& name) {
  if (name == "input-gate") return Toggle::InputGate;
  if (name == "forget-gate") return Toggle::ForgetGate;
  if (name == "shortcut") return Toggle::Shortcut;
  if (name == "normalization") return Toggle::Normalization;
  if (name == "multi-head") return Toggle::MultiHead;
  if (name == "block-design") return Toggle::BlockDesign;
  throw DimensionError("unknown toggle: " + name);
}

inline const char* toggle_name(Toggle t) {
  switch (t) {
    case Toggle::InputGate: return "input-gate";
    case Toggle::ForgetGate: return "forget-gate";
    case Toggle::Shortcut: return "shortcut";
    case Toggle::Normalization: return "normalization";
    case Toggle::MultiHead: return "multi-head";
    case Toggle::BlockDesign: return "block-design";
  }
  return "?";
}

struct AblationResult {
  TokenMatrix before;
  TokenMatrix after;
  double mean_abs_delta = 0.0;
  double output_norm_ratio = 1.0;  // |after| / |before|
};

namespace detail {

inline AblationResult summarize(TokenMatrix before, TokenMatrix after) {
  AblationResult r;
  double sum = 0.0;
  for (size_t i = 0; i < before.size(); ++i)
    sum += std::abs(after.data()[i] - before.data()[i]);
  r.mean_abs_delta = sum / static_cast<double>(before.size());
  r.output_norm_ratio =
      frobenius_norm(after) / std::max(frobenius_norm(before), 1e-300);
  r.before = std::move(before);
  r.after = std::move(after);
  return r;
}

inline Grid2D ablation_grid(int n) {
  int side = static_cast<int>(std::lround(std::sqrt(static_cast<double>(n))));
  if (side * side == n) return {side, side};
  return {1, n};
}

}  // namespace detail

// Flips one of the six distinctions and returns both outputs with summary
// deltas. The five operation-level toggles rerun the unified mixer; the
// block-design toggle compares macro blocks built on one weight seed.
inline AblationResult ablate(const TokenMatrix& x, const UnifiedParams& p,
                             const MixerConfig& base, Toggle toggle,
                             uint64_t block_seed = 17) {
  MixerConfig flipped = base;
  switch (toggle) {
    case Toggle::InputGate:
      flipped.input_gate = !base.input_gate;
      if (flipped.input_gate && p.w_gate_1.empty()) {
        throw NumericError("input-gate toggle needs gate projections in the parameters");
      }
      break;
    case Toggle::ForgetGate:
      flipped.forget_gate = !base.forget_gate;
      if (flipped.forget_gate && p.a_diag.empty()) {
        throw NumericError("forget-gate toggle needs a_diag in the parameters");
      }
      break;
    case Toggle::Shortcut:
      flipped.shortcut = !base.shortcut;
      if (flipped.shortcut && p.d_skip.empty()) {
        throw NumericError("shortcut toggle needs d_skip in the parameters");
      }
      break;
    case Toggle::Normalization:
      flipped.normalization = !base.normalization;
      break;
    case Toggle::MultiHead:
      flipped.heads = base.heads > 1 ? 1 : std::max(1, base.dims.heads);
      break;
    case Toggle::BlockDesign: {
      BlockSpec spec = mila_block_template();
      spec.dim = x.cols();
      spec.heads = base.heads;
      if ((spec.dim / spec.heads) % 4 != 0) {
        // rope needs 4-aligned per-head widths; drop it rather than fail
        spec.posenc = {PosEncSpec{PosEncKind::Lepe, 3, 10000.0},
                       PosEncSpec{PosEncKind::Cpe, 3, 10000.0}};
      }
      BlockSpec other = spec;
      spec.design = base.block_design;
      other.design =
          base.block_design == BlockDesign::Mila ? BlockDesign::Transformer : BlockDesign::Mila;
      Grid2D grid = detail::ablation_grid(x.rows());

      WeightBuilder wa(block_seed, true);
      BlockWeights w_before = make_block_weights(wa, 0, "ablate", spec, base);
      WeightBuilder wbuilder(block_seed, true);
      BlockWeights w_after = make_block_weights(wbuilder, 0, "ablate", other, base);
      TokenMatrix before = block_forward(x, grid, w_before, spec, base);
      TokenMatrix after = block_forward(x, grid, w_after, other, base);
      return detail::summarize(std::move(before), std::move(after));
    }
  }
  TokenMatrix before = unified_forward(x, p, base);
  TokenMatrix after = unified_forward(x, p, flipped);
  return detail::summarize(std::move(before), std::move(after));
}

}  // namespace mixerlab
