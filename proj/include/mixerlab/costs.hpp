#pragma once

#include <cstdint>
#include <iomanip>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "mixerlab/blocks.hpp"

namespace mixerlab {

// FLOP convention used throughout: one multiply-accumulate = 1 FLOP, matching
// the complexity terms the cost model is built from. Norms, activations,
// biases and positional-encoding convolutions are excluded from FLOPs (their
// parameters are still counted); they are the visible residual against
// published totals.
inline constexpr const char* kFlopConvention =
    "multiply-accumulates counted as 1 FLOP; norms/activations/biases/posenc-conv "
    "excluded from FLOPs, included in params";

struct TermFlops {
  uint64_t in_out_proj = 0;
  uint64_t qk_proj = 0;
  uint64_t gate_proj = 0;
  uint64_t linear_attention = 0;
  uint64_t dwconv = 0;
  uint64_t mlp = 0;

  uint64_t total() const {
    return in_out_proj + qk_proj + gate_proj + linear_attention + dwconv + mlp;
  }
};

// Per-block FLOPs from the block's weight shapes. n is the token count at the
// block's stage.
inline TermFlops block_term_flops(const BlockSpec& spec, const MixerConfig& mixer_cfg,
                                  uint64_t n) {
  check_block_spec(spec);
  const uint64_t c = spec.dim;
  const uint64_t ci = spec.inner_dim();
  const uint64_t head_width = ci / spec.heads;
  TermFlops t;
  switch (spec.design) {
    case BlockDesign::Mila:
      t.in_out_proj = 2 * n * c * ci;
      t.qk_proj = 2 * n * ci * ci;
      t.gate_proj = n * c * ci;
      t.linear_attention = 2 * n * ci * head_width;
      t.dwconv = static_cast<uint64_t>(spec.dwconv_kernel) * spec.dwconv_kernel * n * ci;
      t.mlp = 2 * n * c * (static_cast<uint64_t>(spec.mlp_ratio) * c);
      break;
    case BlockDesign::Transformer:
      t.in_out_proj = 2 * n * c * c;  // V projection + output projection
      t.qk_proj = 2 * n * c * c;
      t.linear_attention = 2 * n * c * head_width;
      t.mlp = 2 * n * c * (static_cast<uint64_t>(spec.mlp_ratio) * c);
      break;
    case BlockDesign::Mamba:
      t.in_out_proj = 2 * n * c * ci;
      t.gate_proj = n * c * ci;
      t.qk_proj = 2 * n * ci * ci;
      t.linear_attention = 2 * n * ci * head_width;
      t.dwconv = static_cast<uint64_t>(spec.dwconv_kernel) * spec.dwconv_kernel * n * ci;
      break;
  }
  if (mixer_cfg.input_gate || mixer_cfg.forget_gate) {
    const uint64_t c0 = std::max<uint64_t>(1, ci / 16);
    t.gate_proj += n * ci * c0 + n * c0 * ci;
  }
  return t;
}

// Closed-form single-block totals used by the equivalence checks.
inline uint64_t mila_block_flops(uint64_t n, uint64_t c, uint64_t d, uint64_t k) {
  return 13 * n * c * c + 2 * n * c * d + k * k * n * c;
}

inline uint64_t transformer_block_flops(uint64_t n, uint64_t c, uint64_t d) {
  return 12 * n * c * c + 2 * n * c * d;
}

struct ScopeCost {
  std::string name;
  uint64_t params = 0;
  uint64_t flops = 0;
};

struct CostReport {
  std::string model_name;
  int resolution = 0;
  uint64_t total_params = 0;
  uint64_t total_flops = 0;
  std::vector<ScopeCost> scopes;                // stem, stage1..4, head
  std::map<std::string, uint64_t> term_flops;   // itemized buckets
  std::map<std::string, uint64_t> term_params;  // same buckets, parameter view
  std::string convention = kFlopConvention;
  int schema_version = 1;
};

inline CostReport count_costs(const ModelSpec& spec, int resolution,
                              const MixerConfig* mixer_cfg = nullptr) {
  check_model_spec(spec);
  MixerConfig cfg = mixer_cfg ? *mixer_cfg : mila_preset(MixerDims{});
  std::array<Grid2D, 4> grids = stage_grids(resolution);

  CostReport report;
  report.model_name = spec.name;
  report.resolution = resolution;
  report.scopes.resize(6);
  report.scopes[0].name = "stem";
  for (int i = 0; i < 4; ++i) report.scopes[i + 1].name = "stage" + std::to_string(i + 1);
  report.scopes[5].name = "head";

  // parameters, from the same walk that allocates weights
  std::vector<WeightRecord> records = model_weight_records(spec, &cfg);
  for (const auto& r : records) {
    int slot = r.scope == -1 ? 0 : (r.scope == 4 ? 5 : r.scope + 1);
    report.scopes[slot].params += r.count;
    report.term_params[cost_term_name(r.term)] += r.count;
    report.total_params += r.count;
  }

  // stem: two stride-2 3x3 convolutions
  const uint64_t c1 = spec.stem_out;
  const uint64_t n_half =
      static_cast<uint64_t>(resolution / 2) * static_cast<uint64_t>(resolution / 2);
  const uint64_t n_quarter = static_cast<uint64_t>(grids[0].tokens());
  uint64_t stem_flops = n_half * c1 * (3ull * 9) + n_quarter * c1 * (c1 * 9);
  report.scopes[0].flops = stem_flops;
  report.term_flops["stem"] += stem_flops;
  report.total_flops += stem_flops;

  for (int stage = 0; stage < 4; ++stage) {
    BlockSpec bs = detail::stage_block_spec(spec, stage);
    const uint64_t n = static_cast<uint64_t>(grids[stage].tokens());
    TermFlops t = block_term_flops(bs, cfg, n);
    const uint64_t depth = spec.stages[stage].depth;
    uint64_t stage_flops = t.total() * depth;
    report.scopes[stage + 1].flops += stage_flops;
    report.term_flops["in_out_proj"] += t.in_out_proj * depth;
    report.term_flops["qk_proj"] += t.qk_proj * depth;
    report.term_flops["gate_proj"] += t.gate_proj * depth;
    report.term_flops["linear_attention"] += t.linear_attention * depth;
    report.term_flops["dwconv"] += t.dwconv * depth;
    report.term_flops["mlp"] += t.mlp * depth;
    report.total_flops += stage_flops;

    if (stage < 3) {
      const uint64_t n_next = static_cast<uint64_t>(grids[stage + 1].tokens());
      const uint64_t ds = n_next * static_cast<uint64_t>(spec.stages[stage + 1].dim) *
                          (static_cast<uint64_t>(spec.stages[stage].dim) * 9);
      report.scopes[stage + 1].flops += ds;
      report.term_flops["downsample"] += ds;
      report.total_flops += ds;
    }
  }

  const uint64_t head_flops =
      static_cast<uint64_t>(spec.stages[3].dim) * static_cast<uint64_t>(spec.num_classes);
  report.scopes[5].flops = head_flops;
  report.term_flops["head"] += head_flops;
  report.total_flops += head_flops;

  return report;
}

inline std::string cost_report_table(const CostReport& r) {
  std::ostringstream os;
  os << "model " << r.model_name << " @ " << r.resolution << "x" << r.resolution << "\n";
  os << "convention: " << r.convention << "\n\n";
  os << std::left << std::setw(12) << "scope" << std::right << std::setw(16) << "params"
     << std::setw(18) << "flops" << "\n";
  for (const auto& s : r.scopes) {
    os << std::left << std::setw(12) << s.name << std::right << std::setw(16) << s.params
       << std::setw(18) << s.flops << "\n";
  }
  os << std::left << std::setw(12) << "total" << std::right << std::setw(16)
     << r.total_params << std::setw(18) << r.total_flops << "\n\n";
  os << std::left << std::setw(20) << "term" << std::right << std::setw(18) << "flops"
     << std::setw(16) << "params" << "\n";
  for (const auto& [term, flops] : r.term_flops) {
    uint64_t params = 0;
    if (auto it = r.term_params.find(term); it != r.term_params.end()) params = it->second;
    os << std::left << std::setw(20) << term << std::right << std::setw(18) << flops
       << std::setw(16) << params << "\n";
  }
  for (const auto& [term, params] : r.term_params) {
    if (r.term_flops.count(term) == 0) {
      os << std::left << std::setw(20) << term << std::right << std::setw(18) << 0
         << std::setw(16) << params << "\n";
    }
  }
  return os.str();
}

}  // namespace mixerlab
