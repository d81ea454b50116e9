#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "mixerlab/matrix.hpp"
#include "mixerlab/numerics.hpp"
#include "mixerlab/posenc.hpp"
#include "mixerlab/unified.hpp"

namespace mixerlab {

enum class Activation { SiLU, Gelu, Identity };

inline double apply_activation(Activation a, double x) {
  switch (a) {
    case Activation::SiLU: return silu(x);
    case Activation::Gelu: return gelu(x);
    case Activation::Identity: return x;
  }
  return x;
}

inline TokenMatrix apply_activation(Activation a, const TokenMatrix& x) {
  if (a == Activation::Identity) return x;
  TokenMatrix out = x;
  for (auto& v : out.data()) v = apply_activation(a, v);
  return out;
}

// y = x W + b
struct LinearLayer {
  DenseMatrix w;
  std::vector<double> b;
};

inline TokenMatrix apply_linear(const TokenMatrix& x, const LinearLayer& l) {
  TokenMatrix y = matmul(x, l.w);
  if (!l.b.empty()) {
    if (static_cast<int>(l.b.size()) != y.cols()) {
      throw DimensionError("linear bias width mismatch");
    }
    for (int i = 0; i < y.rows(); ++i) {
      double* row = y.row_ptr(i);
      for (int j = 0; j < y.cols(); ++j) row[j] += l.b[j];
    }
  }
  return y;
}

struct NormLayer {
  std::vector<double> gamma;
  std::vector<double> beta;
  double eps = 1e-5;
};

inline TokenMatrix apply_norm(const TokenMatrix& x, const NormLayer& n) {
  return layer_norm(x, n.gamma, n.beta, n.eps);
}

// Dense 2D convolution for stem/downsample layers. Weight rows are output
// channels, columns are in_ch * k * k taps (channel-major, then kernel
// row-major). Zero padding of k/2 on each side.
struct ConvLayer {
  int in_ch = 0, out_ch = 0, k = 3, stride = 1;
  DenseMatrix w;  // out_ch x (in_ch * k * k)
  std::vector<double> b;
};

inline std::pair<TokenMatrix, Grid2D> conv2d_forward(const TokenMatrix& x,
                                                     const Grid2D& grid,
                                                     const ConvLayer& conv) {
  check_grid(grid, x.rows());
  if (x.cols() != conv.in_ch) throw DimensionError("conv2d input channel mismatch");
  const int k = conv.k, r = k / 2, s = conv.stride;
  const Grid2D out_grid{(grid.height + s - 1) / s, (grid.width + s - 1) / s};
  TokenMatrix out(out_grid.tokens(), conv.out_ch);
  for (int orow = 0; orow < out_grid.height; ++orow) {
    for (int ocol = 0; ocol < out_grid.width; ++ocol) {
      double* out_row = out.row_ptr(orow * out_grid.width + ocol);
      for (int oc = 0; oc < conv.out_ch; ++oc) out_row[oc] = conv.b.empty() ? 0.0 : conv.b[oc];
      for (int dr = -r; dr <= r; ++dr) {
        const int irow = orow * s + dr;
        if (irow < 0 || irow >= grid.height) continue;
        for (int dc = -r; dc <= r; ++dc) {
          const int icol = ocol * s + dc;
          if (icol < 0 || icol >= grid.width) continue;
          const double* in_row = x.row_ptr(irow * grid.width + icol);
          const int tap = (dr + r) * k + (dc + r);
          for (int ic = 0; ic < conv.in_ch; ++ic) {
            const double pix = in_row[ic];
            const int col_base = ic * k * k + tap;
            for (int oc = 0; oc < conv.out_ch; ++oc)
              out_row[oc] += conv.w(oc, col_base) * pix;
          }
        }
      }
    }
  }
  return {std::move(out), out_grid};
}

// Macro block description. head_dim is the per-head query/key width, fixed to
// dim/heads. expansion applies to the Mamba design only.
struct BlockSpec {
  BlockDesign design = BlockDesign::Mila;
  int dim = 0;
  int heads = 1;
  int mlp_ratio = 4;
  double expansion = 1.0;
  std::vector<PosEncSpec> posenc;
  int dwconv_kernel = 3;  // branch DWConv of the gated designs
  Activation branch_act = Activation::SiLU;
  Activation mlp_act = Activation::Gelu;
  double norm_eps = 1e-5;

  int head_dim() const { return dim / heads; }
  int inner_dim() const {
    return design == BlockDesign::Mamba ? static_cast<int>(expansion * dim) : dim;
  }

  const PosEncSpec* find_posenc(PosEncKind kind) const {
    for (const auto& p : posenc)
      if (p.kind == kind) return &p;
    return nullptr;
  }
};

inline void check_block_spec(const BlockSpec& spec) {
  if (spec.dim < 1 || spec.heads < 1 || spec.dim % spec.heads != 0) {
    throw DimensionError("block dim must be a positive multiple of the head count");
  }
  if (spec.mlp_ratio < 1) throw DimensionError("mlp_ratio must be >= 1");
  if (spec.design == BlockDesign::Mamba && spec.expansion != 1.0 && spec.expansion != 2.0) {
    throw DimensionError("mamba expansion factor must be 1.0 or 2.0");
  }
  if (spec.inner_dim() % spec.heads != 0) {
    throw DimensionError("expanded width must stay divisible by the head count");
  }
}

// Cost buckets; the first six are the per-block terms of the complexity
// breakdown, the rest cover the surrounding model.
enum class CostTerm {
  InOutProj,
  QkProj,
  GateProj,
  LinearAttention,
  Dwconv,
  Mlp,
  Stem,
  Downsample,
  Head,
  Other  // norms, positional-encoding tables/kernels: parameters only
};

inline const char* cost_term_name(CostTerm t) {
  switch (t) {
    case CostTerm::InOutProj: return "in_out_proj";
    case CostTerm::QkProj: return "qk_proj";
    case CostTerm::GateProj: return "gate_proj";
    case CostTerm::LinearAttention: return "linear_attention";
    case CostTerm::Dwconv: return "dwconv";
    case CostTerm::Mlp: return "mlp";
    case CostTerm::Stem: return "stem";
    case CostTerm::Downsample: return "downsample";
    case CostTerm::Head: return "head";
    case CostTerm::Other: return "other";
  }
  return "other";
}

struct WeightRecord {
  std::string name;
  int scope;  // -1 stem, 0..3 stages, 4 head
  CostTerm term;
  uint64_t count;
};

// Funnels every allocation through one place so parameter accounting and the
// actual forward-pass weights can never drift apart. With materialize off,
// only the records are produced.
class WeightBuilder {
 public:
  WeightBuilder(uint64_t seed, bool materialize)
      : rng_(seed), materialize_(materialize) {}

  DenseMatrix matrix(int scope, CostTerm term, const std::string& name, int rows,
                     int cols, double bound) {
    records_.push_back({name, scope, term, static_cast<uint64_t>(rows) * cols});
    if (!materialize_) return DenseMatrix();
    Rng r = rng_.split(records_.size());
    return r.matrix(rows, cols, -bound, bound);
  }

  DenseMatrix projection(int scope, CostTerm term, const std::string& name, int in_dim,
                         int out_dim) {
    return matrix(scope, term, name, in_dim, out_dim,
                  1.0 / std::sqrt(static_cast<double>(in_dim)));
  }

  std::vector<double> vec(int scope, CostTerm term, const std::string& name, int n,
                          double value) {
    records_.push_back({name, scope, term, static_cast<uint64_t>(n)});
    if (!materialize_) return {};
    return std::vector<double>(n, value);
  }

  LinearLayer linear(int scope, CostTerm term, const std::string& name, int in_dim,
                     int out_dim) {
    LinearLayer l;
    l.w = projection(scope, term, name + ".w", in_dim, out_dim);
    l.b = vec(scope, term, name + ".b", out_dim, 0.0);
    return l;
  }

  NormLayer norm(int scope, const std::string& name, int dim, double eps) {
    NormLayer n;
    n.gamma = vec(scope, CostTerm::Other, name + ".gamma", dim, 1.0);
    n.beta = vec(scope, CostTerm::Other, name + ".beta", dim, 0.0);
    n.eps = eps;
    return n;
  }

  DepthwiseKernel dwconv(int scope, CostTerm term, const std::string& name, int channels,
                         int k) {
    DepthwiseKernel kern;
    kern.k = k;
    kern.weights =
        matrix(scope, term, name, channels, k * k, 1.0 / static_cast<double>(k * k));
    return kern;
  }

  ConvLayer conv(int scope, CostTerm term, const std::string& name, int in_ch, int out_ch,
                 int k, int stride) {
    ConvLayer c;
    c.in_ch = in_ch;
    c.out_ch = out_ch;
    c.k = k;
    c.stride = stride;
    c.w = matrix(scope, term, name + ".w", out_ch, in_ch * k * k,
                 1.0 / std::sqrt(static_cast<double>(in_ch * k * k)));
    c.b = vec(scope, term, name + ".b", out_ch, 0.0);
    return c;
  }

  std::vector<double> negative_gate_diagonal(int scope, const std::string& name, int n) {
    records_.push_back({name, scope, CostTerm::Other, static_cast<uint64_t>(n)});
    if (!materialize_) return {};
    Rng r = rng_.split(records_.size() * 31 + 5);
    std::vector<double> a(n);
    for (auto& v : a) v = -std::exp(r.uniform(-4.0, 0.0));
    return a;
  }

  const std::vector<WeightRecord>& records() const { return records_; }

  uint64_t total_count() const {
    uint64_t sum = 0;
    for (const auto& r : records_) sum += r.count;
    return sum;
  }

  bool materialized() const { return materialize_; }

 private:
  Rng rng_;
  bool materialize_;
  std::vector<WeightRecord> records_;
};

struct BlockWeights {
  NormLayer norm1;
  LinearLayer in_proj;        // Mila/Mamba
  LinearLayer gate_proj;      // Mila/Mamba
  DepthwiseKernel branch_dw;  // Mila/Mamba
  UnifiedParams mixer;        // query/key (+ value for Transformer, gates if any)
  DepthwiseKernel cpe_kern;   // Mila, block entry
  DepthwiseKernel lepe_kern;  // Mila, value branch
  LinearLayer out_proj;
  NormLayer norm2;            // Transformer/Mila MLP sub-block
  LinearLayer mlp_fc1, mlp_fc2;
  NormLayer final_norm;       // Mamba design keeps one trailing norm
};

// Allocates (or just records) one block's weights. The mixer config decides
// whether gate parameters exist.
inline BlockWeights make_block_weights(WeightBuilder& wb, int scope, const std::string& prefix,
                                       const BlockSpec& spec, const MixerConfig& mixer_cfg) {
  check_block_spec(spec);
  const int c = spec.dim;
  const int ci = spec.inner_dim();
  BlockWeights w;
  w.norm1 = wb.norm(scope, prefix + ".norm1", c, spec.norm_eps);

  const bool gated_design =
      spec.design == BlockDesign::Mila || spec.design == BlockDesign::Mamba;
  if (gated_design) {
    w.in_proj = wb.linear(scope, CostTerm::InOutProj, prefix + ".in_proj", c, ci);
    w.gate_proj = wb.linear(scope, CostTerm::GateProj, prefix + ".gate_proj", c, ci);
    w.branch_dw = wb.dwconv(scope, CostTerm::Dwconv, prefix + ".dwconv", ci,
                            spec.dwconv_kernel);
  }

  w.mixer.w_query = wb.projection(scope, CostTerm::QkProj, prefix + ".w_query", ci, ci);
  w.mixer.w_key = wb.projection(scope, CostTerm::QkProj, prefix + ".w_key", ci, ci);
  w.mixer.kernel = Kernel::EluPlusOne;
  if (spec.design == BlockDesign::Transformer) {
    // the Transformer block keeps its V projection; gated designs feed the
    // branch input directly as values
    w.mixer.value_path = ValuePath::Projected;
    w.mixer.w_value = wb.projection(scope, CostTerm::InOutProj, prefix + ".w_value", ci, ci);
  } else {
    w.mixer.value_path = ValuePath::RawInput;
  }
  if (mixer_cfg.forget_gate) {
    w.mixer.a_diag = wb.negative_gate_diagonal(scope, prefix + ".a_diag", ci);
  }
  if (mixer_cfg.forget_gate || mixer_cfg.input_gate) {
    const int c0 = std::max(1, ci / 16);
    w.mixer.w_gate_1 = wb.projection(scope, CostTerm::GateProj, prefix + ".w_gate_1", ci, c0);
    w.mixer.w_gate_2 = wb.projection(scope, CostTerm::GateProj, prefix + ".w_gate_2", c0, ci);
  }
  if (mixer_cfg.shortcut) {
    w.mixer.d_skip = wb.vec(scope, CostTerm::Other, prefix + ".d_skip", ci, 1.0);
  }

  if (spec.design == BlockDesign::Mila) {
    if (const PosEncSpec* pe = spec.find_posenc(PosEncKind::Cpe)) {
      w.cpe_kern = wb.dwconv(scope, CostTerm::Other, prefix + ".cpe", c, pe->dwconv_kernel);
    }
    if (const PosEncSpec* pe = spec.find_posenc(PosEncKind::Lepe)) {
      w.lepe_kern = wb.dwconv(scope, CostTerm::Other, prefix + ".lepe", ci, pe->dwconv_kernel);
    }
  }

  w.out_proj = wb.linear(scope, CostTerm::InOutProj, prefix + ".out_proj", ci, c);

  if (spec.design != BlockDesign::Mamba) {
    w.norm2 = wb.norm(scope, prefix + ".norm2", c, spec.norm_eps);
    w.mlp_fc1 = wb.linear(scope, CostTerm::Mlp, prefix + ".mlp.fc1", c, spec.mlp_ratio * c);
    w.mlp_fc2 = wb.linear(scope, CostTerm::Mlp, prefix + ".mlp.fc2", spec.mlp_ratio * c, c);
  } else {
    w.final_norm = wb.norm(scope, prefix + ".final_norm", c, spec.norm_eps);
  }
  return w;
}

namespace detail {

// Runs the configured mixer over the branch tokens. Only the forget gate
// forces the causal path; everything else runs in the global parallel form,
// optionally with rotary embedding on the numerator's q/k.
inline TokenMatrix mixer_apply(const TokenMatrix& tokens, const Grid2D& grid,
                               const UnifiedParams& params, const MixerConfig& cfg,
                               const BlockSpec& spec, AttnDiag* diag) {
  MixerConfig effective = cfg;
  effective.heads = spec.heads;
  effective.dims.c = tokens.cols();
  effective.dims.d = params.w_query.cols();
  if (effective.forget_gate) {
    return unified_forward(tokens, params, effective, diag);
  }
  const PosEncSpec* rope = spec.find_posenc(PosEncKind::Rope);
  if (rope != nullptr && spec.design != BlockDesign::Transformer) {
    RopeContext ctx{grid, rope->rope_base};
    return unified_forward_parallel(tokens, params, effective, &ctx, diag);
  }
  return unified_forward_parallel(tokens, params, effective, nullptr, diag);
}

}  // namespace detail

// One macro block. The Mila path is: APE table (caller-owned, grid-sized) and
// CPE residual at entry, norm, in-proj -> DWConv -> act -> linear attention
// (LePE added on the values, RoPE on Q/K), gated by act(gate-proj), out-proj,
// residual, then a standard MLP sub-block. The Mamba path is the single gated
// design without the MLP; the Transformer path is attention + MLP with
// standard residuals.
inline TokenMatrix block_forward(const TokenMatrix& x, const Grid2D& grid,
                                 const BlockWeights& w, const BlockSpec& spec,
                                 const MixerConfig& mixer_cfg, AttnDiag* diag = nullptr,
                                 const DenseMatrix* ape_table = nullptr) {
  check_block_spec(spec);
  check_grid(grid, x.rows());
  if (x.cols() != spec.dim) throw DimensionError("block input width mismatch");
  if (spec.find_posenc(PosEncKind::Ape) && ape_table == nullptr) {
    throw DimensionError("APE is enabled but no position table was supplied");
  }

  switch (spec.design) {
    case BlockDesign::Mila: {
      TokenMatrix h = x;
      if (ape_table != nullptr && spec.find_posenc(PosEncKind::Ape)) {
        h = ape_add(h, *ape_table);
      }
      if (spec.find_posenc(PosEncKind::Cpe)) {
        h = add(h, depthwise_conv2d(h, grid, w.cpe_kern));
      }
      TokenMatrix u = apply_norm(h, w.norm1);
      TokenMatrix a = apply_linear(u, w.in_proj);
      a = depthwise_conv2d(a, grid, w.branch_dw);
      a = apply_activation(spec.branch_act, a);
      TokenMatrix attn = detail::mixer_apply(a, grid, w.mixer, mixer_cfg, spec, diag);
      if (spec.find_posenc(PosEncKind::Lepe)) {
        attn = add(attn, lepe(a, grid, w.lepe_kern));
      }
      TokenMatrix gate = apply_activation(spec.branch_act, apply_linear(u, w.gate_proj));
      TokenMatrix y = apply_linear(hadamard(attn, gate), w.out_proj);
      h = add(h, y);

      TokenMatrix m = apply_linear(apply_norm(h, w.norm2), w.mlp_fc1);
      m = apply_activation(spec.mlp_act, m);
      m = apply_linear(m, w.mlp_fc2);
      return add(h, m);
    }
    case BlockDesign::Mamba: {
      TokenMatrix u = apply_norm(x, w.norm1);
      TokenMatrix a = apply_linear(u, w.in_proj);
      a = depthwise_conv2d(a, grid, w.branch_dw);
      a = apply_activation(spec.branch_act, a);
      TokenMatrix mixed = detail::mixer_apply(a, grid, w.mixer, mixer_cfg, spec, diag);
      TokenMatrix gate = apply_activation(spec.branch_act, apply_linear(u, w.gate_proj));
      TokenMatrix y = apply_linear(hadamard(mixed, gate), w.out_proj);
      return apply_norm(add(x, y), w.final_norm);
    }
    case BlockDesign::Transformer: {
      TokenMatrix u = apply_norm(x, w.norm1);
      TokenMatrix attn = detail::mixer_apply(u, grid, w.mixer, mixer_cfg, spec, diag);
      TokenMatrix h = add(x, apply_linear(attn, w.out_proj));
      TokenMatrix m = apply_linear(apply_norm(h, w.norm2), w.mlp_fc1);
      m = apply_activation(spec.mlp_act, m);
      m = apply_linear(m, w.mlp_fc2);
      return add(h, m);
    }
  }
  throw DimensionError("unknown block design");
}

struct StageSpec {
  int dim = 0;
  int heads = 1;
  int depth = 1;
};

// Four-stage model description. The stem reduces 4x, every later stage 2x.
struct ModelSpec {
  std::string name = "custom";
  std::array<StageSpec, 4> stages{};
  int stem_out = 0;
  int patch = 4;
  int num_classes = 1000;
  BlockSpec block;  // template; dim/heads filled per stage
  int schema_version = 1;
};

inline void check_model_spec(const ModelSpec& spec) {
  for (const auto& st : spec.stages) {
    if (st.depth < 1 || st.dim < 1 || st.heads < 1 || st.dim % st.heads != 0) {
      throw DimensionError("invalid stage spec");
    }
  }
  for (int i = 1; i < 4; ++i) {
    if (spec.stages[i].dim <= spec.stages[i - 1].dim) {
      throw DimensionError("stage dims must strictly increase");
    }
  }
  if (spec.stem_out != spec.stages[0].dim) {
    throw DimensionError("stem output must match the first stage width");
  }
  if (spec.patch != 4) throw DimensionError("stem downsample factor is fixed at 4");
}

inline BlockSpec mila_block_template() {
  BlockSpec b;
  b.design = BlockDesign::Mila;
  b.mlp_ratio = 4;
  b.posenc = {PosEncSpec{PosEncKind::Lepe, 3, 10000.0}, PosEncSpec{PosEncKind::Cpe, 3, 10000.0},
              PosEncSpec{PosEncKind::Rope, 3, 10000.0}};
  return b;
}

inline ModelSpec mila_model(const std::string& name, int base_dim, int base_heads,
                            std::array<int, 4> depths) {
  ModelSpec m;
  m.name = name;
  for (int i = 0; i < 4; ++i) {
    m.stages[i].dim = base_dim << i;
    m.stages[i].heads = base_heads << i;
    m.stages[i].depth = depths[i];
  }
  m.stem_out = base_dim;
  m.block = mila_block_template();
  return m;
}

inline ModelSpec mila_t() { return mila_model("MILA-T", 64, 2, {2, 4, 8, 4}); }
inline ModelSpec mila_s() { return mila_model("MILA-S", 64, 2, {3, 6, 21, 6}); }
inline ModelSpec mila_b() { return mila_model("MILA-B", 96, 3, {3, 6, 21, 6}); }

inline ModelSpec model_by_name(std::string name) {
  for (auto& ch : name) ch = static_cast<char>(std::tolower(ch));
  if (name == "t" || name == "mila-t") return mila_t();
  if (name == "s" || name == "mila-s") return mila_s();
  if (name == "b" || name == "mila-b") return mila_b();
  throw DimensionError("unknown model name (expected T, S or B)");
}

struct Model {
  ModelSpec spec;
  ConvLayer stem1, stem2;
  std::array<std::vector<BlockWeights>, 4> stages;
  std::array<ConvLayer, 3> downsamples;
  NormLayer final_norm;
  LinearLayer head;
  MixerConfig mixer_cfg;
  std::vector<WeightRecord> registry;

  uint64_t param_count() const {
    uint64_t sum = 0;
    for (const auto& r : registry) sum += r.count;
    return sum;
  }
};

namespace detail {

inline BlockSpec stage_block_spec(const ModelSpec& spec, int stage) {
  BlockSpec b = spec.block;
  b.dim = spec.stages[stage].dim;
  b.heads = spec.stages[stage].heads;
  return b;
}

// Single walk that both build_model and count_costs rely on.
inline void build_weights(WeightBuilder& wb, const ModelSpec& spec,
                          const MixerConfig& mixer_cfg, Model* out) {
  check_model_spec(spec);
  const int c1 = spec.stem_out;
  ConvLayer stem1 = wb.conv(-1, CostTerm::Stem, "stem.conv1", 3, c1, 3, 2);
  ConvLayer stem2 = wb.conv(-1, CostTerm::Stem, "stem.conv2", c1, c1, 3, 2);
  if (out) {
    out->stem1 = std::move(stem1);
    out->stem2 = std::move(stem2);
  }
  for (int stage = 0; stage < 4; ++stage) {
    BlockSpec bs = stage_block_spec(spec, stage);
    for (int blk = 0; blk < spec.stages[stage].depth; ++blk) {
      std::string prefix = "stage" + std::to_string(stage + 1) + ".block" + std::to_string(blk);
      BlockWeights w = make_block_weights(wb, stage, prefix, bs, mixer_cfg);
      if (out) out->stages[stage].push_back(std::move(w));
    }
    if (stage < 3) {
      ConvLayer ds = wb.conv(stage, CostTerm::Downsample,
                             "downsample" + std::to_string(stage + 1),
                             spec.stages[stage].dim, spec.stages[stage + 1].dim, 3, 2);
      if (out) out->downsamples[stage] = std::move(ds);
    }
  }
  NormLayer fn = wb.norm(4, "final_norm", spec.stages[3].dim, spec.block.norm_eps);
  LinearLayer head = wb.linear(4, CostTerm::Head, "head", spec.stages[3].dim,
                               spec.num_classes);
  if (out) {
    out->final_norm = std::move(fn);
    out->head = std::move(head);
  }
}

}  // namespace detail

inline Model build_model(const ModelSpec& spec, uint64_t seed = 1,
                         const MixerConfig* mixer_cfg = nullptr) {
  Model m;
  m.spec = spec;
  m.mixer_cfg = mixer_cfg ? *mixer_cfg : mila_preset(MixerDims{});
  WeightBuilder wb(seed, true);
  detail::build_weights(wb, spec, m.mixer_cfg, &m);
  m.registry = wb.records();
  return m;
}

inline std::vector<WeightRecord> model_weight_records(const ModelSpec& spec,
                                                      const MixerConfig* mixer_cfg = nullptr) {
  WeightBuilder wb(0, false);
  MixerConfig cfg = mixer_cfg ? *mixer_cfg : mila_preset(MixerDims{});
  detail::build_weights(wb, spec, cfg, nullptr);
  return wb.records();
}

// Grid (and token count) entering each stage for a given input resolution.
inline std::array<Grid2D, 4> stage_grids(int resolution) {
  if (resolution < 32 || resolution % 32 != 0) {
    throw DimensionError("input resolution must be a positive multiple of 32");
  }
  std::array<Grid2D, 4> grids;
  int side = resolution / 4;
  for (int i = 0; i < 4; ++i) {
    grids[i] = Grid2D{side, side};
    side /= 2;
  }
  return grids;
}

// Full forward pass: stem, four stages with downsampling between them, final
// norm, global average pool, classifier.
inline std::vector<double> model_forward(const Model& model, const TokenMatrix& image,
                                         int resolution) {
  if (image.cols() != 3) throw DimensionError("model input must have 3 channels");
  if (image.rows() != resolution * resolution) {
    throw DimensionError("model input token count must equal resolution^2");
  }
  std::array<Grid2D, 4> grids = stage_grids(resolution);

  Grid2D grid{resolution, resolution};
  auto [h1, g1] = conv2d_forward(image, grid, model.stem1);
  h1 = apply_activation(Activation::Gelu, h1);
  auto [x, g] = conv2d_forward(h1, g1, model.stem2);

  for (int stage = 0; stage < 4; ++stage) {
    if (g.height != grids[stage].height || g.width != grids[stage].width) {
      throw DimensionError("internal grid bookkeeping mismatch");
    }
    BlockSpec bs = detail::stage_block_spec(model.spec, stage);
    for (const BlockWeights& w : model.stages[stage]) {
      x = block_forward(x, g, w, bs, model.mixer_cfg);
    }
    if (stage < 3) {
      auto [xn, gn] = conv2d_forward(x, g, model.downsamples[stage]);
      x = std::move(xn);
      g = gn;
    }
  }

  x = apply_norm(x, model.final_norm);
  std::vector<double> pooled(x.cols(), 0.0);
  for (int i = 0; i < x.rows(); ++i)
    for (int j = 0; j < x.cols(); ++j) pooled[j] += x(i, j);
  for (auto& v : pooled) v /= x.rows();

  std::vector<double> logits(model.spec.num_classes, 0.0);
  for (int o = 0; o < model.spec.num_classes; ++o) {
    double acc = model.head.b.empty() ? 0.0 : model.head.b[o];
    for (int j = 0; j < x.cols(); ++j) acc += pooled[j] * model.head.w(j, o);
    logits[o] = acc;
  }
  return logits;
}

}  // namespace mixerlab
