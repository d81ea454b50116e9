#pragma once

// JSON / CSV views of the harness reports. JSON output is deterministic for a
// fixed seed: keys are sorted and doubles print in shortest round-trip form.

#include <sstream>
#include <string>

#include <json.hpp>

#include "mixerlab/bench.hpp"
#include "mixerlab/blocks.hpp"
#include "mixerlab/costs.hpp"
#include "mixerlab/diag.hpp"
#include "mixerlab/verify.hpp"

namespace mixerlab {

using json = nlohmann::json;

// ---- ModelSpec <-> JSON (versioned) ----

inline const char* block_design_name(BlockDesign d) {
  switch (d) {
    case BlockDesign::Transformer: return "transformer";
    case BlockDesign::Mamba: return "mamba";
    case BlockDesign::Mila: return "mila";
  }
  return "mila";
}

inline BlockDesign block_design_from_name(const std::string& name) {
  if (name == "transformer") return BlockDesign::Transformer;
  if (name == "mamba") return BlockDesign::Mamba;
  if (name == "mila") return BlockDesign::Mila;
  throw DimensionError("unknown block design: " + name);
}

inline json to_json(const ModelSpec& spec) {
  json stages = json::array();
  for (const auto& st : spec.stages) {
    stages.push_back({{"dim", st.dim}, {"heads", st.heads}, {"depth", st.depth}});
  }
  json posenc = json::array();
  for (const auto& pe : spec.block.posenc) {
    posenc.push_back({{"kind", posenc_kind_name(pe.kind)},
                      {"dwconv_kernel", pe.dwconv_kernel},
                      {"rope_base", pe.rope_base}});
  }
  return json{{"schema_version", spec.schema_version},
              {"name", spec.name},
              {"stem_out", spec.stem_out},
              {"patch", spec.patch},
              {"num_classes", spec.num_classes},
              {"stages", stages},
              {"block",
               {{"design", block_design_name(spec.block.design)},
                {"mlp_ratio", spec.block.mlp_ratio},
                {"expansion", spec.block.expansion},
                {"dwconv_kernel", spec.block.dwconv_kernel},
                {"norm_eps", spec.block.norm_eps},
                {"posenc", posenc}}}};
}

inline ModelSpec model_spec_from_json(const json& j) {
  if (j.value("schema_version", 1) != 1) {
    throw DimensionError("unsupported model spec schema version");
  }
  ModelSpec spec;
  spec.name = j.value("name", std::string("custom"));
  spec.stem_out = j.at("stem_out").get<int>();
  spec.patch = j.value("patch", 4);
  spec.num_classes = j.value("num_classes", 1000);
  const auto& stages = j.at("stages");
  if (stages.size() != 4) throw DimensionError("model spec needs exactly 4 stages");
  for (int i = 0; i < 4; ++i) {
    spec.stages[i].dim = stages[i].at("dim").get<int>();
    spec.stages[i].heads = stages[i].at("heads").get<int>();
    spec.stages[i].depth = stages[i].at("depth").get<int>();
  }
  spec.block = mila_block_template();
  if (j.contains("block")) {
    const auto& b = j.at("block");
    spec.block.design = block_design_from_name(b.value("design", std::string("mila")));
    spec.block.mlp_ratio = b.value("mlp_ratio", 4);
    spec.block.expansion = b.value("expansion", 1.0);
    spec.block.dwconv_kernel = b.value("dwconv_kernel", 3);
    spec.block.norm_eps = b.value("norm_eps", 1e-5);
    if (b.contains("posenc")) {
      spec.block.posenc.clear();
      for (const auto& pe : b.at("posenc")) {
        PosEncSpec s;
        s.kind = posenc_kind_from_name(pe.at("kind").get<std::string>());
        s.dwconv_kernel = pe.value("dwconv_kernel", 3);
        s.rope_base = pe.value("rope_base", 10000.0);
        spec.block.posenc.push_back(s);
      }
    }
  }
  check_model_spec(spec);
  return spec;
}

// ---- verify ----

inline json to_json(const VerifyReport& r) {
  json checks = json::array();
  for (const auto& c : r.checks) {
    checks.push_back({{"name", c.name},
                      {"max_error", c.max_error},
                      {"tolerance", c.tolerance},
                      {"trials", c.trials},
                      {"pass", c.pass}});
  }
  return json{{"schema_version", r.schema_version},
              {"seed", r.seed},
              {"trials", r.trials},
              {"inject_fault", r.inject_fault},
              {"all_pass", r.all_pass},
              {"checks", checks}};
}

// CSV columns: name,max_error,tolerance,trials,pass
inline std::string to_csv(const VerifyReport& r) {
  std::ostringstream os;
  os << "name,max_error,tolerance,trials,pass\n";
  os.precision(17);
  for (const auto& c : r.checks) {
    os << c.name << "," << c.max_error << "," << c.tolerance << "," << c.trials << ","
       << (c.pass ? 1 : 0) << "\n";
  }
  return os.str();
}

// ---- bench ----

inline json to_json(const BenchReport& r) {
  json records = json::array();
  for (const auto& rec : r.records) {
    records.push_back({{"mixer", rec.mixer},
                       {"n", rec.n},
                       {"median_s", rec.median_s},
                       {"p10_s", rec.p10_s},
                       {"p90_s", rec.p90_s},
                       {"tokens_per_s", rec.tokens_per_s},
                       {"checksum", rec.checksum},
                       {"repeats", rec.repeats},
                       {"inner_iters", rec.inner_iters}});
  }
  return json{{"schema_version", r.schema_version},
              {"seed", r.seed},
              {"precision", r.precision},
              {"hardware",
               {{"cpu", r.hardware.cpu},
                {"hardware_threads", r.hardware.hardware_threads},
                {"compiler", r.hardware.compiler}}},
              {"records", records},
              {"growth_ratios", r.growth_ratios},
              {"sweep_doubling_ratio", r.sweep_doubling_ratio},
              {"note", "wall times are machine-dependent; ratios express scaling"}};
}

// CSV columns: mixer,n,median_s,p10_s,p90_s,tokens_per_s,checksum
inline std::string to_csv(const BenchReport& r) {
  std::ostringstream os;
  os << "mixer,n,median_s,p10_s,p90_s,tokens_per_s,checksum\n";
  os.precision(17);
  for (const auto& rec : r.records) {
    os << rec.mixer << "," << rec.n << "," << rec.median_s << "," << rec.p10_s << ","
       << rec.p90_s << "," << rec.tokens_per_s << "," << rec.checksum << "\n";
  }
  return os.str();
}

// ---- model costs ----

inline json to_json(const CostReport& r) {
  json scopes = json::array();
  for (const auto& s : r.scopes) {
    scopes.push_back({{"name", s.name}, {"params", s.params}, {"flops", s.flops}});
  }
  return json{{"schema_version", r.schema_version},
              {"model", r.model_name},
              {"resolution", r.resolution},
              {"convention", r.convention},
              {"total_params", r.total_params},
              {"total_flops", r.total_flops},
              {"scopes", scopes},
              {"term_flops", r.term_flops},
              {"term_params", r.term_params}};
}

// CSV columns: section,name,params,flops
inline std::string to_csv(const CostReport& r) {
  std::ostringstream os;
  os << "section,name,params,flops\n";
  for (const auto& s : r.scopes) os << "scope," << s.name << "," << s.params << "," << s.flops << "\n";
  for (const auto& [term, flops] : r.term_flops) {
    uint64_t params = 0;
    if (auto it = r.term_params.find(term); it != r.term_params.end()) params = it->second;
    os << "term," << term << "," << params << "," << flops << "\n";
  }
  os << "total,total," << r.total_params << "," << r.total_flops << "\n";
  return os.str();
}

// ---- diag ----

inline json to_json(const DiagReport& r) {
  return json{{"schema_version", r.schema_version},
              {"seed", r.seed},
              {"layers", r.layers},
              {"tokens", r.tokens},
              {"channels", r.channels},
              {"input_scale", r.input_scale},
              {"mean_forget_gate_per_layer", r.mean_forget_gate_per_layer},
              {"attenuation_curves", r.attenuation_curves},
              {"token_length_std_norm_on", r.token_length_std_norm_on},
              {"token_length_std_norm_off", r.token_length_std_norm_off},
              {"permutation_delta_forget_on", r.permutation_delta_forget_on},
              {"permutation_delta_forget_off", r.permutation_delta_forget_off},
              {"denominator_clamp_events", r.denominator_clamp_events}};
}

// CSV columns: section,key,index,value
inline std::string to_csv(const DiagReport& r) {
  std::ostringstream os;
  os << "section,key,index,value\n";
  os.precision(17);
  for (size_t i = 0; i < r.mean_forget_gate_per_layer.size(); ++i)
    os << "forget_gate_mean,layer," << i << "," << r.mean_forget_gate_per_layer[i] << "\n";
  for (const auto& [a, curve] : r.attenuation_curves)
    for (size_t k = 0; k < curve.size(); ++k)
      os << "attenuation," << a << "," << k << "," << curve[k] << "\n";
  for (size_t i = 0; i < r.token_length_std_norm_on.size(); ++i)
    os << "token_length_std,norm_on," << i << "," << r.token_length_std_norm_on[i] << "\n";
  for (size_t i = 0; i < r.token_length_std_norm_off.size(); ++i)
    os << "token_length_std,norm_off," << i << "," << r.token_length_std_norm_off[i] << "\n";
  os << "permutation_delta,forget_on,0," << r.permutation_delta_forget_on << "\n";
  os << "permutation_delta,forget_off,0," << r.permutation_delta_forget_off << "\n";
  os << "denominator_clamp_events,total,0," << r.denominator_clamp_events << "\n";
  return os.str();
}

}  // namespace mixerlab
