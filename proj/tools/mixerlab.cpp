// mixerlab: equivalence verification, scaling benchmarks, model cost reports
// and diagnostics for the sequence-mixer kernels.
//
// Exit codes: 0 success, 1 failed verification check, 2 usage/config error.

#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "mixerlab/mixerlab.hpp"

namespace {

using mixerlab::json;

struct RunConfig {
  std::string command;
  uint64_t seed = 1;
  std::vector<int> sizes;
  std::string preset = "mila";
  std::string format;  // "", "json" or "csv"
  std::string out;
  int repeats = 0;  // 0: command default (verify 100 trials, bench 5 repeats)
  int warmup = 1;
  std::string inject_fault;
  int resolution = 224;
  std::string precision = "f64";
  int channels = 0;  // bench problem dims; 0 = per-mixer defaults
  int qk_width = 0;
  int heads = 1;
};

void load_config_file(const std::string& path, RunConfig& cfg) {
  std::ifstream in(path);
  if (!in) throw mixerlab::DimensionError("cannot open config file: " + path);
  json j = json::parse(in);
  cfg.command = j.value("command", cfg.command);
  cfg.seed = j.value("seed", cfg.seed);
  if (j.contains("sizes")) cfg.sizes = j.at("sizes").get<std::vector<int>>();
  cfg.preset = j.value("preset", cfg.preset);
  cfg.format = j.value("format", cfg.format);
  cfg.out = j.value("out", cfg.out);
  cfg.repeats = j.value("repeats", cfg.repeats);
  cfg.warmup = j.value("warmup", cfg.warmup);
  cfg.inject_fault = j.value("inject_fault", cfg.inject_fault);
  cfg.resolution = j.value("resolution", cfg.resolution);
  cfg.precision = j.value("precision", cfg.precision);
  cfg.channels = j.value("channels", cfg.channels);
  cfg.qk_width = j.value("qk_width", cfg.qk_width);
  cfg.heads = j.value("heads", cfg.heads);
}

void emit(const RunConfig& cfg, const std::string& text) {
  if (cfg.out.empty()) {
    std::cout << text;
    if (!text.empty() && text.back() != '\n') std::cout << "\n";
    return;
  }
  std::ofstream out(cfg.out);
  if (!out) throw mixerlab::DimensionError("cannot write output file: " + cfg.out);
  out << text;
}

int cmd_verify(const RunConfig& cfg) {
  mixerlab::VerifyOptions opts;
  opts.seed = cfg.seed;
  opts.trials = cfg.repeats > 0 ? cfg.repeats : 100;
  opts.inject_fault = cfg.inject_fault;
  mixerlab::VerifyReport report = mixerlab::run_verify_suite(opts);

  if (cfg.format == "csv") {
    emit(cfg, mixerlab::to_csv(report));
  } else {
    emit(cfg, mixerlab::to_json(report).dump(2));
  }
  if (!cfg.out.empty() || cfg.format == "csv") {
    for (const auto& c : report.checks) {
      std::cerr << (c.pass ? "pass " : "FAIL ") << c.name << " max_error=" << c.max_error
                << " tol=" << c.tolerance << "\n";
    }
  }
  return report.all_pass ? 0 : 1;
}

int cmd_bench(const RunConfig& cfg) {
  int repeats = cfg.repeats > 0 ? cfg.repeats : 5;
  mixerlab::BenchDims dims{cfg.channels, cfg.qk_width, cfg.heads};
  mixerlab::BenchReport report =
      mixerlab::run_bench(cfg.seed, cfg.sizes, repeats, cfg.warmup, cfg.precision, dims);
  if (cfg.format == "csv") {
    emit(cfg, mixerlab::to_csv(report));
  } else {
    emit(cfg, mixerlab::to_json(report).dump(2));
  }
  return 0;
}

int cmd_model(const RunConfig& cfg) {
  mixerlab::ModelSpec spec = mixerlab::model_by_name(cfg.preset);
  mixerlab::CostReport report = mixerlab::count_costs(spec, cfg.resolution);
  if (cfg.format == "json") {
    json j = mixerlab::to_json(report);
    j["model_spec"] = mixerlab::to_json(spec);
    emit(cfg, j.dump(2));
  } else if (cfg.format == "csv") {
    emit(cfg, mixerlab::to_csv(report));
  } else {
    emit(cfg, mixerlab::cost_report_table(report));
  }
  return 0;
}

int cmd_diag(const RunConfig& cfg) {
  // validates the preset name; the bundle itself covers every probe family
  mixerlab::preset_config(cfg.preset, mixerlab::MixerDims{0, 16, 16, 1, 1});
  mixerlab::DiagReport report = mixerlab::run_diag(cfg.seed);
  if (cfg.format == "csv") {
    emit(cfg, mixerlab::to_csv(report));
  } else {
    emit(cfg, mixerlab::to_json(report).dump(2));
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  RunConfig cfg;
  std::string config_path;
  std::string sizes_arg;

  CLI::App app{"sequence-mixer kernel laboratory"};
  app.require_subcommand(1);

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--seed", cfg.seed, "random seed (u64)");
    sub->add_option("--config", config_path, "JSON config mirroring the CLI options");
    sub->add_option("--sizes", sizes_arg, "comma-separated token counts (bench)");
    sub->add_option("--preset", cfg.preset,
                    "mixer preset (diag: linear-attention|selective-ssm|mila), "
                    "model name (model: T|S|B)");
    sub->add_option("--format", cfg.format, "output format: json|csv")
        ->check(CLI::IsMember({"json", "csv", ""}));
    sub->add_option("--out", cfg.out, "write the report to this path");
    sub->add_option("--repeats", cfg.repeats,
                    "bench repeats / verify trials (0 = command default)");
    sub->add_option("--warmup", cfg.warmup, "bench warmup runs");
    sub->add_option("--inject-fault", cfg.inject_fault,
                    "verify only: named fault (recurrent-z-sign)");
    sub->add_option("--resolution", cfg.resolution, "model input resolution");
    sub->add_option("--precision", cfg.precision, "bench precision: f64|f32")
        ->check(CLI::IsMember({"f64", "f32"}));
    sub->add_option("--channels", cfg.channels, "bench token width C (0 = defaults)");
    sub->add_option("--qk-width", cfg.qk_width, "bench query/key width d (0 = defaults)");
    sub->add_option("--heads", cfg.heads, "bench head count for the attention mixers");
  };

  CLI::App* verify = app.add_subcommand("verify", "run the equivalence suite");
  CLI::App* bench = app.add_subcommand("bench", "time mixers across sequence lengths");
  CLI::App* model = app.add_subcommand("model", "parameter/FLOP cost report");
  CLI::App* diag = app.add_subcommand("diag", "gate/normalization diagnostics");
  for (CLI::App* sub : {verify, bench, model, diag}) add_common(sub);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (!config_path.empty()) {
      load_config_file(config_path, cfg);
    }
    if (!sizes_arg.empty()) {
      cfg.sizes.clear();
      std::stringstream ss(sizes_arg);
      std::string item;
      while (std::getline(ss, item, ',')) cfg.sizes.push_back(std::stoi(item));
    }
    if (verify->parsed()) return cmd_verify(cfg);
    if (bench->parsed()) return cmd_bench(cfg);
    if (model->parsed()) {
      if (cfg.preset == "mila") cfg.preset = "T";  // model-specific default
      return cmd_model(cfg);
    }
    if (diag->parsed()) return cmd_diag(cfg);
  } catch (const json::exception& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 2;
}
