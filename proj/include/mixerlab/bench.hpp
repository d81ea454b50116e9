#pragma once

#include <algorithm>
#include <chrono>
#include <cstdint>
#include <fstream>
#include <map>
#include <string>
#include <thread>
#include <vector>

#include "mixerlab/attention.hpp"
#include "mixerlab/scan.hpp"

namespace mixerlab {

struct HardwareInfo {
  std::string cpu = "unknown";
  unsigned hardware_threads = 0;
  std::string compiler;
};

inline HardwareInfo collect_hardware_info() {
  HardwareInfo info;
  info.hardware_threads = std::thread::hardware_concurrency();
#if defined(__VERSION__)
  info.compiler = __VERSION__;
#endif
  std::ifstream cpuinfo("/proc/cpuinfo");
  std::string line;
  while (std::getline(cpuinfo, line)) {
    if (line.rfind("model name", 0) == 0) {
      auto pos = line.find(':');
      if (pos != std::string::npos) {
        info.cpu = line.substr(pos + 2);
      }
      break;
    }
  }
  return info;
}

// Optional problem-size overrides. Zero keeps the per-mixer defaults, which
// are sized so the largest sweep entry stays cache-resident.
struct BenchDims {
  int channels = 0;  // token width C (also the scan's per-state channel count)
  int qk_width = 0;  // query/key width d (also the scan's state rows)
  int heads = 1;     // attention mixers run under the multi-head wrapper
};

struct BenchRecord {
  std::string mixer;
  int n = 0;
  double median_s = 0.0;
  double p10_s = 0.0;
  double p90_s = 0.0;
  double tokens_per_s = 0.0;
  double checksum = 0.0;
  int repeats = 0;
  int inner_iters = 1;
};

struct BenchReport {
  uint64_t seed = 0;
  std::string precision = "f64";
  HardwareInfo hardware;
  std::vector<BenchRecord> records;
  // per mixer: median-time ratio time(sizes[i+1]) / time(sizes[i])
  std::map<std::string, std::vector<double>> growth_ratios;
  // per mixer: geometric-mean doubling ratio over the sweep, from p10 times;
  // the robust number the scaling criterion reads
  std::map<std::string, double> sweep_doubling_ratio;
  int schema_version = 1;
};

namespace detail {

inline double quantile(std::vector<double> v, double q) {
  std::sort(v.begin(), v.end());
  const double idx = q * static_cast<double>(v.size() - 1);
  const size_t lo = static_cast<size_t>(idx);
  const size_t hi = std::min(lo + 1, v.size() - 1);
  const double frac = idx - static_cast<double>(lo);
  return v[lo] * (1.0 - frac) + v[hi] * frac;
}

inline double checksum_matrix(const DenseMatrix& m) {
  double s = 0.0;
  for (double v : m.data()) s += v;
  return s;
}

inline double checksum_matrix(const DenseMatrixF& m) {
  double s = 0.0;
  for (float v : m.data()) s += static_cast<double>(v);
  return s;
}

// Times fn(), which must return a checksum so the measured work cannot be
// optimized away. Each sample loops enough iterations to stay above
// min_sample_s of wall time; scheduler noise then averages out inside the
// sample instead of corrupting it.
template <typename Fn>
BenchRecord time_kernel(const std::string& name, int n, int repeats, int warmup, Fn&& fn,
                        double min_sample_s = 0.05) {
  using clock = std::chrono::steady_clock;
  BenchRecord rec;
  rec.mixer = name;
  rec.n = n;
  rec.repeats = repeats;

  for (int i = 0; i < warmup; ++i) rec.checksum = fn();

  auto t0 = clock::now();
  rec.checksum = fn();  // the kernel is deterministic: one call is the checksum
  double once = std::chrono::duration<double>(clock::now() - t0).count();
  int iters = 1;
  if (once < min_sample_s) {
    iters = static_cast<int>(min_sample_s / std::max(once, 1e-9)) + 1;
  }
  rec.inner_iters = iters;

  std::vector<double> samples;
  samples.reserve(repeats);
  double sink = 0.0;
  for (int rep = 0; rep < repeats; ++rep) {
    auto start = clock::now();
    for (int it = 0; it < iters; ++it) sink += fn();
    double elapsed = std::chrono::duration<double>(clock::now() - start).count();
    samples.push_back(elapsed / iters);
  }
  if (!std::isfinite(sink)) rec.checksum = sink;  // consumes the timed outputs
  rec.median_s = quantile(samples, 0.5);
  rec.p10_s = quantile(samples, 0.1);
  rec.p90_s = quantile(samples, 0.9);
  rec.tokens_per_s = static_cast<double>(n) / rec.median_s;
  return rec;
}

template <typename T>
std::vector<ScanElementT<T>> bench_scan_elems(Rng rng, int n, int rows, int cols) {
  std::vector<ScanElementT<T>> elems;
  elems.reserve(n);
  for (int i = 0; i < n; ++i) {
    Rng r = rng.split(i);
    elems.push_back({r.matrix<T>(rows, cols, 0.1, 1.0), r.matrix<T>(rows, cols, -1.0, 1.0)});
  }
  return elems;
}

template <typename T>
AttnParamsT<T> bench_attn_params(Rng r, int c, int d, int heads) {
  AttnParamsT<T> p;
  Rng rq = r.split(1), rk = r.split(2), rv = r.split(3);
  double bound = 1.0 / std::sqrt(static_cast<double>(c));
  p.w_q = rq.matrix<T>(c, d, -bound, bound);
  p.w_k = rk.matrix<T>(c, d, -bound, bound);
  p.w_v = rv.matrix<T>(c, c, -bound, bound);
  p.heads = heads;
  return p;
}

template <typename T>
void append_bench_records(std::vector<BenchRecord>& records, uint64_t seed,
                          const std::vector<int>& sizes, int repeats, int warmup,
                          const BenchDims& dims) {
  // default widths chosen so the largest size stays cache-resident: the
  // growth ratios are meant to expose arithmetic scaling, not a DRAM cliff
  const int heads = std::max(1, dims.heads);
  const int softmax_c = dims.channels > 0 ? dims.channels : 32;
  const int softmax_d = dims.qk_width > 0 ? dims.qk_width : 32;
  const int linear_c = dims.channels > 0 ? dims.channels : 32;
  const int linear_d = dims.qk_width > 0 ? dims.qk_width : 32;
  const int scan_rows = dims.qk_width > 0 ? dims.qk_width : 4;
  const int scan_cols = dims.channels > 0 ? dims.channels : 8;
  if (softmax_c % heads != 0 || softmax_d % heads != 0) {
    throw DimensionError("bench channels and qk width must divide the head count");
  }

  for (int n : sizes) {
    Rng rng = Rng(seed).split(static_cast<uint64_t>(n));
    {
      AttnParamsT<T> p = bench_attn_params<T>(rng.split(1), softmax_c, softmax_d, heads);
      MatrixT<T> x = rng.split(1).matrix<T>(n, softmax_c, -1.0, 1.0);
      records.push_back(time_kernel("softmax_attention", n, repeats, warmup, [&]() {
        return checksum_matrix(multi_head(x, p, [](const MatrixT<T>& xs,
                                                   const AttnParamsT<T>& ps) {
          return softmax_attention(xs, ps);
        }));
      }));
    }
    {
      AttnParamsT<T> p = bench_attn_params<T>(rng.split(2), linear_c, linear_d, heads);
      MatrixT<T> x = rng.split(2).matrix<T>(n, linear_c, -1.0, 1.0);
      records.push_back(time_kernel("linear_attention_parallel", n, repeats, warmup, [&]() {
        return checksum_matrix(multi_head(x, p, [](const MatrixT<T>& xs,
                                                   const AttnParamsT<T>& ps) {
          return linear_attention_parallel(xs, ps);
        }));
      }));
    }
    {
      auto elems = bench_scan_elems<T>(rng.split(3), n, scan_rows, scan_cols);
      records.push_back(time_kernel("scan_serial", n, repeats, warmup, [&]() {
        auto states = scan_serial(elems);
        return checksum_matrix(states.back()) + checksum_matrix(states[states.size() / 2]);
      }));
      records.push_back(time_kernel("scan_parallel", n, repeats, warmup, [&]() {
        auto states = scan_parallel(elems, 256, 0);
        return checksum_matrix(states.back()) + checksum_matrix(states[states.size() / 2]);
      }));
    }
  }
}

}  // namespace detail

// Times the four scaling-relevant kernels across the size list and reports
// per-doubling growth ratios. Checksums feed the records so no timed path is
// dead code.
inline BenchReport run_bench(uint64_t seed, std::vector<int> sizes, int repeats = 5,
                             int warmup = 1, const std::string& precision = "f64",
                             const BenchDims& dims = {}) {
  if (sizes.empty()) sizes = {1024, 2048, 4096, 8192};
  for (size_t i = 1; i < sizes.size(); ++i) {
    if (sizes[i] <= sizes[i - 1]) throw DimensionError("bench sizes must be ascending");
  }
  if (repeats < 1) throw DimensionError("repeat count must be >= 1");

  BenchReport report;
  report.seed = seed;
  report.precision = precision;
  report.hardware = collect_hardware_info();
  if (precision == "f64") {
    detail::append_bench_records<double>(report.records, seed, sizes, repeats, warmup, dims);
  } else if (precision == "f32") {
    detail::append_bench_records<float>(report.records, seed, sizes, repeats, warmup, dims);
  } else {
    throw DimensionError("precision must be f64 or f32");
  }

  for (const auto& rec : report.records) {
    auto& ratios = report.growth_ratios[rec.mixer];
    (void)ratios;
  }
  for (auto& [mixer, ratios] : report.growth_ratios) {
    std::vector<const BenchRecord*> rs;
    for (const auto& rec : report.records)
      if (rec.mixer == mixer) rs.push_back(&rec);
    for (size_t i = 1; i < rs.size(); ++i)
      ratios.push_back(rs[i]->median_s / rs[i - 1]->median_s);
    if (rs.size() >= 2) {
      double overall = rs.back()->p10_s / rs.front()->p10_s;
      report.sweep_doubling_ratio[mixer] =
          std::pow(overall, 1.0 / static_cast<double>(rs.size() - 1));
    }
  }
  return report;
}

}  // namespace mixerlab
