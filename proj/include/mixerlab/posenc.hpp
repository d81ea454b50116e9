#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "mixerlab/matrix.hpp"
#include "mixerlab/numerics.hpp"

namespace mixerlab {

// Row-major 2D layout of a token sequence: token t sits at
// (t / width, t % width).
struct Grid2D {
  int height = 0;
  int width = 0;

  int tokens() const { return height * width; }
};

inline void check_grid(const Grid2D& g, int n) {
  if (g.height < 1 || g.width < 1 || g.tokens() != n) {
    throw DimensionError("grid " + std::to_string(g.height) + "x" +
                         std::to_string(g.width) + " does not cover " +
                         std::to_string(n) + " tokens");
  }
}

enum class PosEncKind { None, Ape, Lepe, Cpe, Rope };

struct PosEncSpec {
  PosEncKind kind = PosEncKind::None;
  int dwconv_kernel = 3;      // odd, Lepe/Cpe
  double rope_base = 10000.0; // Rope frequency base
};

// Learned absolute table added to tokens.
inline TokenMatrix ape_add(const TokenMatrix& x, const DenseMatrix& table) {
  if (!x.same_shape(table)) {
    throw DimensionError("APE table must match the token matrix shape");
  }
  return add(x, table);
}

// Per-channel k x k weights, one row per channel, kernel stored row-major.
struct DepthwiseKernel {
  int k = 3;
  DenseMatrix weights;  // C x (k*k)
};

inline DepthwiseKernel zero_dw_kernel(int channels, int k = 3) {
  return {k, DenseMatrix(channels, k * k)};
}

inline DepthwiseKernel identity_dw_kernel(int channels, int k = 3) {
  DepthwiseKernel kern{k, DenseMatrix(channels, k * k)};
  const int center = (k / 2) * k + k / 2;
  for (int c = 0; c < channels; ++c) kern.weights(c, center) = 1.0;
  return kern;
}

inline DepthwiseKernel random_dw_kernel(Rng& rng, int channels, int k = 3) {
  double bound = 1.0 / static_cast<double>(k * k);
  return {k, rng.matrix(channels, k * k, -bound, bound)};
}

// Per-channel 2D convolution on the grid, same-size output, zero padding.
inline TokenMatrix depthwise_conv2d(const TokenMatrix& x, const Grid2D& grid,
                                    const DepthwiseKernel& kern) {
  check_grid(grid, x.rows());
  if (kern.k < 1 || kern.k % 2 == 0) {
    throw DimensionError("depthwise kernel size must be odd and >= 1");
  }
  if (kern.weights.rows() != x.cols() || kern.weights.cols() != kern.k * kern.k) {
    throw DimensionError("depthwise kernel shape must be C x k^2");
  }
  const int h = grid.height, w = grid.width, c = x.cols(), k = kern.k, r = k / 2;
  TokenMatrix out(x.rows(), c);
  for (int row = 0; row < h; ++row) {
    for (int col = 0; col < w; ++col) {
      double* out_row = out.row_ptr(row * w + col);
      for (int dr = -r; dr <= r; ++dr) {
        const int rr = row + dr;
        if (rr < 0 || rr >= h) continue;
        for (int dc = -r; dc <= r; ++dc) {
          const int cc = col + dc;
          if (cc < 0 || cc >= w) continue;
          const double* in_row = x.row_ptr(rr * w + cc);
          const int tap = (dr + r) * k + (dc + r);
          for (int ch = 0; ch < c; ++ch) out_row[ch] += kern.weights(ch, tap) * in_row[ch];
        }
      }
    }
  }
  return out;
}

// LePE branch: the depthwise-conv term added to the attention output,
// computed from the values. A zero kernel leaves the pure attention path.
inline TokenMatrix lepe(const TokenMatrix& v, const Grid2D& grid,
                        const DepthwiseKernel& kern) {
  return depthwise_conv2d(v, grid, kern);
}

// CPE residual applied before the mixer: x + dwconv(x).
inline TokenMatrix cpe(const TokenMatrix& x, const Grid2D& grid,
                       const DepthwiseKernel& kern) {
  return add(x, depthwise_conv2d(x, grid, kern));
}

// 2D axial rotary embedding. The first half of the channels encodes the row
// coordinate, the second half the column coordinate; within each half,
// consecutive pairs (2m, 2m+1) rotate by pos * theta_m with
// theta_m = base^(-2m / axis_width).
inline TokenMatrix rope_rotate(const TokenMatrix& qk, const Grid2D& grid,
                               double base = 10000.0) {
  check_grid(grid, qk.rows());
  const int width = qk.cols();
  if (width % 4 != 0) {
    throw DimensionError("rope requires channel width divisible by 4, got " +
                         std::to_string(width));
  }
  const int axis = width / 2;
  const int pairs = axis / 2;
  std::vector<double> theta(pairs);
  for (int m = 0; m < pairs; ++m)
    theta[m] = std::pow(base, -2.0 * m / static_cast<double>(axis));

  TokenMatrix out(qk.rows(), width);
  for (int t = 0; t < qk.rows(); ++t) {
    const int row = t / grid.width;
    const int col = t % grid.width;
    const double* in_row = qk.row_ptr(t);
    double* out_row = out.row_ptr(t);
    for (int half = 0; half < 2; ++half) {
      const double pos = half == 0 ? static_cast<double>(row) : static_cast<double>(col);
      const int off = half * axis;
      for (int m = 0; m < pairs; ++m) {
        const double angle = pos * theta[m];
        const double cs = std::cos(angle), sn = std::sin(angle);
        const double a = in_row[off + 2 * m], b = in_row[off + 2 * m + 1];
        out_row[off + 2 * m] = a * cs - b * sn;
        out_row[off + 2 * m + 1] = a * sn + b * cs;
      }
    }
  }
  return out;
}

inline const char* posenc_kind_name(PosEncKind k) {
  switch (k) {
    case PosEncKind::None: return "none";
    case PosEncKind::Ape: return "ape";
    case PosEncKind::Lepe: return "lepe";
    case PosEncKind::Cpe: return "cpe";
    case PosEncKind::Rope: return "rope";
  }
  return "none";
}

inline PosEncKind posenc_kind_from_name(const std::string& name) {
  if (name == "none") return PosEncKind::None;
  if (name == "ape") return PosEncKind::Ape;
  if (name == "lepe") return PosEncKind::Lepe;
  if (name == "cpe") return PosEncKind::Cpe;
  if (name == "rope") return PosEncKind::Rope;
  throw DimensionError("unknown positional encoding: " + name);
}

}  // namespace mixerlab
