#pragma once

#include <algorithm>
#include <cmath>
#include <string>

#include "mixerlab/matrix.hpp"

namespace mixerlab {

// Reference-path matmul, no BLAS. The i-k-j order keeps the inner loop
// contiguous over b's rows; accumulation stays in the scalar type.
template <typename T>
MatrixT<T> matmul(const MatrixT<T>& a, const MatrixT<T>& b) {
  if (a.cols() != b.rows()) {
    throw DimensionError("matmul shape mismatch: " + std::to_string(a.rows()) + "x" +
                         std::to_string(a.cols()) + " * " + std::to_string(b.rows()) +
                         "x" + std::to_string(b.cols()));
  }
  MatrixT<T> out(a.rows(), b.cols());
  for (int i = 0; i < a.rows(); ++i) {
    T* out_row = out.row_ptr(i);
    for (int k = 0; k < a.cols(); ++k) {
      const T aik = a(i, k);
      const T* b_row = b.row_ptr(k);
      for (int j = 0; j < b.cols(); ++j) out_row[j] += aik * b_row[j];
    }
  }
  return out;
}

template <typename T>
MatrixT<T> transpose(const MatrixT<T>& m) {
  MatrixT<T> out(m.cols(), m.rows());
  for (int i = 0; i < m.rows(); ++i)
    for (int j = 0; j < m.cols(); ++j) out(j, i) = m(i, j);
  return out;
}

template <typename T>
MatrixT<T> hadamard(const MatrixT<T>& a, const MatrixT<T>& b) {
  if (!a.same_shape(b)) {
    throw DimensionError("hadamard requires identical shapes");
  }
  MatrixT<T> out = a;
  for (size_t i = 0; i < out.size(); ++i) out.data()[i] *= b.data()[i];
  return out;
}

template <typename T>
MatrixT<T> add(const MatrixT<T>& a, const MatrixT<T>& b) {
  if (!a.same_shape(b)) {
    throw DimensionError("add requires identical shapes");
  }
  MatrixT<T> out = a;
  for (size_t i = 0; i < out.size(); ++i) out.data()[i] += b.data()[i];
  return out;
}

template <typename T>
MatrixT<T> scale(const MatrixT<T>& a, T s) {
  MatrixT<T> out = a;
  for (auto& v : out.data()) v *= s;
  return out;
}

// outer(u, v)[i][j] = u[i] * v[j]
inline DenseMatrix outer(const std::vector<double>& u, const std::vector<double>& v) {
  DenseMatrix out(static_cast<int>(u.size()), static_cast<int>(v.size()));
  for (size_t i = 0; i < u.size(); ++i)
    for (size_t j = 0; j < v.size(); ++j) out(static_cast<int>(i), static_cast<int>(j)) = u[i] * v[j];
  return out;
}

template <typename T>
MatrixT<T> exp_ew(const MatrixT<T>& m) {
  MatrixT<T> out = m;
  for (auto& v : out.data()) v = std::exp(v);
  return out;
}

// log(1 + e^x), overflow-safe: for large x returns x + log1p(e^-x) ~ x.
inline double softplus(double x) {
  if (x > 0.0) return x + std::log1p(std::exp(-x));
  return std::log1p(std::exp(x));
}

// elu(x) + 1: strictly positive for all finite x.
inline double elu_plus_one(double x) { return x >= 0.0 ? x + 1.0 : std::exp(x); }

inline double silu(double x) { return x / (1.0 + std::exp(-x)); }

inline double gelu(double x) { return 0.5 * x * std::erfc(-x / std::sqrt(2.0)); }

// Row-wise softmax with max subtraction.
template <typename T>
MatrixT<T> softmax_rows(const MatrixT<T>& m) {
  MatrixT<T> out(m.rows(), m.cols());
  for (int i = 0; i < m.rows(); ++i) {
    const T* in_row = m.row_ptr(i);
    T* out_row = out.row_ptr(i);
    T mx = in_row[0];
    for (int j = 1; j < m.cols(); ++j) mx = std::max(mx, in_row[j]);
    T sum = T(0);
    for (int j = 0; j < m.cols(); ++j) {
      out_row[j] = std::exp(in_row[j] - mx);
      sum += out_row[j];
    }
    for (int j = 0; j < m.cols(); ++j) out_row[j] /= sum;
  }
  return out;
}

// Per-token layer normalization over channels.
inline TokenMatrix layer_norm(const TokenMatrix& x, const std::vector<double>& gamma,
                              const std::vector<double>& beta, double eps = 1e-5) {
  if (static_cast<int>(gamma.size()) != x.cols() ||
      static_cast<int>(beta.size()) != x.cols()) {
    throw DimensionError("layer_norm scale/shift must match channel count");
  }
  TokenMatrix out(x.rows(), x.cols());
  const int c = x.cols();
  for (int i = 0; i < x.rows(); ++i) {
    const double* in_row = x.row_ptr(i);
    double mean = 0.0;
    for (int j = 0; j < c; ++j) mean += in_row[j];
    mean /= c;
    double var = 0.0;
    for (int j = 0; j < c; ++j) {
      double dv = in_row[j] - mean;
      var += dv * dv;
    }
    var /= c;
    double inv = 1.0 / std::sqrt(var + eps);
    double* out_row = out.row_ptr(i);
    for (int j = 0; j < c; ++j) out_row[j] = (in_row[j] - mean) * inv * gamma[j] + beta[j];
  }
  return out;
}

inline double max_abs_diff(const DenseMatrix& a, const DenseMatrix& b) {
  if (!a.same_shape(b)) {
    throw DimensionError("max_abs_diff requires identical shapes");
  }
  double m = 0.0;
  for (size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a.data()[i] - b.data()[i]));
  return m;
}

inline double max_rel_diff(const DenseMatrix& a, const DenseMatrix& b) {
  if (!a.same_shape(b)) {
    throw DimensionError("max_rel_diff requires identical shapes");
  }
  double m = 0.0;
  for (size_t i = 0; i < a.size(); ++i) {
    double denom = std::max({std::abs(a.data()[i]), std::abs(b.data()[i]), 1e-300});
    m = std::max(m, std::abs(a.data()[i] - b.data()[i]) / denom);
  }
  return m;
}

inline double frobenius_norm(const DenseMatrix& m) {
  double s = 0.0;
  for (double v : m.data()) s += v * v;
  return std::sqrt(s);
}

}  // namespace mixerlab
