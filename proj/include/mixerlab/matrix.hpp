#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace mixerlab {

class DimensionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class NumericError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

// Dense row-major matrix. TokenMatrix is the same storage with rows read as
// tokens and columns as channels.
template <typename T>
class MatrixT {
 public:
  MatrixT() = default;

  MatrixT(int rows, int cols, T value = T(0))
      : rows_(rows), cols_(cols), data_(static_cast<size_t>(rows) * cols, value) {
    if (rows < 1 || cols < 1) {
      throw DimensionError("matrix dimensions must be >= 1, got " +
                           std::to_string(rows) + "x" + std::to_string(cols));
    }
  }

  static MatrixT from_data(int rows, int cols, std::vector<T> data) {
    MatrixT m(rows, cols);
    if (data.size() != m.data_.size()) {
      throw DimensionError("data length " + std::to_string(data.size()) +
                           " does not match declared shape " + std::to_string(rows) +
                           "x" + std::to_string(cols));
    }
    m.data_ = std::move(data);
    m.require_finite();
    return m;
  }

  int rows() const { return rows_; }
  int cols() const { return cols_; }
  bool empty() const { return data_.empty(); }
  size_t size() const { return data_.size(); }

  T& operator()(int r, int c) { return data_[static_cast<size_t>(r) * cols_ + c]; }
  const T& operator()(int r, int c) const {
    return data_[static_cast<size_t>(r) * cols_ + c];
  }

  std::vector<T>& data() { return data_; }
  const std::vector<T>& data() const { return data_; }

  T* row_ptr(int r) { return data_.data() + static_cast<size_t>(r) * cols_; }
  const T* row_ptr(int r) const { return data_.data() + static_cast<size_t>(r) * cols_; }

  bool same_shape(const MatrixT& other) const {
    return rows_ == other.rows_ && cols_ == other.cols_;
  }

  void require_finite() const {
    for (const T& v : data_) {
      if (!std::isfinite(static_cast<double>(v))) {
        throw NumericError("matrix contains non-finite entries");
      }
    }
  }

  bool all_finite() const {
    for (const T& v : data_) {
      if (!std::isfinite(static_cast<double>(v))) return false;
    }
    return true;
  }

 private:
  int rows_ = 0;
  int cols_ = 0;
  std::vector<T> data_;
};

using DenseMatrix = MatrixT<double>;
using DenseMatrixF = MatrixT<float>;

// Rows are tokens, columns are channels.
using TokenMatrix = DenseMatrix;

// SplitMix64 generator. The update and output functions are fixed integer
// arithmetic, so a seed produces the same stream on every platform. Streams
// are split by hashing (seed, stream id) through the same finalizer.
class Rng {
 public:
  explicit Rng(uint64_t seed) : state_(seed) {}

  uint64_t next_u64() {
    state_ += 0x9E3779B97F4A7C15ull;
    uint64_t z = state_;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
  }

  // Uniform in [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Integer in [lo, hi] inclusive.
  int uniform_int(int lo, int hi) {
    return lo + static_cast<int>(next_u64() % static_cast<uint64_t>(hi - lo + 1));
  }

  Rng split(uint64_t stream) const {
    uint64_t z = state_ ^ (0xD1B54A32D192ED03ull * (stream + 1));
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return Rng(z ^ (z >> 31));
  }

  template <typename T = double>
  MatrixT<T> matrix(int rows, int cols, double lo, double hi) {
    MatrixT<T> m(rows, cols);
    for (auto& v : m.data()) v = static_cast<T>(uniform(lo, hi));
    return m;
  }

  std::vector<double> vector(int n, double lo, double hi) {
    std::vector<double> v(n);
    for (auto& x : v) x = uniform(lo, hi);
    return v;
  }

 private:
  uint64_t state_;
};

// Projection init: uniform in [-1/sqrt(fan_in), +1/sqrt(fan_in)], fan_in being
// the input width of x*W. Keeps activations O(1) so unnormalized variants stay
// finite at test scales.
inline DenseMatrix init_projection(Rng& rng, int in_dim, int out_dim) {
  double bound = 1.0 / std::sqrt(static_cast<double>(in_dim));
  return rng.matrix(in_dim, out_dim, -bound, bound);
}

inline DenseMatrix identity_matrix(int n) {
  DenseMatrix m(n, n);
  for (int i = 0; i < n; ++i) m(i, i) = 1.0;
  return m;
}

}  // namespace mixerlab
