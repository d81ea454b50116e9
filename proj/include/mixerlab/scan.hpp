#pragma once

#include <thread>
#include <utility>
#include <vector>

#include "mixerlab/matrix.hpp"
#include "mixerlab/numerics.hpp"

namespace mixerlab {

// One step of the gated recurrence h = g (.) h_prev + u. Gate entries must be
// positive (the recurrences that feed this module produce gates in (0,1]).
template <typename T>
struct ScanElementT {
  MatrixT<T> g;
  MatrixT<T> u;
};

using ScanElement = ScanElementT<double>;

template <typename T>
ScanElementT<T> scan_identity(int rows, int cols) {
  return {MatrixT<T>(rows, cols, T(1)), MatrixT<T>(rows, cols, T(0))};
}

// Sequential composition: applying `first`, then `then`, equals applying the
// composed element (then.g (.) first.g, then.g (.) first.u + then.u).
template <typename T>
ScanElementT<T> compose(const ScanElementT<T>& first, const ScanElementT<T>& then) {
  if (!first.g.same_shape(then.g) || !first.u.same_shape(then.u)) {
    throw DimensionError("scan elements must share one shape");
  }
  ScanElementT<T> out;
  out.g = hadamard(then.g, first.g);
  out.u = then.u;
  for (size_t i = 0; i < out.u.size(); ++i)
    out.u.data()[i] += then.g.data()[i] * first.u.data()[i];
  return out;
}

template <typename T>
std::vector<MatrixT<T>> scan_serial(const std::vector<ScanElementT<T>>& elems) {
  if (elems.empty()) throw DimensionError("scan requires at least one element");
  std::vector<MatrixT<T>> states;
  states.reserve(elems.size());
  MatrixT<T> h(elems[0].g.rows(), elems[0].g.cols());
  for (const auto& e : elems) {
    if (!e.g.same_shape(h) || !e.u.same_shape(h)) {
      throw DimensionError("scan elements must share one shape");
    }
    for (size_t i = 0; i < h.size(); ++i)
      h.data()[i] = e.g.data()[i] * h.data()[i] + e.u.data()[i];
    states.push_back(h);
  }
  return states;
}

namespace detail {

// Blelloch exclusive scan over composed elements. The sequence is padded to a
// power of two with the monoid identity (g=1, u=0), which is exact, so
// padding never perturbs results.
template <typename T>
std::vector<ScanElementT<T>> blelloch_exclusive(std::vector<ScanElementT<T>> work,
                                                int rows, int cols) {
  size_t n = 1;
  while (n < work.size()) n <<= 1;
  const size_t real = work.size();
  work.reserve(n);
  for (size_t i = real; i < n; ++i) work.push_back(scan_identity<T>(rows, cols));

  // upsweep
  for (size_t stride = 1; stride < n; stride <<= 1) {
    for (size_t i = 2 * stride - 1; i < n; i += 2 * stride) {
      work[i] = compose(work[i - stride], work[i]);
    }
  }
  // downsweep: the right child's incoming prefix is the parent's prefix
  // applied first, then the left subtree's segment
  work[n - 1] = scan_identity<T>(rows, cols);
  for (size_t stride = n >> 1; stride >= 1; stride >>= 1) {
    for (size_t i = 2 * stride - 1; i < n; i += 2 * stride) {
      ScanElementT<T> left = std::move(work[i - stride]);
      work[i - stride] = work[i];
      work[i] = compose(work[i], left);
    }
  }
  work.resize(real);
  return work;
}

// threads == 0 picks the hardware count but stays inline when the total work
// would not amortize thread startup; an explicit count is always honored.
template <typename Fn>
void parallel_for_chunks(size_t num_chunks, unsigned threads, size_t total_ops, Fn&& fn) {
  if (threads == 0) {
    threads = total_ops >= (size_t(1) << 22) ? std::thread::hardware_concurrency() : 1;
  }
  if (threads <= 1 || num_chunks <= 1) {
    for (size_t c = 0; c < num_chunks; ++c) fn(c);
    return;
  }
  threads = std::min<unsigned>(threads, static_cast<unsigned>(num_chunks));
  std::vector<std::thread> pool;
  pool.reserve(threads);
  for (unsigned t = 0; t < threads; ++t) {
    pool.emplace_back([&, t]() {
      for (size_t c = t; c < num_chunks; c += threads) fn(c);
    });
  }
  for (auto& th : pool) th.join();
}

}  // namespace detail

// Chunked two-pass scan: per-chunk totals are composed, an exclusive Blelloch
// scan over the totals yields each chunk's incoming state, then chunks are
// finished independently (and concurrently). Output order never depends on
// scheduling; each chunk writes a disjoint slice.
template <typename T>
std::vector<MatrixT<T>> scan_parallel(const std::vector<ScanElementT<T>>& elems,
                                      size_t chunk, unsigned threads = 0) {
  if (chunk < 1) throw DimensionError("chunk size must be >= 1");
  if (elems.empty()) throw DimensionError("scan requires at least one element");
  if (chunk == 1 || chunk >= elems.size()) return scan_serial(elems);

  const int rows = elems[0].g.rows(), cols = elems[0].g.cols();
  const size_t n = elems.size();
  const size_t num_chunks = (n + chunk - 1) / chunk;
  const size_t total_ops = n * static_cast<size_t>(rows) * static_cast<size_t>(cols);

  std::vector<ScanElementT<T>> totals(num_chunks, scan_identity<T>(rows, cols));
  detail::parallel_for_chunks(num_chunks, threads, total_ops, [&](size_t c) {
    const size_t lo = c * chunk, hi = std::min(n, lo + chunk);
    ScanElementT<T> acc = elems[lo];
    for (size_t i = lo + 1; i < hi; ++i) acc = compose(acc, elems[i]);
    totals[c] = std::move(acc);
  });

  std::vector<ScanElementT<T>> prefix = detail::blelloch_exclusive(totals, rows, cols);

  std::vector<MatrixT<T>> states(n, MatrixT<T>(rows, cols));
  detail::parallel_for_chunks(num_chunks, threads, total_ops, [&](size_t c) {
    const size_t lo = c * chunk, hi = std::min(n, lo + chunk);
    MatrixT<T> h = prefix[c].u;  // state entering the chunk (applied to h0 = 0)
    for (size_t i = lo; i < hi; ++i) {
      const auto& e = elems[i];
      for (size_t j = 0; j < h.size(); ++j)
        h.data()[j] = e.g.data()[j] * h.data()[j] + e.u.data()[j];
      states[i] = h;
    }
  });
  return states;
}

}  // namespace mixerlab
