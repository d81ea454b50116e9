#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "mixerlab/matrix.hpp"
#include "mixerlab/numerics.hpp"
#include "mixerlab/reference.hpp"

using namespace mixerlab;

TEST_CASE("matmul identity and hand-checked product") {
  DenseMatrix m = Rng(7).matrix(3, 5, -1.0, 1.0);
  CHECK(max_abs_diff(matmul(identity_matrix(3), m), m) == 0.0);

  DenseMatrix a = DenseMatrix::from_data(2, 2, {1, 2, 3, 4});
  DenseMatrix b = DenseMatrix::from_data(2, 1, {5, 6});
  DenseMatrix c = matmul(a, b);
  CHECK(c(0, 0) == 17.0);
  CHECK(c(1, 0) == 39.0);
}

TEST_CASE("matmul matches naive triple-loop oracle") {
  Rng rng(42);
  DenseMatrix a = rng.matrix(7, 5, -2.0, 2.0);
  DenseMatrix b = rng.matrix(5, 3, -2.0, 2.0);
  CHECK(max_abs_diff(matmul(a, b), reference::matmul_naive(a, b)) < 1e-12);
}

TEST_CASE("matmul rejects shape mismatch") {
  DenseMatrix a(2, 3), b(2, 3);
  CHECK_THROWS_AS(matmul(a, b), DimensionError);
}

TEST_CASE("matmul associativity on random triples") {
  Rng rng(1234);
  for (int trial = 0; trial < 25; ++trial) {
    Rng r = rng.split(trial);
    DenseMatrix a = r.matrix(6, 4, -1.0, 1.0);
    DenseMatrix b = r.matrix(4, 5, -1.0, 1.0);
    DenseMatrix c = r.matrix(5, 3, -1.0, 1.0);
    CHECK(max_rel_diff(matmul(matmul(a, b), c), matmul(a, matmul(b, c))) < 1e-9);
  }
}

TEST_CASE("softmax rows: uniform, stability, normalization") {
  DenseMatrix zeros(1, 4);
  DenseMatrix u = softmax_rows(zeros);
  for (int j = 0; j < 4; ++j) CHECK(u(0, j) == Catch::Approx(0.25).margin(1e-15));

  DenseMatrix big = DenseMatrix::from_data(1, 2, {1000.0, 0.0});
  DenseMatrix s = softmax_rows(big);
  CHECK(std::abs(s(0, 0) - 1.0) < 1e-12);
  CHECK(std::abs(s(0, 1)) < 1e-12);
  CHECK(s.all_finite());

  DenseMatrix m = Rng(5).matrix(6, 6, -4.0, 4.0);
  DenseMatrix sm = softmax_rows(m);
  for (int i = 0; i < 6; ++i) {
    double sum = 0.0;
    for (int j = 0; j < 6; ++j) {
      CHECK(sm(i, j) >= 0.0);
      CHECK(sm(i, j) <= 1.0);
      sum += sm(i, j);
    }
    CHECK(std::abs(sum - 1.0) < 1e-12);
  }
}

TEST_CASE("softplus analytic points and monotonicity") {
  CHECK(softplus(0.0) == Catch::Approx(std::log(2.0)).margin(1e-15));
  CHECK(std::abs(softplus(50.0) - 50.0) < 1e-12);
  CHECK(std::abs(softplus(750.0) - 750.0) < 1e-12);  // no overflow
  double prev = softplus(-20.0);
  for (double x = -19.5; x <= 20.0; x += 0.5) {
    double cur = softplus(x);
    CHECK(cur > 0.0);
    CHECK(cur > prev);
    prev = cur;
  }
}

TEST_CASE("elu_plus_one strictly positive") {
  CHECK(elu_plus_one(-30.0) == Catch::Approx(std::exp(-30.0)).epsilon(1e-12));
  CHECK(elu_plus_one(-30.0) > 0.0);
  CHECK(elu_plus_one(0.0) == 1.0);
  CHECK(elu_plus_one(2.5) == 3.5);
}

TEST_CASE("exp_ew applies elementwise") {
  DenseMatrix m = DenseMatrix::from_data(1, 3, {0.0, 1.0, -2.0});
  DenseMatrix e = exp_ew(m);
  CHECK(e(0, 0) == 1.0);
  CHECK(e(0, 1) == Catch::Approx(std::exp(1.0)).margin(1e-15));
  CHECK(e(0, 2) == Catch::Approx(std::exp(-2.0)).margin(1e-15));
}

TEST_CASE("hadamard, transpose, outer") {
  DenseMatrix a = DenseMatrix::from_data(2, 2, {1, 2, 3, 4});
  DenseMatrix b = DenseMatrix::from_data(2, 2, {2, 2, 0.5, 0.5});
  DenseMatrix h = hadamard(a, b);
  CHECK(h(0, 1) == 4.0);
  CHECK(h(1, 0) == 1.5);
  CHECK_THROWS_AS(hadamard(a, DenseMatrix(2, 3)), DimensionError);

  DenseMatrix t = transpose(a);
  CHECK(t(0, 1) == 3.0);

  DenseMatrix o = outer({1.0, 2.0}, {3.0, 4.0, 5.0});
  CHECK(o.rows() == 2);
  CHECK(o(1, 2) == 10.0);
}

TEST_CASE("rng reproducibility and stream splitting") {
  Rng a(99), b(99);
  DenseMatrix ma = a.matrix(4, 4, -1.0, 1.0);
  DenseMatrix mb = b.matrix(4, 4, -1.0, 1.0);
  CHECK(ma.data() == mb.data());

  Rng base(7);
  Rng s1 = base.split(1), s2 = base.split(2);
  CHECK(s1.next_u64() != s2.next_u64());
  // splitting does not consume from the parent
  Rng base2(7);
  CHECK(base.next_u64() == base2.next_u64());
}

TEST_CASE("matrix validation") {
  CHECK_THROWS_AS(DenseMatrix(0, 3), DimensionError);
  CHECK_THROWS_AS(DenseMatrix::from_data(2, 2, {1.0, 2.0, 3.0}), DimensionError);
  CHECK_THROWS_AS(
      DenseMatrix::from_data(1, 2, {1.0, std::numeric_limits<double>::quiet_NaN()}),
      NumericError);
}

TEST_CASE("32-bit mode instantiates alongside the default") {
  Rng rng(3);
  DenseMatrixF a = rng.matrix<float>(3, 3, -1.0, 1.0);
  DenseMatrixF b = rng.matrix<float>(3, 3, -1.0, 1.0);
  DenseMatrixF c = matmul(a, b);
  CHECK(c.all_finite());
  CHECK(softmax_rows(a).rows() == 3);
}

TEST_CASE("layer_norm normalizes per token") {
  Rng rng(11);
  TokenMatrix x = rng.matrix(5, 8, -3.0, 3.0);
  std::vector<double> gamma(8, 1.0), beta(8, 0.0);
  TokenMatrix y = layer_norm(x, gamma, beta);
  for (int i = 0; i < y.rows(); ++i) {
    double mean = 0.0, var = 0.0;
    for (int j = 0; j < 8; ++j) mean += y(i, j);
    mean /= 8;
    for (int j = 0; j < 8; ++j) var += (y(i, j) - mean) * (y(i, j) - mean);
    var /= 8;
    CHECK(std::abs(mean) < 1e-12);
    CHECK(var == Catch::Approx(1.0).margin(1e-3));
  }
}
