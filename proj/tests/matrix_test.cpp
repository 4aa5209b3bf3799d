#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <limits>
#include <vector>

#include "alignscope/common.hpp"
#include "alignscope/matrix.hpp"
#include "alignscope/rng.hpp"

using namespace alignscope;

namespace {

Matrix random_matrix(std::size_t r, std::size_t c, Rng& rng) {
  Matrix m(r, c);
  for (double& x : m.data) x = rng.uniform(-1.0, 1.0);
  return m;
}

}  // namespace

TEST_CASE("matvec on known values") {
  Matrix a(2, 3, {1, 2, 3, 4, 5, 6});
  Vector x = {1, 0, -1};
  Vector y(2);
  matvec(a, x, y);
  CHECK(y[0] == doctest::Approx(-2.0));
  CHECK(y[1] == doctest::Approx(-2.0));
}

TEST_CASE("matvec_transposed matches explicit transpose") {
  Rng rng(1);
  Matrix a = random_matrix(4, 6, rng);
  Vector x(4);
  for (double& v : x) v = rng.uniform(-1.0, 1.0);
  Vector y(6);
  matvec_transposed(a, x, y);
  for (std::size_t j = 0; j < 6; ++j) {
    double expect = 0.0;
    for (std::size_t i = 0; i < 4; ++i) expect += a.at(i, j) * x[i];
    CHECK(y[j] == doctest::Approx(expect).epsilon(1e-12));
  }
}

TEST_CASE("matmul associativity with matvec within 1e-10") {
  Rng rng(2);
  for (int rep = 0; rep < 20; ++rep) {
    Matrix a = random_matrix(5, 4, rng);
    Matrix b = random_matrix(4, 3, rng);
    Vector x(3);
    for (double& v : x) v = rng.uniform(-1.0, 1.0);
    Vector bx(4), abx(5), y(5);
    matvec(b, x, bx);
    matvec(a, bx, abx);
    Matrix ab = matmul(a, b);
    matvec(ab, x, y);
    for (std::size_t i = 0; i < 5; ++i) {
      CHECK(std::abs(y[i] - abx[i]) < 1e-10);
    }
  }
}

TEST_CASE("matmul shape mismatch throws") {
  Matrix a(2, 3);
  Matrix b(2, 3);
  CHECK_THROWS_AS(matmul(a, b), ShapeError);
}

TEST_CASE("dot, norm, frobenius, axpy") {
  Vector a = {3.0, 4.0};
  Vector b = {1.0, -1.0};
  CHECK(dot(a, b) == doctest::Approx(-1.0));
  CHECK(norm(a) == doctest::Approx(5.0));
  Matrix m(2, 1, {3.0, 4.0});
  CHECK(frobenius_norm(m) == doctest::Approx(5.0));
  axpy(2.0, b, a);
  CHECK(a[0] == doctest::Approx(5.0));
  CHECK(a[1] == doctest::Approx(2.0));
}

TEST_CASE("check_finite rejects NaN and Inf") {
  Matrix m(1, 2, {1.0, std::numeric_limits<double>::quiet_NaN()});
  CHECK_THROWS_AS(check_finite(m, "test"), NumericError);
  Vector v = {std::numeric_limits<double>::infinity()};
  CHECK_THROWS_AS(check_finite(std::span<const double>(v), "test"),
                  NumericError);
}

TEST_CASE("init_gaussian moments and edge cases") {
  Rng rng(3);
  Matrix m = init_gaussian(200, 200, 2.0, rng);
  double sum = 0.0, sum_sq = 0.0;
  for (double x : m.data) {
    sum += x;
    sum_sq += x * x;
  }
  double n = static_cast<double>(m.data.size());
  CHECK(std::abs(sum / n) < 0.05);
  CHECK(std::abs(sum_sq / n - 4.0) < 0.1);

  Matrix z = init_gaussian(3, 3, 0.0, rng);
  for (double x : z.data) CHECK(x == 0.0);
  CHECK_THROWS_AS(init_gaussian(2, 2, -1.0, rng), std::invalid_argument);
  CHECK_THROWS_AS(
      init_gaussian(2, 2, std::numeric_limits<double>::infinity(), rng),
      std::invalid_argument);
}

TEST_CASE("init_glorot_uniform range and zero-dim rejection") {
  Rng rng(4);
  Matrix m = init_glorot_uniform(30, 20, rng);
  const double a = std::sqrt(6.0 / (20 + 30));
  for (double x : m.data) {
    CHECK(x >= -a);
    CHECK(x <= a);
  }
  CHECK_THROWS_AS(init_glorot_uniform(0, 5, rng), std::invalid_argument);
}

TEST_CASE("top_eigenvalue on diagonal operator") {
  Vector diag = {0.5, 3.25, 1.0, 2.0};
  double top = top_eigenvalue(
      [&diag](std::span<const double> x, std::span<double> y) {
        for (std::size_t i = 0; i < diag.size(); ++i) y[i] = diag[i] * x[i];
      },
      diag.size());
  CHECK(top == doctest::Approx(3.25).epsilon(1e-8));
}

TEST_CASE("top_eigenvalue on a 2x2 with known spectrum") {
  // [[2,1],[1,2]] has eigenvalues 3 and 1.
  double top = top_eigenvalue(
      [](std::span<const double> x, std::span<double> y) {
        y[0] = 2.0 * x[0] + 1.0 * x[1];
        y[1] = 1.0 * x[0] + 2.0 * x[1];
      },
      2);
  CHECK(top == doctest::Approx(3.0).epsilon(1e-8));
}

TEST_CASE("top_eigenvalue falls back when the ones vector is annihilated") {
  // Projector onto span{(1,-1)}: kills the all-ones start vector.
  double top = top_eigenvalue(
      [](std::span<const double> x, std::span<double> y) {
        double p = 0.5 * (x[0] - x[1]);
        y[0] = p;
        y[1] = -p;
      },
      2);
  CHECK(top == doctest::Approx(1.0).epsilon(1e-8));
}

TEST_CASE("top_eigenvalue of zero operator") {
  double top = top_eigenvalue(
      [](std::span<const double>, std::span<double> y) {
        for (double& v : y) v = 0.0;
      },
      3);
  CHECK(top == doctest::Approx(0.0));
}

TEST_CASE("top_eigenvalue matches dense power-free oracle on PSD matrices") {
  Rng rng(5);
  for (int rep = 0; rep < 10; ++rep) {
    Matrix b = random_matrix(4, 4, rng);
    // A = B^T B is PSD; oracle: iterate x <- Ax / ||Ax|| many times by hand.
    auto apply = [&b](std::span<const double> x, std::span<double> y) {
      Vector t(4);
      matvec(b, x, t);
      matvec_transposed(b, t, y);
    };
    Vector x(4);
    for (double& v : x) v = rng.uniform(0.1, 1.0);
    double rayleigh = 0.0;
    for (int it = 0; it < 20000; ++it) {
      Vector y(4);
      apply(x, y);
      double nn = norm(y);
      if (nn == 0.0) break;
      for (std::size_t i = 0; i < 4; ++i) x[i] = y[i] / nn;
      rayleigh = nn;
    }
    double top = top_eigenvalue(apply, 4);
    CHECK(top == doctest::Approx(rayleigh).epsilon(1e-7));
  }
}
