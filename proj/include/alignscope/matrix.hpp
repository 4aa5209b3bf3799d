#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

#include "alignscope/rng.hpp"

namespace alignscope {

using Vector = std::vector<double>;

// Dense row-major matrix of doubles. Immutable by convention once built.
struct Matrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> data;

  Matrix() = default;
  Matrix(std::size_t r, std::size_t c) : rows(r), cols(c), data(r * c, 0.0) {}
  Matrix(std::size_t r, std::size_t c, std::vector<double> d);

  double& at(std::size_t i, std::size_t j) { return data[i * cols + j]; }
  double at(std::size_t i, std::size_t j) const { return data[i * cols + j]; }

  std::span<const double> row(std::size_t i) const {
    return {data.data() + i * cols, cols};
  }
  std::span<double> row(std::size_t i) {
    return {data.data() + i * cols, cols};
  }

  bool same_shape(const Matrix& o) const {
    return rows == o.rows && cols == o.cols;
  }
};

// Throws NumericError if any entry is NaN/Inf.
void check_finite(const Matrix& m, const char* what);
void check_finite(std::span<const double> v, const char* what);

// y = A x.
void matvec(const Matrix& a, std::span<const double> x, std::span<double> y);
// y = A^T x.
void matvec_transposed(const Matrix& a, std::span<const double> x,
                       std::span<double> y);
// C = A B.
Matrix matmul(const Matrix& a, const Matrix& b);

double dot(std::span<const double> a, std::span<const double> b);
double norm(std::span<const double> v);
double frobenius_norm(const Matrix& m);
// y += alpha * x.
void axpy(double alpha, std::span<const double> x, std::span<double> y);

// Entries i.i.d. Normal(0, sigma^2). sigma must be finite and >= 0.
Matrix init_gaussian(std::size_t rows, std::size_t cols, double sigma,
                     Rng& rng);

// Entries i.i.d. Uniform(-a, a), a = sqrt(6 / (fan_in + fan_out)) with
// fan_in = cols, fan_out = rows. Dimensions must be >= 1.
Matrix init_glorot_uniform(std::size_t rows, std::size_t cols, Rng& rng);

// Largest eigenvalue of a symmetric PSD operator given only by its action
// v -> Av. Power iteration from the normalized all-ones vector, relative
// change tolerance 1e-10, cap 10000 iterations; falls back to basis start
// vectors if the current start is annihilated. Throws ConvergenceError with
// the last Rayleigh quotient on failure.
double top_eigenvalue(
    const std::function<void(std::span<const double>, std::span<double>)>&
        apply,
    std::size_t dim);

}  // namespace alignscope
