#include "alignscope/matrix.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

#include "alignscope/common.hpp"

namespace alignscope {

Matrix::Matrix(std::size_t r, std::size_t c, std::vector<double> d)
    : rows(r), cols(c), data(std::move(d)) {
  if (data.size() != rows * cols) {
    throw ShapeError("Matrix: data length " + std::to_string(data.size()) +
                     " != rows*cols " + std::to_string(rows * cols));
  }
}

void check_finite(std::span<const double> v, const char* what) {
  for (double x : v) {
    if (!std::isfinite(x)) {
      throw NumericError(std::string(what) + ": non-finite entry");
    }
  }
}

void check_finite(const Matrix& m, const char* what) {
  check_finite(std::span<const double>(m.data), what);
}

void matvec(const Matrix& a, std::span<const double> x, std::span<double> y) {
  if (x.size() != a.cols || y.size() != a.rows) {
    throw ShapeError("matvec: dimension mismatch");
  }
  for (std::size_t i = 0; i < a.rows; ++i) {
    const double* row = a.data.data() + i * a.cols;
    double acc = 0.0;
    for (std::size_t j = 0; j < a.cols; ++j) acc += row[j] * x[j];
    y[i] = acc;
  }
}

void matvec_transposed(const Matrix& a, std::span<const double> x,
                       std::span<double> y) {
  if (x.size() != a.rows || y.size() != a.cols) {
    throw ShapeError("matvec_transposed: dimension mismatch");
  }
  for (std::size_t j = 0; j < a.cols; ++j) y[j] = 0.0;
  for (std::size_t i = 0; i < a.rows; ++i) {
    const double* row = a.data.data() + i * a.cols;
    const double xi = x[i];
    for (std::size_t j = 0; j < a.cols; ++j) y[j] += xi * row[j];
  }
}

Matrix matmul(const Matrix& a, const Matrix& b) {
  if (a.cols != b.rows) throw ShapeError("matmul: inner dimension mismatch");
  Matrix c(a.rows, b.cols);
  for (std::size_t i = 0; i < a.rows; ++i) {
    const double* arow = a.data.data() + i * a.cols;
    double* crow = c.data.data() + i * c.cols;
    for (std::size_t k = 0; k < a.cols; ++k) {
      const double aik = arow[k];
      const double* brow = b.data.data() + k * b.cols;
      for (std::size_t j = 0; j < b.cols; ++j) crow[j] += aik * brow[j];
    }
  }
  return c;
}

double dot(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw ShapeError("dot: length mismatch");
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) acc += a[i] * b[i];
  return acc;
}

double norm(std::span<const double> v) { return std::sqrt(dot(v, v)); }

double frobenius_norm(const Matrix& m) {
  return norm(std::span<const double>(m.data));
}

void axpy(double alpha, std::span<const double> x, std::span<double> y) {
  if (x.size() != y.size()) throw ShapeError("axpy: length mismatch");
  for (std::size_t i = 0; i < x.size(); ++i) y[i] += alpha * x[i];
}

Matrix init_gaussian(std::size_t rows, std::size_t cols, double sigma,
                     Rng& rng) {
  if (!std::isfinite(sigma) || sigma < 0.0) {
    throw std::invalid_argument("init_gaussian: sigma must be finite and >= 0");
  }
  if (rows == 0 || cols == 0) {
    throw std::invalid_argument("init_gaussian: zero dimension");
  }
  Matrix m(rows, cols);
  for (double& x : m.data) x = sigma * rng.gaussian();
  return m;
}

Matrix init_glorot_uniform(std::size_t rows, std::size_t cols, Rng& rng) {
  if (rows == 0 || cols == 0) {
    throw std::invalid_argument("init_glorot_uniform: zero dimension");
  }
  const double a = std::sqrt(6.0 / static_cast<double>(rows + cols));
  Matrix m(rows, cols);
  for (double& x : m.data) x = rng.uniform(-a, a);
  return m;
}

double top_eigenvalue(
    const std::function<void(std::span<const double>, std::span<double>)>&
        apply,
    std::size_t dim) {
  if (dim == 0) throw std::invalid_argument("top_eigenvalue: dim must be >= 1");
  constexpr int kMaxIters = 10000;
  constexpr double kTol = 1e-10;

  Vector v(dim, 1.0 / std::sqrt(static_cast<double>(dim)));
  Vector w(dim, 0.0);
  // start index dim means "all-ones was the start"; basis fallbacks follow.
  std::size_t next_basis = 0;
  double lambda = 0.0;
  for (int iter = 0; iter < kMaxIters; ++iter) {
    apply(v, w);
    double wn = norm(w);
    if (wn == 0.0) {
      // Start vector is in the null space; try basis vectors in turn.
      if (next_basis >= dim) return 0.0;  // operator is zero on the basis
      std::fill(v.begin(), v.end(), 0.0);
      v[next_basis++] = 1.0;
      continue;
    }
    double lambda_new = dot(v, w);
    for (std::size_t i = 0; i < dim; ++i) v[i] = w[i] / wn;
    if (std::abs(lambda_new - lambda) <=
        kTol * std::max(std::abs(lambda_new), 1e-300)) {
      return lambda_new;
    }
    lambda = lambda_new;
  }
  throw ConvergenceError("top_eigenvalue: no convergence after 10000 iterations",
                         lambda);
}

}  // namespace alignscope
