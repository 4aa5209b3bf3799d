#pragma once

#include <cstddef>

#include "alignscope/matrix.hpp"
#include "alignscope/rng.hpp"

namespace alignscope {

struct KernelEstimate {
  double estimate = 0.0;
  double std_error = 0.0;
  std::size_t draws = 0;
  std::size_t h = 0;
  double sigma = 0.0;
};

// Closed-form bound h * exp(-sigma^2 ||x - x'||^2 / 2) on the expected inner
// product of sin features for Gaussian first-layer weights.
double sin_kernel_bound(std::span<const double> x, std::span<const double> x_prime,
                        double sigma, std::size_t h);

// Monte-Carlo estimate of E_{W1}[<sin(W1 x), sin(W1 x')>] over independent
// h x p Gaussian(0, sigma^2) draws of W1.
KernelEstimate sin_kernel_mc(std::span<const double> x,
                             std::span<const double> x_prime, double sigma,
                             std::size_t h, std::size_t draws, Rng& rng);

// Monte-Carlo estimate of E_{W1,b}[<sin(W1 x + b), sin(W1 x' + b)>] with b
// uniform on [0, 2pi); converges to (h/2) exp(-sigma^2 ||x - x'||^2 / 2).
KernelEstimate rff_kernel_mc(std::span<const double> x,
                             std::span<const double> x_prime, double sigma,
                             std::size_t h, std::size_t draws, Rng& rng);

// E[cos(t Z)] = exp(-t^2 s^2 / 2) for Z ~ N(0, s^2).
double gaussian_cos_expectation(double t, double s);

}  // namespace alignscope
