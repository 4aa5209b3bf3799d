#include "alignscope/kernelcheck.hpp"

#include <cmath>
#include <stdexcept>
#include <vector>

#include "alignscope/common.hpp"

namespace alignscope {
namespace {

double squared_distance(std::span<const double> x,
                        std::span<const double> x_prime) {
  if (x.size() != x_prime.size()) {
    throw ShapeError("kernel inputs must have equal dimension");
  }
  double acc = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    double diff = x[i] - x_prime[i];
    acc += diff * diff;
  }
  return acc;
}

KernelEstimate summarize(const std::vector<double>& samples, std::size_t h,
                         double sigma) {
  KernelEstimate est;
  est.draws = samples.size();
  est.h = h;
  est.sigma = sigma;
  for (double x : samples) est.estimate += x;
  est.estimate /= static_cast<double>(samples.size());
  double ss = 0.0;
  for (double x : samples) ss += (x - est.estimate) * (x - est.estimate);
  double sample_std = std::sqrt(ss / static_cast<double>(samples.size() - 1));
  est.std_error = sample_std / std::sqrt(static_cast<double>(samples.size()));
  return est;
}

// One draw's inner product; with_bias adds a shared uniform phase per unit.
double one_draw(std::span<const double> x, std::span<const double> x_prime,
                double sigma, std::size_t h, bool with_bias, Rng& rng) {
  double acc = 0.0;
  for (std::size_t unit = 0; unit < h; ++unit) {
    double a = 0.0;
    double a_prime = 0.0;
    for (std::size_t j = 0; j < x.size(); ++j) {
      double w = sigma * rng.gaussian();
      a += w * x[j];
      a_prime += w * x_prime[j];
    }
    if (with_bias) {
      double b = rng.uniform(0.0, 2.0 * M_PI);
      a += b;
      a_prime += b;
    }
    acc += std::sin(a) * std::sin(a_prime);
  }
  return acc;
}

KernelEstimate kernel_mc(std::span<const double> x,
                         std::span<const double> x_prime, double sigma,
                         std::size_t h, std::size_t draws, bool with_bias,
                         Rng& rng) {
  if (draws < 30) throw std::invalid_argument("kernel MC needs draws >= 30");
  if (h < 1) throw std::invalid_argument("kernel MC needs h >= 1");
  squared_distance(x, x_prime);  // shape check
  Rng base = rng.child(with_bias ? "rff_kernel_mc" : "sin_kernel_mc");
  std::vector<double> samples(draws);
  parallel_for(draws, [&](std::size_t t) {
    Rng draw_rng = base.child(t);
    samples[t] = one_draw(x, x_prime, sigma, h, with_bias, draw_rng);
  });
  return summarize(samples, h, sigma);
}

}  // namespace

double sin_kernel_bound(std::span<const double> x,
                        std::span<const double> x_prime, double sigma,
                        std::size_t h) {
  if (!(sigma >= 0.0)) throw std::invalid_argument("sigma must be >= 0");
  return static_cast<double>(h) *
         std::exp(-0.5 * sigma * sigma * squared_distance(x, x_prime));
}

KernelEstimate sin_kernel_mc(std::span<const double> x,
                             std::span<const double> x_prime, double sigma,
                             std::size_t h, std::size_t draws, Rng& rng) {
  return kernel_mc(x, x_prime, sigma, h, draws, /*with_bias=*/false, rng);
}

KernelEstimate rff_kernel_mc(std::span<const double> x,
                             std::span<const double> x_prime, double sigma,
                             std::size_t h, std::size_t draws, Rng& rng) {
  return kernel_mc(x, x_prime, sigma, h, draws, /*with_bias=*/true, rng);
}

double gaussian_cos_expectation(double t, double s) {
  return std::exp(-0.5 * t * t * s * s);
}

}  // namespace alignscope
