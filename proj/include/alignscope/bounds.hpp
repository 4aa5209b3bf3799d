#pragma once

#include <cstddef>
#include <functional>
#include <string>
#include <vector>

#include "alignscope/matrix.hpp"
#include "alignscope/rng.hpp"

namespace alignscope {

// Empirical moments of an n-sample of gradient vectors, with matrix-free
// access to the sample covariance Sigma_hat = (1/(n-1)) sum (g - Ghat)(g - Ghat)^T.
struct GradSampleStats {
  std::size_t n = 0;
  std::size_t d = 0;
  std::vector<double> samples;  // n x d, retained
  Vector mean;                  // Ghat
  double v_emp = 0.0;           // (1/(n-1)) sum ||g_i - Ghat||^2 = tr Sigma_hat
  double sigma1_sq = 0.0;       // top eigenvalue of Sigma_hat
  double max_norm = 0.0;        // max_i ||g_i||

  std::span<const double> row(std::size_t i) const {
    return {samples.data() + i * d, d};
  }
  // dir^T Sigma_hat dir.
  double covariance_quadratic(std::span<const double> dir) const;
  // y = Sigma_hat x, never materializing d x d.
  void apply_covariance(std::span<const double> x, std::span<double> y) const;
};

GradSampleStats make_grad_sample_stats(std::size_t n, std::size_t d,
                                       std::vector<double> samples);

// Divides every sample by g_max so the unit-ball bounds apply; bounds on the
// scaled sample translate back by multiplying norm-type results by g_max.
GradSampleStats normalize_to_unit_ball(const GradSampleStats& stats,
                                       double g_max);

// Ground truth for a synthetic gradient distribution: exact mean/covariance,
// a Lipschitz bound on the gradient norm, and (for function families) the
// population loss and its gradient in closed form.
struct TruthSpec {
  std::string id;
  std::size_t d = 0;
  Vector eval_point;  // x at which gradients are drawn
  Vector mean;        // G = E[g] at eval_point
  std::function<double(std::span<const double>)> cov_quad;  // v^T Sigma v
  double cov_trace = 0.0;
  double sigma1_sq = 0.0;  // top eigenvalue of Sigma
  double lipschitz = 1.0;  // bound on ||g||
  double smoothness = 0.0; // L
  // F and grad F; null for pure vector distributions.
  std::function<double(std::span<const double>)> population_loss;
  std::function<Vector(std::span<const double>)> population_grad;
  // Fills out (n x d) with gradient samples at eval_point.
  std::function<void(std::size_t, Rng&, std::vector<double>&)> sample;
};

// f_i(x) = loss(<x, z_i>) with z_i uniform over the standard basis of R^d.
// Mean and covariance are exact by enumeration over the d outcomes.
struct ScalarLoss {
  std::function<double(double)> value;
  std::function<double(double)> derivative;  // must be bounded by 1
  double smoothness = 1.0;
};
ScalarLoss logistic_scalar_loss();
ScalarLoss linear_scalar_loss();

TruthSpec make_orthonormal_feature_truth(std::size_t d, Vector eval_point,
                                         const ScalarLoss& loss);

// Convenience: draw n gradients from the orthonormal-feature family and
// return both the empirical stats and the exact truth.
std::pair<GradSampleStats, TruthSpec> sample_orthonormal_feature_grads(
    std::size_t d, std::size_t n, const Vector& eval_point,
    const ScalarLoss& loss, Rng& rng);

// g = mu + clip(v, radius) with v ~ N(0, s^2 I) clipped radially; the clip is
// symmetric so E[g] = mu exactly, and Cov(g) = c I with c in closed form via
// the chi-square CDF. Requires ||mu|| + radius <= 1. The associated function
// family is linear, f_i(x) = <g_i, x>, declared 1-smooth.
TruthSpec make_clipped_gaussian_truth(std::size_t d, Vector mu, double s,
                                      double radius);

// Quadratic family F(x) = 0.5 x^T diag(a) x for the descent-lemma check.
TruthSpec make_quadratic_truth(Vector diag);

// P(chi^2_k <= t).
double chi_squared_cdf(std::size_t k, double t);

// sqrt(2 dir_variance log(1/delta) / n) + G_norm log(1/delta) / (3n),
// bounding -<Ghat, G> + ||G||^2 for samples with ||g|| <= 1.
double bennett_direction_bound(std::size_t n, double delta, double dir_variance,
                               double g_norm);

// 2 sqrt(V^2 log((d+1)/delta) / n) + 4 log((d+1)/delta) / (3n), bounding
// ||Ghat - G|| with V^2 = trace Sigma.
double matrix_bernstein_norm_bound(std::size_t n, std::size_t d, double delta,
                                   double v_sq);

// sqrt(4 dir^T Sigma_hat dir log(4/delta) / n) + 7 ||dir|| log(4/delta) / (3(n-1)).
double empirical_bernstein_direction_bound(const GradSampleStats& stats,
                                           double delta,
                                           std::span<const double> direction);

// sqrt(8 V log(4d/delta) / n) + 7 log(4d/delta) sqrt(2d) / (3(n-1)), with
// empirical V, bounding ||Ghat - G||.
double empirical_dim_variance_bound(const GradSampleStats& stats, double delta,
                                    std::size_t d);

// Explicit-constant bound on |G^T Sigma_hat G - Ghat^T Sigma_hat Ghat|:
// 2 eps sqrt(sigma1^2) sqrt(Ghat^T Sigma_hat Ghat) + eps^2 sigma1^2 with
// eps = empirical_dim_variance_bound.
double covariance_gap_bound(const GradSampleStats& stats, double delta);

struct DescentCheck {
  double lhs = 0.0;
  double rhs = 0.0;
  bool holds = false;
};

// F(x - eta Ghat) - F(x) <= -eta <Ghat, grad F(x)> + eta^2 (L/2) ||Ghat||^2
// for an L-smooth F; requires a truth with a closed-form population loss.
DescentCheck descent_lemma_check(const TruthSpec& truth,
                                 std::span<const double> x,
                                 std::span<const double> g_hat, double eta);

// Certified bound on F(x - eta Ghat) - F(x) from the one-step analysis:
// -eta ||G||^2 + eta 4 sqrt(G^T Sigma G log(1/delta)) / sqrt(N)
//   + eta 2 G_lip ||G|| log(2/delta) / (3N) + L eta^2 G_lip^2 / 2.
double one_step_descent_bound(const TruthSpec& truth, std::size_t n, double eta,
                              double delta);

struct GradProgressBound {
  double bound = 0.0;
  double descent_term = 0.0;             // -eta ||G||^2 / 2
  double direction_term = 0.0;           // eta * direction bound at delta/2
  double direction_variance_term = 0.0;  // eta * sqrt-variance part alone
  double norm_term = 0.0;                // eta^2 L * (norm bound at delta/2)^2
  double sigma1_sq = 0.0;                // reported, enters no formula
};

// Union-bound assembly (delta/2 each on the direction and norm bounds,
// composed through the smooth descent step). Requires eta <= 1/L.
GradProgressBound grad_progress_bound(const TruthSpec& truth, std::size_t n,
                                      double eta, double delta);

struct BoundReport {
  std::string bound_id;
  double delta = 0.0;
  std::size_t n = 0;
  std::size_t trials = 0;
  std::size_t failures = 0;
  double failure_rate = 0.0;
  bool holds = false;  // failure_rate <= delta + 3 sqrt(delta(1-delta)/trials)
};

struct CoverageOptions {
  double eta = 0.1;  // step size for the descent-style bounds
};

// Draws `trials` independent n-sample datasets from the truth and counts how
// often the bound's left side exceeds its right side.
BoundReport run_coverage(const std::string& bound_id, const TruthSpec& truth,
                         std::size_t n, double delta, std::size_t trials,
                         Rng& rng, const CoverageOptions& options = {});

// All coverage-checkable bound ids, in report order.
const std::vector<std::string>& coverage_bound_ids();

}  // namespace alignscope
