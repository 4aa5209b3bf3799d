#include "alignscope/bounds.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

#include "alignscope/common.hpp"

namespace alignscope {
namespace {

void require_delta(double delta) {
  if (!(delta > 0.0 && delta < 1.0)) {
    throw std::invalid_argument("delta must be in (0, 1)");
  }
}

// Regularized lower incomplete gamma P(a, x), series + continued fraction.
double gamma_p(double a, double x) {
  if (!(a > 0.0) || x < 0.0) throw std::invalid_argument("gamma_p domain");
  if (x == 0.0) return 0.0;
  const double log_prefactor = -x + a * std::log(x) - std::lgamma(a);
  if (x < a + 1.0) {
    double term = 1.0 / a;
    double sum = term;
    for (int k = 1; k < 1000; ++k) {
      term *= x / (a + k);
      sum += term;
      if (std::abs(term) < std::abs(sum) * 1e-16) break;
    }
    return sum * std::exp(log_prefactor);
  }
  // Lentz continued fraction for Q(a, x).
  const double tiny = 1e-300;
  double b = x + 1.0 - a;
  double c = 1.0 / tiny;
  double d = 1.0 / b;
  double frac = d;
  for (int k = 1; k < 1000; ++k) {
    double an = -static_cast<double>(k) * (static_cast<double>(k) - a);
    b += 2.0;
    d = an * d + b;
    if (std::abs(d) < tiny) d = tiny;
    c = b + an / c;
    if (std::abs(c) < tiny) c = tiny;
    d = 1.0 / d;
    double delta = d * c;
    frac *= delta;
    if (std::abs(delta - 1.0) < 1e-16) break;
  }
  return 1.0 - std::exp(log_prefactor) * frac;
}

}  // namespace

double chi_squared_cdf(std::size_t k, double t) {
  if (k == 0) throw std::invalid_argument("chi_squared_cdf: k must be >= 1");
  if (t <= 0.0) return 0.0;
  return gamma_p(static_cast<double>(k) / 2.0, t / 2.0);
}

double GradSampleStats::covariance_quadratic(std::span<const double> dir) const {
  if (dir.size() != d) throw ShapeError("covariance_quadratic: bad dimension");
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    auto g = row(i);
    double proj = 0.0;
    for (std::size_t j = 0; j < d; ++j) proj += (g[j] - mean[j]) * dir[j];
    acc += proj * proj;
  }
  return acc / static_cast<double>(n - 1);
}

void GradSampleStats::apply_covariance(std::span<const double> x,
                                       std::span<double> y) const {
  if (x.size() != d || y.size() != d) {
    throw ShapeError("apply_covariance: bad dimension");
  }
  for (std::size_t j = 0; j < d; ++j) y[j] = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    auto g = row(i);
    double proj = 0.0;
    for (std::size_t j = 0; j < d; ++j) proj += (g[j] - mean[j]) * x[j];
    for (std::size_t j = 0; j < d; ++j) y[j] += proj * (g[j] - mean[j]);
  }
  const double inv = 1.0 / static_cast<double>(n - 1);
  for (std::size_t j = 0; j < d; ++j) y[j] *= inv;
}

GradSampleStats make_grad_sample_stats(std::size_t n, std::size_t d,
                                       std::vector<double> samples) {
  if (n < 2) throw std::invalid_argument("need n >= 2 samples");
  if (samples.size() != n * d) throw ShapeError("sample buffer size mismatch");
  check_finite(std::span<const double>(samples), "gradient samples");
  GradSampleStats stats;
  stats.n = n;
  stats.d = d;
  stats.samples = std::move(samples);
  stats.mean.assign(d, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    axpy(1.0, stats.row(i), stats.mean);
  }
  for (double& m : stats.mean) m /= static_cast<double>(n);
  for (std::size_t i = 0; i < n; ++i) {
    auto g = stats.row(i);
    double sq = 0.0;
    double gn = 0.0;
    for (std::size_t j = 0; j < d; ++j) {
      double dev = g[j] - stats.mean[j];
      sq += dev * dev;
      gn += g[j] * g[j];
    }
    stats.v_emp += sq;
    stats.max_norm = std::max(stats.max_norm, std::sqrt(gn));
  }
  stats.v_emp /= static_cast<double>(n - 1);
  if (stats.v_emp == 0.0) {
    stats.sigma1_sq = 0.0;
  } else {
    stats.sigma1_sq = top_eigenvalue(
        [&stats](std::span<const double> x, std::span<double> y) {
          stats.apply_covariance(x, y);
        },
        d);
  }
  return stats;
}

GradSampleStats normalize_to_unit_ball(const GradSampleStats& stats,
                                       double g_max) {
  if (!(g_max > 0.0)) throw std::invalid_argument("g_max must be > 0");
  std::vector<double> scaled = stats.samples;
  for (double& x : scaled) x /= g_max;
  return make_grad_sample_stats(stats.n, stats.d, std::move(scaled));
}

ScalarLoss logistic_scalar_loss() {
  ScalarLoss loss;
  loss.value = [](double t) { return std::log1p(std::exp(-t)); };
  loss.derivative = [](double t) { return -1.0 / (1.0 + std::exp(t)); };
  loss.smoothness = 0.25;
  return loss;
}

ScalarLoss linear_scalar_loss() {
  ScalarLoss loss;
  loss.value = [](double t) { return t; };
  loss.derivative = [](double) { return 1.0; };
  loss.smoothness = 0.0;
  return loss;
}

TruthSpec make_orthonormal_feature_truth(std::size_t d, Vector eval_point,
                                         const ScalarLoss& loss) {
  if (d < 1) throw std::invalid_argument("d must be >= 1");
  if (eval_point.size() != d) throw ShapeError("eval point dimension mismatch");

  Vector slopes(d);
  for (std::size_t k = 0; k < d; ++k) {
    slopes[k] = loss.derivative(eval_point[k]);
    if (std::abs(slopes[k]) > 1.0 + 1e-12) {
      throw std::invalid_argument("loss derivative must be bounded by 1");
    }
  }

  TruthSpec truth;
  truth.id = "orthonormal_features";
  truth.d = d;
  truth.eval_point = eval_point;
  truth.mean.resize(d);
  for (std::size_t k = 0; k < d; ++k) {
    truth.mean[k] = slopes[k] / static_cast<double>(d);
  }
  const Vector mean = truth.mean;
  const double inv_d = 1.0 / static_cast<double>(d);
  // Sigma = (1/d) diag(slopes^2) - G G^T.
  truth.cov_quad = [slopes, mean, inv_d](std::span<const double> v) {
    double diag = 0.0;
    double proj = 0.0;
    for (std::size_t k = 0; k < v.size(); ++k) {
      diag += slopes[k] * slopes[k] * v[k] * v[k];
      proj += mean[k] * v[k];
    }
    return inv_d * diag - proj * proj;
  };
  truth.cov_trace = 0.0;
  for (std::size_t k = 0; k < d; ++k) {
    truth.cov_trace += inv_d * slopes[k] * slopes[k] - mean[k] * mean[k];
  }
  truth.sigma1_sq = top_eigenvalue(
      [&slopes, &mean = truth.mean, inv_d](std::span<const double> x,
                                           std::span<double> y) {
        double proj = 0.0;
        for (std::size_t k = 0; k < x.size(); ++k) proj += mean[k] * x[k];
        for (std::size_t k = 0; k < x.size(); ++k) {
          y[k] = inv_d * slopes[k] * slopes[k] * x[k] - proj * mean[k];
        }
      },
      d);
  truth.lipschitz = 0.0;
  for (double s : slopes) truth.lipschitz = std::max(truth.lipschitz, std::abs(s));
  truth.smoothness = loss.smoothness;
  auto value = loss.value;
  truth.population_loss = [value, inv_d](std::span<const double> x) {
    double acc = 0.0;
    for (double xk : x) acc += value(xk);
    return inv_d * acc;
  };
  auto derivative = loss.derivative;
  truth.population_grad = [derivative, inv_d](std::span<const double> x) {
    Vector g(x.size());
    for (std::size_t k = 0; k < x.size(); ++k) g[k] = inv_d * derivative(x[k]);
    return g;
  };
  truth.sample = [slopes, d](std::size_t n, Rng& rng,
                             std::vector<double>& out) {
    out.assign(n * d, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
      std::size_t k = rng.uniform_index(d);
      out[i * d + k] = slopes[k];
    }
  };
  return truth;
}

std::pair<GradSampleStats, TruthSpec> sample_orthonormal_feature_grads(
    std::size_t d, std::size_t n, const Vector& eval_point,
    const ScalarLoss& loss, Rng& rng) {
  TruthSpec truth = make_orthonormal_feature_truth(d, eval_point, loss);
  std::vector<double> samples;
  truth.sample(n, rng, samples);
  return {make_grad_sample_stats(n, d, std::move(samples)), std::move(truth)};
}

TruthSpec make_clipped_gaussian_truth(std::size_t d, Vector mu, double s,
                                      double radius) {
  if (d < 1) throw std::invalid_argument("d must be >= 1");
  if (mu.size() != d) throw ShapeError("mu dimension mismatch");
  if (!(s > 0.0) || !(radius > 0.0)) {
    throw std::invalid_argument("s and radius must be > 0");
  }
  double mu_norm = norm(mu);
  if (mu_norm + radius > 1.0 + 1e-12) {
    throw std::invalid_argument("||mu|| + radius must be <= 1");
  }

  // Cov = c I with c = E[min(R^2, r^2)] / d for R^2 = s^2 chi^2_d:
  // E[min(u, t)] = d F_{d+2}(t) + t (1 - F_d(t)) for u ~ chi^2_d, t = r^2/s^2.
  const double t = radius * radius / (s * s);
  const double e_min = s * s * (static_cast<double>(d) * chi_squared_cdf(d + 2, t) +
                                t * (1.0 - chi_squared_cdf(d, t)));
  const double c = e_min / static_cast<double>(d);

  TruthSpec truth;
  truth.id = "clipped_gaussian";
  truth.d = d;
  truth.eval_point.assign(d, 0.0);
  truth.mean = mu;
  truth.cov_quad = [c](std::span<const double> v) { return c * dot(v, v); };
  truth.cov_trace = c * static_cast<double>(d);
  truth.sigma1_sq = c;
  truth.lipschitz = mu_norm + radius;
  truth.smoothness = 1.0;  // linear family, Hessian is zero
  Vector mean = mu;
  truth.population_loss = [mean](std::span<const double> x) {
    return dot(mean, x);
  };
  truth.population_grad = [mean](std::span<const double>) { return mean; };
  truth.sample = [mu, s, radius, d](std::size_t n, Rng& rng,
                                    std::vector<double>& out) {
    out.resize(n * d);
    Vector v(d);
    for (std::size_t i = 0; i < n; ++i) {
      double sq = 0.0;
      for (std::size_t j = 0; j < d; ++j) {
        v[j] = s * rng.gaussian();
        sq += v[j] * v[j];
      }
      double r = std::sqrt(sq);
      double scale = (r > radius) ? radius / r : 1.0;
      for (std::size_t j = 0; j < d; ++j) {
        out[i * d + j] = mu[j] + scale * v[j];
      }
    }
  };
  return truth;
}

TruthSpec make_quadratic_truth(Vector diag) {
  if (diag.empty()) throw std::invalid_argument("empty quadratic");
  TruthSpec truth;
  truth.id = "quadratic";
  truth.d = diag.size();
  truth.eval_point.assign(diag.size(), 0.0);
  truth.mean.assign(diag.size(), 0.0);
  truth.cov_quad = [](std::span<const double>) { return 0.0; };
  truth.smoothness = 0.0;
  for (double a : diag) {
    if (a < 0.0) throw std::invalid_argument("quadratic must be PSD");
    truth.smoothness = std::max(truth.smoothness, a);
  }
  truth.population_loss = [diag](std::span<const double> x) {
    double acc = 0.0;
    for (std::size_t k = 0; k < x.size(); ++k) acc += diag[k] * x[k] * x[k];
    return 0.5 * acc;
  };
  truth.population_grad = [diag](std::span<const double> x) {
    Vector g(x.size());
    for (std::size_t k = 0; k < x.size(); ++k) g[k] = diag[k] * x[k];
    return g;
  };
  return truth;
}

double bennett_direction_bound(std::size_t n, double delta, double dir_variance,
                               double g_norm) {
  require_delta(delta);
  if (n < 1) throw std::invalid_argument("n must be >= 1");
  if (dir_variance < 0.0 || g_norm < 0.0) {
    throw std::invalid_argument("variance and norm must be >= 0");
  }
  const double log_term = std::log(1.0 / delta);
  return std::sqrt(2.0 * dir_variance * log_term / static_cast<double>(n)) +
         g_norm * log_term / (3.0 * static_cast<double>(n));
}

double matrix_bernstein_norm_bound(std::size_t n, std::size_t d, double delta,
                                   double v_sq) {
  require_delta(delta);
  if (n < 1 || d < 1) throw std::invalid_argument("n and d must be >= 1");
  if (v_sq < 0.0) throw std::invalid_argument("variance must be >= 0");
  const double log_term = std::log(static_cast<double>(d + 1) / delta);
  return 2.0 * std::sqrt(v_sq * log_term / static_cast<double>(n)) +
         4.0 * log_term / (3.0 * static_cast<double>(n));
}

double empirical_bernstein_direction_bound(const GradSampleStats& stats,
                                           double delta,
                                           std::span<const double> direction) {
  require_delta(delta);
  if (stats.n < 2) throw std::invalid_argument("need n >= 2 samples");
  const double quad = stats.covariance_quadratic(direction);
  const double log_term = std::log(4.0 / delta);
  return std::sqrt(4.0 * quad * log_term / static_cast<double>(stats.n)) +
         7.0 * norm(direction) * log_term /
             (3.0 * static_cast<double>(stats.n - 1));
}

double empirical_dim_variance_bound(const GradSampleStats& stats, double delta,
                                    std::size_t d) {
  require_delta(delta);
  if (stats.n < 2) throw std::invalid_argument("need n >= 2 samples");
  const double log_term = std::log(4.0 * static_cast<double>(d) / delta);
  return std::sqrt(8.0 * stats.v_emp * log_term /
                   static_cast<double>(stats.n)) +
         7.0 * log_term * std::sqrt(2.0 * static_cast<double>(d)) /
             (3.0 * static_cast<double>(stats.n - 1));
}

double covariance_gap_bound(const GradSampleStats& stats, double delta) {
  require_delta(delta);
  const double eps = empirical_dim_variance_bound(stats, delta, stats.d);
  const double ghat_quad = stats.covariance_quadratic(stats.mean);
  return 2.0 * eps * std::sqrt(stats.sigma1_sq) * std::sqrt(ghat_quad) +
         eps * eps * stats.sigma1_sq;
}

DescentCheck descent_lemma_check(const TruthSpec& truth,
                                 std::span<const double> x,
                                 std::span<const double> g_hat, double eta) {
  if (!truth.population_loss || !truth.population_grad) {
    throw std::invalid_argument("truth has no closed-form population loss");
  }
  const double l_smooth = truth.smoothness;
  if (!(eta > 0.0) || (l_smooth > 0.0 && eta > 0.5 / l_smooth + 1e-15)) {
    throw std::invalid_argument("eta must be in (0, 1/(2L)]");
  }
  Vector moved(x.begin(), x.end());
  axpy(-eta, g_hat, moved);
  DescentCheck check;
  check.lhs = truth.population_loss(moved) - truth.population_loss(x);
  Vector grad = truth.population_grad(x);
  check.rhs = -eta * dot(g_hat, grad) +
              0.5 * eta * eta * l_smooth * dot(g_hat, g_hat);
  check.holds = check.lhs <= check.rhs + 1e-10;
  return check;
}

double one_step_descent_bound(const TruthSpec& truth, std::size_t n, double eta,
                              double delta) {
  require_delta(delta);
  if (n == 0) throw std::invalid_argument("n must be >= 1");
  const double g_sq = dot(truth.mean, truth.mean);
  const double dir_var = truth.cov_quad(truth.mean);
  const double nn = static_cast<double>(n);
  return -eta * g_sq +
         eta * 4.0 * std::sqrt(dir_var * std::log(1.0 / delta)) / std::sqrt(nn) +
         eta * 2.0 * truth.lipschitz * std::sqrt(g_sq) * std::log(2.0 / delta) /
             (3.0 * nn) +
         0.5 * truth.smoothness * eta * eta * truth.lipschitz * truth.lipschitz;
}

GradProgressBound grad_progress_bound(const TruthSpec& truth, std::size_t n,
                                      double eta, double delta) {
  require_delta(delta);
  if (n < 1) throw std::invalid_argument("n must be >= 1");
  const double l_smooth = truth.smoothness;
  if (!(eta > 0.0) || (l_smooth > 0.0 && eta > 1.0 / l_smooth + 1e-15)) {
    throw std::invalid_argument("eta must be in (0, 1/L]");
  }
  const double g_norm = norm(truth.mean);
  const double dir_var = truth.cov_quad(truth.mean);
  const double half_delta = delta / 2.0;

  GradProgressBound out;
  out.sigma1_sq = truth.sigma1_sq;
  out.descent_term = -0.5 * eta * g_norm * g_norm;
  out.direction_term =
      eta * bennett_direction_bound(n, half_delta, dir_var, g_norm);
  out.direction_variance_term =
      eta * std::sqrt(2.0 * dir_var * std::log(1.0 / half_delta) /
                      static_cast<double>(n));
  const double norm_bound =
      matrix_bernstein_norm_bound(n, truth.d, half_delta, truth.cov_trace);
  out.norm_term = eta * eta * l_smooth * norm_bound * norm_bound;
  out.bound = out.descent_term + out.direction_term + out.norm_term;
  return out;
}

namespace {

enum class BoundId {
  kBennettDirection,
  kMatrixBernsteinNorm,
  kEmpiricalBernsteinDirection,
  kEmpiricalDimVariance,
  kCovarianceGap,
  kOneStepDescent,
  kGradProgress,
};

BoundId parse_bound_id(const std::string& id) {
  if (id == "bennett_direction") return BoundId::kBennettDirection;
  if (id == "matrix_bernstein_norm") return BoundId::kMatrixBernsteinNorm;
  if (id == "empirical_bernstein_direction") {
    return BoundId::kEmpiricalBernsteinDirection;
  }
  if (id == "empirical_dim_variance") return BoundId::kEmpiricalDimVariance;
  if (id == "covariance_gap") return BoundId::kCovarianceGap;
  if (id == "one_step_descent") return BoundId::kOneStepDescent;
  if (id == "grad_progress") return BoundId::kGradProgress;
  throw std::invalid_argument("unknown bound id: " + id);
}

bool needs_population_loss(BoundId id) {
  return id == BoundId::kOneStepDescent || id == BoundId::kGradProgress;
}

// True covariance quadratic form with the true mean, |G^T S G| style values
// that a trial needs, precomputed once.
struct TrialContext {
  const TruthSpec& truth;
  BoundId id;
  double delta;
  double eta;
  double g_sq;
  double g_norm;
  double dir_var;
};

// Evaluates one trial; returns true when the bound FAILED (LHS > RHS).
bool run_trial(const TrialContext& ctx, std::size_t n, Rng& rng) {
  std::vector<double> samples;
  ctx.truth.sample(n, rng, samples);
  const TruthSpec& truth = ctx.truth;

  switch (ctx.id) {
    case BoundId::kBennettDirection: {
      Vector g_hat(truth.d, 0.0);
      for (std::size_t i = 0; i < n; ++i) {
        axpy(1.0, std::span<const double>(samples.data() + i * truth.d, truth.d),
             g_hat);
      }
      for (double& x : g_hat) x /= static_cast<double>(n);
      double lhs = -dot(g_hat, truth.mean) + ctx.g_sq;
      double rhs = bennett_direction_bound(n, ctx.delta, ctx.dir_var, ctx.g_norm);
      return lhs > rhs;
    }
    case BoundId::kMatrixBernsteinNorm: {
      Vector g_hat(truth.d, 0.0);
      for (std::size_t i = 0; i < n; ++i) {
        axpy(1.0, std::span<const double>(samples.data() + i * truth.d, truth.d),
             g_hat);
      }
      double lhs_sq = 0.0;
      for (std::size_t j = 0; j < truth.d; ++j) {
        double dev = g_hat[j] / static_cast<double>(n) - truth.mean[j];
        lhs_sq += dev * dev;
      }
      double rhs = matrix_bernstein_norm_bound(n, truth.d, ctx.delta,
                                               truth.cov_trace);
      return std::sqrt(lhs_sq) > rhs;
    }
    case BoundId::kEmpiricalBernsteinDirection: {
      GradSampleStats stats = make_grad_sample_stats(n, truth.d, samples);
      double lhs = std::abs(dot(truth.mean, stats.mean) - ctx.g_sq);
      double rhs =
          empirical_bernstein_direction_bound(stats, ctx.delta, truth.mean);
      return lhs > rhs;
    }
    case BoundId::kEmpiricalDimVariance: {
      GradSampleStats stats = make_grad_sample_stats(n, truth.d, samples);
      Vector dev = stats.mean;
      axpy(-1.0, truth.mean, dev);
      double rhs = empirical_dim_variance_bound(stats, ctx.delta, truth.d);
      return norm(dev) > rhs;
    }
    case BoundId::kCovarianceGap: {
      GradSampleStats stats = make_grad_sample_stats(n, truth.d, samples);
      double lhs = std::abs(stats.covariance_quadratic(truth.mean) -
                            stats.covariance_quadratic(stats.mean));
      double rhs = covariance_gap_bound(stats, ctx.delta);
      return lhs > rhs;
    }
    case BoundId::kOneStepDescent:
    case BoundId::kGradProgress: {
      Vector g_hat(truth.d, 0.0);
      for (std::size_t i = 0; i < n; ++i) {
        axpy(1.0, std::span<const double>(samples.data() + i * truth.d, truth.d),
             g_hat);
      }
      for (double& x : g_hat) x /= static_cast<double>(n);
      Vector moved = truth.eval_point;
      axpy(-ctx.eta, g_hat, moved);
      double lhs = truth.population_loss(moved) -
                   truth.population_loss(truth.eval_point);
      double rhs = (ctx.id == BoundId::kOneStepDescent)
                       ? one_step_descent_bound(truth, n, ctx.eta, ctx.delta)
                       : grad_progress_bound(truth, n, ctx.eta, ctx.delta).bound;
      return lhs > rhs;
    }
  }
  throw std::logic_error("unreachable");
}

}  // namespace

BoundReport run_coverage(const std::string& bound_id, const TruthSpec& truth,
                         std::size_t n, double delta, std::size_t trials,
                         Rng& rng, const CoverageOptions& options) {
  require_delta(delta);
  if (trials < 100) throw std::invalid_argument("need at least 100 trials");
  BoundId id = parse_bound_id(bound_id);
  if (!truth.sample) {
    throw std::invalid_argument("truth spec has no sampler");
  }
  if (needs_population_loss(id) && !truth.population_loss) {
    throw std::invalid_argument("bound " + bound_id +
                                " needs a closed-form population loss");
  }
  double eta = options.eta;
  if (truth.smoothness > 0.0) {
    eta = std::min(eta, 1.0 / truth.smoothness);
  }
  TrialContext ctx{truth,
                   id,
                   delta,
                   eta,
                   dot(truth.mean, truth.mean),
                   norm(truth.mean),
                   truth.cov_quad(truth.mean)};

  Rng base = rng.child("coverage_" + bound_id);
  std::vector<char> failed(trials, 0);
  parallel_for(trials, [&](std::size_t t) {
    Rng trial_rng = base.child(t);
    failed[t] = run_trial(ctx, n, trial_rng) ? 1 : 0;
  });

  BoundReport report;
  report.bound_id = bound_id;
  report.delta = delta;
  report.n = n;
  report.trials = trials;
  for (char f : failed) report.failures += f;
  report.failure_rate =
      static_cast<double>(report.failures) / static_cast<double>(trials);
  report.holds =
      report.failure_rate <=
      delta + 3.0 * std::sqrt(delta * (1.0 - delta) / static_cast<double>(trials));
  return report;
}

const std::vector<std::string>& coverage_bound_ids() {
  static const std::vector<std::string> ids = {
      "bennett_direction",      "matrix_bernstein_norm",
      "empirical_bernstein_direction", "empirical_dim_variance",
      "covariance_gap",         "one_step_descent",
      "grad_progress"};
  return ids;
}

}  // namespace alignscope
