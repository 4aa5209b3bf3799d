#include "alignscope/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

#include "alignscope/common.hpp"

namespace alignscope {

VectorSet::VectorSet(std::size_t n_, std::size_t d_)
    : n(n_), d(d_), data(n_ * d_, 0.0) {}

VectorSet::VectorSet(std::size_t n_, std::size_t d_, std::vector<double> data_,
                     std::vector<std::size_t> labels_)
    : n(n_), d(d_), data(std::move(data_)), labels(std::move(labels_)) {
  if (data.size() != n * d) throw ShapeError("VectorSet: data length mismatch");
  if (!labels.empty() && labels.size() != n) {
    throw ShapeError("VectorSet: label count mismatch");
  }
}

namespace {

struct SubsetSums {
  std::size_t count = 0;
  Vector sum;
  double sum_sq_norms = 0.0;
  double sum_norms = 0.0;
};

// Fixed index-order accumulation over the rows where include(i) holds.
template <typename Pred>
SubsetSums accumulate(const VectorSet& set, Pred include) {
  SubsetSums s;
  s.sum.assign(set.d, 0.0);
  for (std::size_t i = 0; i < set.n; ++i) {
    if (!include(i)) continue;
    auto v = set.row(i);
    ++s.count;
    axpy(1.0, v, s.sum);
    double sq = dot(v, v);
    s.sum_sq_norms += sq;
    s.sum_norms += std::sqrt(sq);
  }
  return s;
}

double omega_from_sums(const SubsetSums& s) {
  const double nn = static_cast<double>(s.count);
  const double pair_sum = dot(s.sum, s.sum) - s.sum_sq_norms;
  return nn * pair_sum / ((nn - 1.0) * s.sum_norms * s.sum_norms);
}

}  // namespace

double alignment(const VectorSet& set) {
  if (set.n < 2) throw std::invalid_argument("alignment needs n >= 2");
  check_finite(std::span<const double>(set.data), "alignment input");
  SubsetSums s = accumulate(set, [](std::size_t) { return true; });
  if (s.sum_norms == 0.0) {
    throw UndefinedMetricError("alignment undefined for all-zero vectors");
  }
  return omega_from_sums(s);
}

AlignmentReport class_alignment(const VectorSet& set, std::size_t k) {
  if (!set.has_labels()) {
    throw std::invalid_argument("class_alignment requires labels");
  }
  for (std::size_t i = 0; i < set.n; ++i) {
    if (set.labels[i] >= k) {
      throw std::invalid_argument("label " + std::to_string(set.labels[i]) +
                                  " out of range for k=" + std::to_string(k));
    }
  }
  AlignmentReport report;
  report.omega_c.assign(k, 0.0);
  report.defined_c.assign(k, false);
  double acc = 0.0;
  std::size_t defined = 0;
  for (std::size_t c = 0; c < k; ++c) {
    SubsetSums s =
        accumulate(set, [&](std::size_t i) { return set.labels[i] == c; });
    if (s.count < 2 || s.sum_norms == 0.0) continue;
    report.omega_c[c] = omega_from_sums(s);
    report.defined_c[c] = true;
    acc += report.omega_c[c];
    ++defined;
  }
  if (defined == 0) {
    throw UndefinedMetricError(
        "class alignment undefined: no class has >= 2 members with nonzero "
        "norms");
  }
  report.omega_in_class = acc / static_cast<double>(defined);
  report.omega = alignment(set);
  return report;
}

AlignmentReport representation_alignment(const VectorSet& reps,
                                         std::size_t k) {
  return class_alignment(reps, k);
}

DiversityResult gradient_diversity(const VectorSet& set) {
  if (set.n < 1) throw std::invalid_argument("gradient_diversity needs n >= 1");
  SubsetSums s = accumulate(set, [](std::size_t) { return true; });
  double denom = dot(s.sum, s.sum);
  if (denom == 0.0) return {0.0, true};
  return {s.sum_sq_norms / denom, false};
}

namespace {

std::vector<double> row_squared_norms(const VectorSet& set) {
  std::vector<double> sq(set.n);
  for (std::size_t i = 0; i < set.n; ++i) sq[i] = dot(set.row(i), set.row(i));
  return sq;
}

// cos(v_i, v_j) via one square root of the product of squared norms; exact
// multiples like (g, 10g) then give exactly 1.0.
double cosine(const VectorSet& set, const std::vector<double>& sq,
              std::size_t i, std::size_t j) {
  return dot(set.row(i), set.row(j)) / std::sqrt(sq[i] * sq[j]);
}

}  // namespace

PairwiseStat cosine_stiffness(const VectorSet& set, std::size_t pair_budget,
                              Rng& rng) {
  if (set.n < 2) throw std::invalid_argument("cosine_stiffness needs n >= 2");
  std::vector<double> sq = row_squared_norms(set);
  PairwiseStat out;
  double acc = 0.0;
  std::size_t counted = 0;
  const std::size_t total_ordered = set.n * (set.n - 1);
  if (total_ordered <= pair_budget) {
    for (std::size_t i = 0; i < set.n; ++i) {
      for (std::size_t j = i + 1; j < set.n; ++j) {
        if (sq[i] == 0.0 || sq[j] == 0.0) {
          out.skipped += 2;
          continue;
        }
        acc += 2.0 * cosine(set, sq, i, j);
        counted += 2;
      }
    }
  } else {
    out.sampled = true;
    for (std::size_t p = 0; p < pair_budget; ++p) {
      std::size_t i = rng.uniform_index(set.n);
      std::size_t j = rng.uniform_index(set.n - 1);
      if (j >= i) ++j;
      if (sq[i] == 0.0 || sq[j] == 0.0) {
        ++out.skipped;
        continue;
      }
      acc += cosine(set, sq, i, j);
      ++counted;
    }
  }
  if (counted == 0) {
    throw UndefinedMetricError("cosine stiffness undefined: no nonzero pair");
  }
  out.value = acc / static_cast<double>(counted);
  return out;
}

PairwiseStat gradient_confusion(const VectorSet& set, std::size_t pair_budget,
                                Rng& rng) {
  if (set.n < 2) throw std::invalid_argument("gradient_confusion needs n >= 2");
  PairwiseStat out;
  double best = std::numeric_limits<double>::infinity();
  const std::size_t total_ordered = set.n * (set.n - 1);
  if (total_ordered <= pair_budget) {
    for (std::size_t i = 0; i < set.n; ++i) {
      for (std::size_t j = i + 1; j < set.n; ++j) {
        best = std::min(best, dot(set.row(i), set.row(j)));
      }
    }
  } else {
    out.sampled = true;
    for (std::size_t p = 0; p < pair_budget; ++p) {
      std::size_t i = rng.uniform_index(set.n);
      std::size_t j = rng.uniform_index(set.n - 1);
      if (j >= i) ++j;
      best = std::min(best, dot(set.row(i), set.row(j)));
    }
  }
  out.value = best;
  return out;
}

double nec(const VectorSet& grads) {
  if (grads.n < 1) throw std::invalid_argument("nec needs n >= 1");
  SubsetSums s = accumulate(grads, [](std::size_t) { return true; });
  Vector mean(grads.d);
  for (std::size_t j = 0; j < grads.d; ++j) {
    mean[j] = s.sum[j] / static_cast<double>(grads.n);
  }
  double mean_norm = norm(mean);
  if (mean_norm == 0.0) {
    throw UndefinedMetricError("nec undefined: zero mean gradient");
  }
  double acc = 0.0;
  Vector deviation(grads.d);
  for (std::size_t i = 0; i < grads.n; ++i) {
    auto v = grads.row(i);
    for (std::size_t j = 0; j < grads.d; ++j) deviation[j] = v[j] - mean[j];
    acc += dot(deviation, mean) / mean_norm;
  }
  return acc / static_cast<double>(grads.n) / mean_norm;
}

RademacherAlignment empirical_rademacher_alignment(const VectorSet& grads,
                                                   std::size_t num_sign_draws,
                                                   Rng& rng) {
  if (grads.n < 1) throw std::invalid_argument("er needs n >= 1");
  if (num_sign_draws < 1) {
    throw std::invalid_argument("er needs num_sign_draws >= 1");
  }
  SubsetSums s = accumulate(grads, [](std::size_t) { return true; });
  Vector mean(grads.d);
  for (std::size_t j = 0; j < grads.d; ++j) {
    mean[j] = s.sum[j] / static_cast<double>(grads.n);
  }
  double mean_sq = dot(mean, mean);
  if (mean_sq == 0.0) {
    throw UndefinedMetricError("er undefined: zero mean gradient");
  }
  // <sigma_i g_i, Ghat/||Ghat||> / ||Ghat|| = sigma_i <g_i, Ghat> / ||Ghat||^2
  std::vector<double> projections(grads.n);
  for (std::size_t i = 0; i < grads.n; ++i) {
    projections[i] = dot(grads.row(i), mean) / mean_sq;
  }
  const double scale = 1.0 / std::sqrt(static_cast<double>(grads.n));
  RademacherAlignment out;
  out.samples.resize(num_sign_draws);
  for (std::size_t t = 0; t < num_sign_draws; ++t) {
    double acc = 0.0;
    for (std::size_t i = 0; i < grads.n; ++i) {
      acc += rng.rademacher() * projections[i];
    }
    out.samples[t] = scale * acc;
    out.mean += out.samples[t];
  }
  out.mean /= static_cast<double>(num_sign_draws);
  if (num_sign_draws > 1) {
    double ss = 0.0;
    for (double x : out.samples) ss += (x - out.mean) * (x - out.mean);
    out.stddev = std::sqrt(ss / static_cast<double>(num_sign_draws - 1));
  }
  return out;
}

double grad_param_norm_ratio(const Matrix& layer_grad,
                             const Matrix& layer_weights) {
  if (!layer_grad.same_shape(layer_weights)) {
    throw ShapeError("grad_param_norm_ratio: shape mismatch");
  }
  double wn = frobenius_norm(layer_weights);
  if (wn == 0.0) {
    throw UndefinedMetricError("grad_param_norm_ratio undefined: zero weights");
  }
  return frobenius_norm(layer_grad) / wn;
}

}  // namespace alignscope
