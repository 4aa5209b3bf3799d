#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include "alignscope/matrix.hpp"
#include "alignscope/rng.hpp"

namespace alignscope {

// n vectors of dimension d, row-major, with optional class labels.
struct VectorSet {
  std::size_t n = 0;
  std::size_t d = 0;
  std::vector<double> data;          // n * d
  std::vector<std::size_t> labels;   // empty or n entries in {0..k-1}

  VectorSet() = default;
  VectorSet(std::size_t n_, std::size_t d_);
  VectorSet(std::size_t n_, std::size_t d_, std::vector<double> data_,
            std::vector<std::size_t> labels_ = {});

  std::span<const double> row(std::size_t i) const {
    return {data.data() + i * d, d};
  }
  std::span<double> row(std::size_t i) {
    return {data.data() + i * d, d};
  }
  bool has_labels() const { return !labels.empty(); }
};

struct AlignmentReport {
  double omega = 0.0;                   // whole-set alignment
  std::vector<double> omega_c;          // per class; meaningful iff defined_c
  std::vector<bool> defined_c;          // class has n_c >= 2 and nonzero norms
  double omega_in_class = 0.0;          // mean of the defined omega_c
};

// Omega = n (||sum v||^2 - sum ||v||^2) / ((n-1) (sum ||v||)^2), the O(n)
// form of the mean ordered-pair inner product over the squared mean norm.
double alignment(const VectorSet& set);

// Per-class alignment on the class-c subsets plus their mean. Classes with
// fewer than 2 members or an all-zero norm sum are flagged undefined and
// excluded from the mean; if no class qualifies, UndefinedMetricError.
AlignmentReport class_alignment(const VectorSet& set, std::size_t k);

// Identical formula applied to hidden representations.
AlignmentReport representation_alignment(const VectorSet& reps, std::size_t k);

struct DiversityResult {
  double value = 0.0;
  bool is_infinite = false;  // gradients summed to zero
};

// sum ||v_i||^2 / ||sum v_i||^2.
DiversityResult gradient_diversity(const VectorSet& set);

struct PairwiseStat {
  double value = 0.0;
  std::size_t skipped = 0;  // zero-vector pairs skipped (stiffness only)
  bool sampled = false;     // true when the pair budget forced sampling
};

// Mean cosine over ordered pairs i != j; sampled when n(n-1) > pair_budget.
PairwiseStat cosine_stiffness(const VectorSet& set, std::size_t pair_budget,
                              Rng& rng);

// min over pairs i != j of <v_i, v_j>.
PairwiseStat gradient_confusion(const VectorSet& set, std::size_t pair_budget,
                                Rng& rng);

// Normalized empirical covariance complexity, computed literally; the
// centered terms sum to zero so the value is round-off around 0.
double nec(const VectorSet& grads);

struct RademacherAlignment {
  double mean = 0.0;
  double stddev = 0.0;
  std::vector<double> samples;
};

// ER = [(1/sqrt(N)) sum_i <sigma_i g_i, Ghat/||Ghat||>] / ||Ghat||, evaluated
// over num_sign_draws independent Rademacher sign vectors.
RademacherAlignment empirical_rademacher_alignment(const VectorSet& grads,
                                                   std::size_t num_sign_draws,
                                                   Rng& rng);

// ||grad||_F / ||weights||_F.
double grad_param_norm_ratio(const Matrix& layer_grad,
                             const Matrix& layer_weights);

}  // namespace alignscope
