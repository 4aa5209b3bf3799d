#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <vector>

#include "alignscope/common.hpp"
#include "alignscope/model.hpp"
#include "alignscope/rng.hpp"

using namespace alignscope;

namespace {

ModelParams random_model(const std::vector<std::size_t>& dims, Activation act,
                         bool bias, Rng& rng) {
  ModelParams params;
  params.activation = act;
  for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
    params.weights.push_back(init_gaussian(dims[l + 1], dims[l], 0.7, rng));
  }
  if (bias) {
    for (const auto& w : params.weights) {
      Vector b(w.rows);
      for (double& x : b) x = 0.1 * rng.gaussian();
      params.biases.push_back(std::move(b));
    }
  }
  return params;
}

double batch_mean_loss(const ModelParams& params, const Matrix& inputs,
                       const std::vector<std::size_t>& labels,
                       const Loss& loss) {
  ForwardTrace trace = forward(params, inputs);
  double acc = 0.0;
  for (std::size_t i = 0; i < inputs.rows; ++i) {
    acc += loss_and_logit_grad(loss, trace.logits.row(i), labels[i]).first;
  }
  return acc / static_cast<double>(inputs.rows);
}

// Central finite differences on the mean loss, one parameter at a time.
double fd_weight_grad(ModelParams params, std::size_t layer, std::size_t idx,
                      const Matrix& inputs,
                      const std::vector<std::size_t>& labels, const Loss& loss,
                      double step) {
  const double saved = params.weights[layer].data[idx];
  params.weights[layer].data[idx] = saved + step;
  double plus = batch_mean_loss(params, inputs, labels, loss);
  params.weights[layer].data[idx] = saved - step;
  double minus = batch_mean_loss(params, inputs, labels, loss);
  return (plus - minus) / (2.0 * step);
}

double fd_bias_grad(ModelParams params, std::size_t layer, std::size_t idx,
                    const Matrix& inputs,
                    const std::vector<std::size_t>& labels, const Loss& loss,
                    double step) {
  const double saved = params.biases[layer][idx];
  params.biases[layer][idx] = saved + step;
  double plus = batch_mean_loss(params, inputs, labels, loss);
  params.biases[layer][idx] = saved - step;
  double minus = batch_mean_loss(params, inputs, labels, loss);
  return (plus - minus) / (2.0 * step);
}

}  // namespace

TEST_CASE("activations and derivatives at reference points") {
  CHECK(apply_activation(Activation::kSin, 0.0) == doctest::Approx(0.0));
  CHECK(apply_activation(Activation::kSin, M_PI / 2) == doctest::Approx(1.0));
  CHECK(activation_derivative(Activation::kSin, 0.0) == doctest::Approx(1.0));
  CHECK(apply_activation(Activation::kRelu, -2.0) == 0.0);
  CHECK(apply_activation(Activation::kRelu, 3.0) == 3.0);
  CHECK(activation_derivative(Activation::kRelu, 0.0) == 0.0);
  CHECK(activation_derivative(Activation::kRelu, 1e-9) == 1.0);
  CHECK(apply_activation(Activation::kLinear, 1.5) == 1.5);
  CHECK(activation_derivative(Activation::kLinear, -7.0) == 1.0);
  CHECK(apply_activation(Activation::kSigmoid, 0.0) == doctest::Approx(0.5));
  CHECK(activation_derivative(Activation::kSigmoid, 0.0) ==
        doctest::Approx(0.25));
}

TEST_CASE("loss factories validate parameters") {
  CHECK_THROWS_AS(Loss::softmax_ce(0.0), std::invalid_argument);
  CHECK_THROWS_AS(Loss::softmax_ce(-1.0), std::invalid_argument);
  CHECK_THROWS_AS(Loss::hinge(0.0), std::invalid_argument);
}

TEST_CASE("softmax value and gradient at zero logits") {
  for (std::size_t k : {2, 3, 10}) {
    Vector logits(k, 0.0);
    auto [value, grad] = loss_and_logit_grad(Loss::softmax_ce(), logits, 0);
    CHECK(value == doctest::Approx(std::log(static_cast<double>(k))));
    CHECK(grad[0] == 1.0 / static_cast<double>(k) - 1.0);
    for (std::size_t i = 1; i < k; ++i) {
      CHECK(grad[i] == 1.0 / static_cast<double>(k));
    }
  }
}

TEST_CASE("softmax gradient sums to zero and is shift-invariant") {
  Rng rng(1);
  for (int rep = 0; rep < 50; ++rep) {
    Vector logits(5);
    for (double& x : logits) x = rng.uniform(-30.0, 30.0);
    auto [v1, g1] = loss_and_logit_grad(Loss::softmax_ce(2.0), logits, 2);
    double sum = 0.0;
    for (double g : g1) sum += g;
    CHECK(std::abs(sum) < 1e-12);
    Vector shifted = logits;
    for (double& x : shifted) x += 500.0;
    auto [v2, g2] = loss_and_logit_grad(Loss::softmax_ce(2.0), shifted, 2);
    CHECK(v2 == doctest::Approx(v1).epsilon(1e-10));
    for (std::size_t i = 0; i < 5; ++i) {
      CHECK(g2[i] == doctest::Approx(g1[i]).epsilon(1e-10));
    }
  }
}

TEST_CASE("softmax is stable under huge logits") {
  Vector logits = {1e8, -1e8, 0.0};
  auto [value, grad] = loss_and_logit_grad(Loss::softmax_ce(), logits, 1);
  CHECK(std::isfinite(value));
  CHECK(grad[0] == doctest::Approx(1.0));
  CHECK(grad[1] == doctest::Approx(-1.0));
  CHECK(grad[2] == doctest::Approx(0.0));
}

TEST_CASE("softmax temperature identity grad(z,T) = grad(z/T,1)/T") {
  Rng rng(2);
  for (double t : {0.5, 2.0, 7.0}) {
    for (int rep = 0; rep < 20; ++rep) {
      Vector logits(4);
      for (double& x : logits) x = rng.uniform(-3.0, 3.0);
      auto [v1, g1] = loss_and_logit_grad(Loss::softmax_ce(t), logits, 1);
      Vector scaled = logits;
      for (double& x : scaled) x /= t;
      auto [v2, g2] = loss_and_logit_grad(Loss::softmax_ce(1.0), scaled, 1);
      for (std::size_t i = 0; i < 4; ++i) {
        CHECK(std::abs(g1[i] - g2[i] / t) < 1e-12);
      }
    }
  }
}

TEST_CASE("hinge value, strict inequality, and scale identity") {
  Vector logits = {2.0, 1.0, 0.0};
  auto [value, grad] = loss_and_logit_grad(Loss::hinge(1.0), logits, 0);
  // slack for class 1: 1 + 1 - 2 = 0, not > 0, so no contribution.
  CHECK(value == doctest::Approx(0.0));
  CHECK(grad[1] == 0.0);
  CHECK(grad[0] == 0.0);

  Rng rng(3);
  for (int rep = 0; rep < 50; ++rep) {
    Vector z(5);
    for (double& x : z) x = rng.uniform(-2.0, 2.0);
    double alpha = rng.uniform(0.2, 4.0);
    double delta = rng.uniform(0.2, 2.0);
    Vector az = z;
    for (double& x : az) x *= alpha;
    double lhs = loss_and_logit_grad(Loss::hinge(delta), az, 2).first;
    double rhs =
        alpha * loss_and_logit_grad(Loss::hinge(delta / alpha), z, 2).first;
    CHECK(std::abs(lhs - rhs) < 1e-12 * (1.0 + std::abs(lhs)));
  }
}

TEST_CASE("squared loss against one-hot target") {
  Vector logits = {1.0, 0.0, 0.0};
  auto [value, grad] = loss_and_logit_grad(Loss::squared(), logits, 0);
  CHECK(value == doctest::Approx(0.0));
  auto [v2, g2] = loss_and_logit_grad(Loss::squared(), logits, 1);
  CHECK(v2 == doctest::Approx(0.5 * (1.0 + 1.0)));
  CHECK(g2[0] == doctest::Approx(1.0));
  CHECK(g2[1] == doctest::Approx(-1.0));
  CHECK(g2[2] == doctest::Approx(0.0));
}

TEST_CASE("loss preconditions") {
  Vector one = {1.0};
  CHECK_THROWS_AS(loss_and_logit_grad(Loss::squared(), one, 0),
                  std::invalid_argument);
  Vector three = {1.0, 2.0, 3.0};
  CHECK_THROWS_AS(loss_and_logit_grad(Loss::squared(), three, 3),
                  std::invalid_argument);
}

TEST_CASE("forward on a hand-computed tiny network") {
  ModelParams params;
  params.activation = Activation::kLinear;
  params.weights.push_back(Matrix(2, 2, {1.0, 0.0, 0.0, 2.0}));
  params.weights.push_back(Matrix(2, 2, {1.0, 1.0, 0.0, 1.0}));
  Matrix inputs(1, 2, {3.0, 4.0});
  ForwardTrace trace = forward(params, inputs);
  CHECK(trace.representations().at(0, 0) == doctest::Approx(3.0));
  CHECK(trace.representations().at(0, 1) == doctest::Approx(8.0));
  CHECK(trace.logits.at(0, 0) == doctest::Approx(11.0));
  CHECK(trace.logits.at(0, 1) == doctest::Approx(8.0));
}

TEST_CASE("validate rejects mismatched layer chains") {
  ModelParams params;
  params.weights.push_back(Matrix(4, 3));
  params.weights.push_back(Matrix(2, 5));
  CHECK_THROWS_AS(params.validate(), ShapeError);
}

TEST_CASE("backprop matches central finite differences") {
  Rng rng(10);
  const std::vector<Activation> acts = {Activation::kSin, Activation::kRelu,
                                        Activation::kLinear,
                                        Activation::kSigmoid};
  const std::vector<Loss> losses = {Loss::softmax_ce(1.0), Loss::softmax_ce(3.0),
                                    Loss::hinge(1.0), Loss::squared()};
  int checked = 0;
  for (int rep = 0; rep < 24; ++rep) {
    Activation act = acts[rep % acts.size()];
    const Loss& loss = losses[(rep / 4) % losses.size()];
    bool bias = (rep % 2) == 0;
    bool deep = (rep % 3) == 0;
    std::vector<std::size_t> dims =
        deep ? std::vector<std::size_t>{3, 5, 4, 3}
             : std::vector<std::size_t>{4, 6, 3};
    ModelParams params = random_model(dims, act, bias, rng);
    const std::size_t n = 3;
    Matrix inputs(n, dims.front());
    std::vector<std::size_t> labels(n);
    for (double& x : inputs.data) x = rng.uniform(-1.0, 1.0);
    for (auto& l : labels) l = rng.uniform_index(dims.back());

    MeanGrads grads = mean_backward(params, inputs, labels, loss);
    const double step = 1e-5;
    for (std::size_t l = 0; l < params.num_layers(); ++l) {
      for (int probe = 0; probe < 4; ++probe) {
        std::size_t idx = rng.uniform_index(params.weights[l].data.size());
        double analytic = grads.weight_grads[l].data[idx];
        double numeric =
            fd_weight_grad(params, l, idx, inputs, labels, loss, step);
        double denom = std::max({std::abs(analytic), std::abs(numeric), 1e-4});
        CHECK(std::abs(analytic - numeric) / denom < 1e-5);
        ++checked;
      }
      if (bias) {
        std::size_t idx = rng.uniform_index(params.biases[l].size());
        double analytic = grads.bias_grads[l][idx];
        double numeric =
            fd_bias_grad(params, l, idx, inputs, labels, loss, step);
        double denom = std::max({std::abs(analytic), std::abs(numeric), 1e-4});
        CHECK(std::abs(analytic - numeric) / denom < 1e-5);
        ++checked;
      }
    }
  }
  CHECK(checked > 200);
}

TEST_CASE("mean_backward equals the mean of per_example_backward") {
  Rng rng(11);
  ModelParams params =
      random_model({4, 8, 3}, Activation::kSin, /*bias=*/true, rng);
  const std::size_t n = 7;
  Matrix inputs(n, 4);
  std::vector<std::size_t> labels(n);
  for (double& x : inputs.data) x = rng.uniform(-1.0, 1.0);
  for (auto& l : labels) l = rng.uniform_index(3);
  const Loss loss = Loss::softmax_ce();

  MeanGrads mean = mean_backward(params, inputs, labels, loss);
  PerExampleGrads per = per_example_backward(params, inputs, labels, loss);

  double loss_sum = 0.0;
  for (double v : per.losses) loss_sum += v;
  CHECK(mean.mean_loss == doctest::Approx(loss_sum / n).epsilon(1e-12));

  for (std::size_t l = 0; l < params.num_layers(); ++l) {
    Matrix acc(params.weights[l].rows, params.weights[l].cols);
    for (std::size_t i = 0; i < n; ++i) {
      axpy(1.0, per.weight_grads[l][i].data, acc.data);
    }
    for (std::size_t j = 0; j < acc.data.size(); ++j) {
      CHECK(std::abs(mean.weight_grads[l].data[j] - acc.data[j] / n) < 1e-12);
    }
    Vector bias_acc(params.weights[l].rows, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
      axpy(1.0, per.bias_grads[l].row(i), bias_acc);
    }
    for (std::size_t j = 0; j < bias_acc.size(); ++j) {
      CHECK(std::abs(mean.bias_grads[l][j] - bias_acc[j] / n) < 1e-12);
    }
  }
}

TEST_CASE("sgd_step updates and lr=0 freezes bit-identically") {
  Rng rng(12);
  ModelParams params =
      random_model({3, 4, 2}, Activation::kRelu, /*bias=*/false, rng);
  std::vector<Matrix> grads;
  for (const auto& w : params.weights) {
    Matrix g(w.rows, w.cols);
    for (double& x : g.data) x = rng.uniform(-1.0, 1.0);
    grads.push_back(std::move(g));
  }
  ModelParams next = sgd_step(params, grads, {}, {0.0, 0.5});
  CHECK(next.weights[0].data == params.weights[0].data);
  for (std::size_t j = 0; j < next.weights[1].data.size(); ++j) {
    CHECK(next.weights[1].data[j] ==
          doctest::Approx(params.weights[1].data[j] - 0.5 * grads[1].data[j]));
  }
  CHECK_THROWS_AS(sgd_step(params, grads, {}, {0.1, -0.1}),
                  std::invalid_argument);
}

TEST_CASE("per_example_backward flags non-finite logits with the example") {
  ModelParams params;
  params.activation = Activation::kLinear;
  params.weights.push_back(Matrix(2, 2, {1e200, 0.0, 0.0, 1e200}));
  params.weights.push_back(Matrix(2, 2, {1e200, 0.0, 0.0, 1e200}));
  Matrix inputs(1, 2, {1e200, 1e200});
  CHECK_THROWS_AS(
      per_example_backward(params, inputs, {0}, Loss::squared()), NumericError);
}
