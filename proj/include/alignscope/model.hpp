#pragma once

#include <cstddef>
#include <vector>

#include "alignscope/matrix.hpp"

namespace alignscope {

enum class Activation { kSin, kRelu, kLinear, kSigmoid };

double apply_activation(Activation act, double x);
// Derivative w.r.t. the pre-activation. Relu derivative at exactly 0 is 0.
double activation_derivative(Activation act, double x);

struct Loss {
  enum class Kind { kSoftmaxCrossEntropy, kHinge, kSquared };
  Kind kind = Kind::kSoftmaxCrossEntropy;
  double temperature = 1.0;  // softmax
  double margin = 1.0;       // hinge

  static Loss softmax_ce(double temperature = 1.0);
  static Loss hinge(double margin = 1.0);
  static Loss squared();
};

// Feed-forward net z(x) = W_L phi(... phi(W_1 x)). The activation is applied
// after every layer except the last. Biases are optional (zero-initialized
// policy); when present there is one bias vector per layer.
struct ModelParams {
  std::vector<Matrix> weights;  // layer l maps dim weights[l].cols -> rows
  std::vector<Vector> biases;   // empty, or one per layer
  Activation activation = Activation::kSin;

  std::size_t num_layers() const { return weights.size(); }
  std::size_t input_dim() const { return weights.front().cols; }
  std::size_t output_dim() const { return weights.back().rows; }
  bool has_bias() const { return !biases.empty(); }

  // Throws ShapeError unless adjacent layer dimensions chain.
  void validate() const;
};

// Per-example intermediate state for a batch of n inputs.
struct ForwardTrace {
  // pre[l], post[l]: n x rows(l) for the hidden layers (post = phi(pre)).
  std::vector<Matrix> pre;
  std::vector<Matrix> post;
  Matrix logits;  // n x k

  // Hidden representation r_i = phi(W_1 x_i).
  const Matrix& representations() const { return post.front(); }
};

ForwardTrace forward(const ModelParams& params, const Matrix& inputs);

// Returns (loss, d loss / d logits) for one example. k >= 2, label < k.
std::pair<double, Vector> loss_and_logit_grad(const Loss& loss,
                                              std::span<const double> logits,
                                              std::size_t label);

struct PerExampleGrads {
  std::vector<double> losses;           // n
  Matrix logit_grads;                   // n x k
  // weight_grads[l][i]: gradient of example i's loss w.r.t. weights[l].
  std::vector<std::vector<Matrix>> weight_grads;
  // bias_grads[l]: n x rows(l); empty when the model has no biases.
  std::vector<Matrix> bias_grads;
  std::vector<std::size_t> labels;
};

PerExampleGrads per_example_backward(const ModelParams& params,
                                     const Matrix& inputs,
                                     const std::vector<std::size_t>& labels,
                                     const Loss& loss);

// Batch-mean gradients without materializing per-example copies; the trainer
// path. Means use fixed index order and equal the mean of per_example_backward.
struct MeanGrads {
  double mean_loss = 0.0;
  std::size_t correct = 0;  // argmax(logits) == label count
  std::vector<Matrix> weight_grads;
  std::vector<Vector> bias_grads;
};

MeanGrads mean_backward(const ModelParams& params, const Matrix& inputs,
                        const std::vector<std::size_t>& labels,
                        const Loss& loss);

// W_l <- W_l - lr_l * grad_l (and likewise biases). lr_l = 0 freezes layer l.
ModelParams sgd_step(const ModelParams& params,
                     const std::vector<Matrix>& mean_weight_grads,
                     const std::vector<Vector>& mean_bias_grads,
                     const std::vector<double>& lr_per_layer);

}  // namespace alignscope
