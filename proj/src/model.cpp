#include "alignscope/model.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

#include "alignscope/common.hpp"

namespace alignscope {

double apply_activation(Activation act, double x) {
  switch (act) {
    case Activation::kSin:
      return std::sin(x);
    case Activation::kRelu:
      return x > 0.0 ? x : 0.0;
    case Activation::kLinear:
      return x;
    case Activation::kSigmoid:
      return 1.0 / (1.0 + std::exp(-x));
  }
  throw std::invalid_argument("unknown activation");
}

double activation_derivative(Activation act, double x) {
  switch (act) {
    case Activation::kSin:
      return std::cos(x);
    case Activation::kRelu:
      return x > 0.0 ? 1.0 : 0.0;
    case Activation::kLinear:
      return 1.0;
    case Activation::kSigmoid: {
      double s = 1.0 / (1.0 + std::exp(-x));
      return s * (1.0 - s);
    }
  }
  throw std::invalid_argument("unknown activation");
}

Loss Loss::softmax_ce(double temperature) {
  if (!(temperature > 0.0)) {
    throw std::invalid_argument("softmax temperature must be > 0");
  }
  return Loss{Kind::kSoftmaxCrossEntropy, temperature, 1.0};
}

Loss Loss::hinge(double margin) {
  if (!(margin > 0.0)) throw std::invalid_argument("hinge margin must be > 0");
  return Loss{Kind::kHinge, 1.0, margin};
}

Loss Loss::squared() { return Loss{Kind::kSquared, 1.0, 1.0}; }

void ModelParams::validate() const {
  if (weights.empty()) throw ShapeError("model has no layers");
  for (std::size_t l = 1; l < weights.size(); ++l) {
    if (weights[l].cols != weights[l - 1].rows) {
      throw ShapeError("layer " + std::to_string(l) +
                       " input dim does not chain with previous layer");
    }
  }
  if (!biases.empty()) {
    if (biases.size() != weights.size()) {
      throw ShapeError("bias count does not match layer count");
    }
    for (std::size_t l = 0; l < weights.size(); ++l) {
      if (biases[l].size() != weights[l].rows) {
        throw ShapeError("bias " + std::to_string(l) + " has wrong dimension");
      }
    }
  }
}

ForwardTrace forward(const ModelParams& params, const Matrix& inputs) {
  params.validate();
  if (inputs.cols != params.input_dim()) {
    throw ShapeError("forward: input dimension " + std::to_string(inputs.cols) +
                     " != first layer fan-in " +
                     std::to_string(params.input_dim()));
  }
  const std::size_t n = inputs.rows;
  const std::size_t num_layers = params.num_layers();
  ForwardTrace trace;
  trace.pre.reserve(num_layers - 1);
  trace.post.reserve(num_layers - 1);

  const Matrix* layer_in = &inputs;
  for (std::size_t l = 0; l < num_layers; ++l) {
    const Matrix& w = params.weights[l];
    Matrix pre(n, w.rows);
    for (std::size_t i = 0; i < n; ++i) {
      matvec(w, layer_in->row(i), pre.row(i));
      if (params.has_bias()) {
        axpy(1.0, params.biases[l], pre.row(i));
      }
    }
    if (l + 1 == num_layers) {
      trace.logits = std::move(pre);
    } else {
      Matrix post(n, w.rows);
      for (std::size_t i = 0; i < pre.data.size(); ++i) {
        post.data[i] = apply_activation(params.activation, pre.data[i]);
      }
      trace.pre.push_back(std::move(pre));
      trace.post.push_back(std::move(post));
      layer_in = &trace.post.back();
    }
  }
  return trace;
}

std::pair<double, Vector> loss_and_logit_grad(const Loss& loss,
                                              std::span<const double> logits,
                                              std::size_t label) {
  const std::size_t k = logits.size();
  if (k < 2) throw std::invalid_argument("need at least 2 classes");
  if (label >= k) throw std::invalid_argument("label out of range");
  check_finite(logits, "logits");

  Vector grad(k, 0.0);
  switch (loss.kind) {
    case Loss::Kind::kSoftmaxCrossEntropy: {
      const double t = loss.temperature;
      double m = *std::max_element(logits.begin(), logits.end());
      double z = 0.0;
      for (std::size_t i = 0; i < k; ++i) z += std::exp((logits[i] - m) / t);
      for (std::size_t i = 0; i < k; ++i) {
        double p = std::exp((logits[i] - m) / t) / z;
        grad[i] = (p - (i == label ? 1.0 : 0.0)) / t;
      }
      double value = -(logits[label] - m) / t + std::log(z);
      return {value, grad};
    }
    case Loss::Kind::kHinge: {
      const double delta = loss.margin;
      double value = 0.0;
      double label_grad = 0.0;
      for (std::size_t i = 0; i < k; ++i) {
        if (i == label) continue;
        double slack = delta + logits[i] - logits[label];
        if (slack > 0.0) {
          value += slack;
          grad[i] = 1.0;
          label_grad -= 1.0;
        }
      }
      grad[label] = label_grad;
      return {value, grad};
    }
    case Loss::Kind::kSquared: {
      double value = 0.0;
      for (std::size_t i = 0; i < k; ++i) {
        double r = logits[i] - (i == label ? 1.0 : 0.0);
        grad[i] = r;
        value += 0.5 * r * r;
      }
      return {value, grad};
    }
  }
  throw std::invalid_argument("unknown loss kind");
}

namespace {

void check_batch(const Matrix& inputs, const std::vector<std::size_t>& labels) {
  if (inputs.rows == 0) throw ShapeError("empty batch");
  if (labels.size() != inputs.rows) {
    throw ShapeError("label count does not match batch size");
  }
}

// Backpropagates one example's logit gradient into per-layer deltas.
// deltas[l] is the gradient w.r.t. pre-activation of layer l.
void backprop_deltas(const ModelParams& params, const ForwardTrace& trace,
                     std::size_t example, const Vector& logit_grad,
                     std::vector<Vector>& deltas) {
  const std::size_t num_layers = params.num_layers();
  deltas.resize(num_layers);
  deltas[num_layers - 1] = logit_grad;
  for (std::size_t l = num_layers - 1; l > 0; --l) {
    const Matrix& w = params.weights[l];
    Vector& prev = deltas[l - 1];
    prev.assign(w.cols, 0.0);
    matvec_transposed(w, deltas[l], prev);
    auto pre = trace.pre[l - 1].row(example);
    for (std::size_t j = 0; j < prev.size(); ++j) {
      prev[j] *= activation_derivative(params.activation, pre[j]);
    }
  }
}

}  // namespace

PerExampleGrads per_example_backward(const ModelParams& params,
                                     const Matrix& inputs,
                                     const std::vector<std::size_t>& labels,
                                     const Loss& loss) {
  check_batch(inputs, labels);
  ForwardTrace trace = forward(params, inputs);
  const std::size_t n = inputs.rows;
  const std::size_t k = params.output_dim();
  const std::size_t num_layers = params.num_layers();

  PerExampleGrads out;
  out.losses.resize(n);
  out.logit_grads = Matrix(n, k);
  out.labels = labels;
  out.weight_grads.resize(num_layers);
  for (std::size_t l = 0; l < num_layers; ++l) {
    out.weight_grads[l].reserve(n);
  }
  if (params.has_bias()) {
    out.bias_grads.resize(num_layers);
    for (std::size_t l = 0; l < num_layers; ++l) {
      out.bias_grads[l] = Matrix(n, params.weights[l].rows);
    }
  }

  std::vector<Vector> deltas;
  for (std::size_t i = 0; i < n; ++i) {
    auto [value, logit_grad] = loss_and_logit_grad(loss, trace.logits.row(i),
                                                   labels[i]);
    if (!std::isfinite(value)) {
      throw NumericError("non-finite loss at example " + std::to_string(i));
    }
    out.losses[i] = value;
    std::copy(logit_grad.begin(), logit_grad.end(),
              out.logit_grads.row(i).begin());

    backprop_deltas(params, trace, i, logit_grad, deltas);
    for (std::size_t l = 0; l < num_layers; ++l) {
      const std::size_t rows = params.weights[l].rows;
      const std::size_t cols = params.weights[l].cols;
      auto layer_in = (l == 0) ? inputs.row(i) : trace.post[l - 1].row(i);
      Matrix g(rows, cols);
      for (std::size_t r = 0; r < rows; ++r) {
        const double dr = deltas[l][r];
        double* grow = g.data.data() + r * cols;
        for (std::size_t c = 0; c < cols; ++c) grow[c] = dr * layer_in[c];
      }
      check_finite(g, ("weight gradient, example " + std::to_string(i)).c_str());
      out.weight_grads[l].push_back(std::move(g));
      if (params.has_bias()) {
        std::copy(deltas[l].begin(), deltas[l].end(),
                  out.bias_grads[l].row(i).begin());
      }
    }
  }
  return out;
}

MeanGrads mean_backward(const ModelParams& params, const Matrix& inputs,
                        const std::vector<std::size_t>& labels,
                        const Loss& loss) {
  check_batch(inputs, labels);
  ForwardTrace trace = forward(params, inputs);
  const std::size_t n = inputs.rows;
  const std::size_t num_layers = params.num_layers();

  MeanGrads out;
  out.weight_grads.reserve(num_layers);
  for (std::size_t l = 0; l < num_layers; ++l) {
    out.weight_grads.emplace_back(params.weights[l].rows,
                                  params.weights[l].cols);
  }
  if (params.has_bias()) {
    for (std::size_t l = 0; l < num_layers; ++l) {
      out.bias_grads.emplace_back(params.weights[l].rows, 0.0);
    }
  }

  std::vector<Vector> deltas;
  for (std::size_t i = 0; i < n; ++i) {
    auto logits = trace.logits.row(i);
    auto [value, logit_grad] = loss_and_logit_grad(loss, logits, labels[i]);
    if (!std::isfinite(value)) {
      throw NumericError("non-finite loss at example " + std::to_string(i));
    }
    out.mean_loss += value;
    std::size_t argmax =
        std::max_element(logits.begin(), logits.end()) - logits.begin();
    if (argmax == labels[i]) ++out.correct;

    backprop_deltas(params, trace, i, logit_grad, deltas);
    for (std::size_t l = 0; l < num_layers; ++l) {
      const std::size_t rows = params.weights[l].rows;
      const std::size_t cols = params.weights[l].cols;
      auto layer_in = (l == 0) ? inputs.row(i) : trace.post[l - 1].row(i);
      Matrix& g = out.weight_grads[l];
      for (std::size_t r = 0; r < rows; ++r) {
        const double dr = deltas[l][r];
        if (dr == 0.0) continue;
        double* grow = g.data.data() + r * cols;
        for (std::size_t c = 0; c < cols; ++c) grow[c] += dr * layer_in[c];
      }
      if (params.has_bias()) {
        axpy(1.0, deltas[l], out.bias_grads[l]);
      }
    }
  }

  const double inv_n = 1.0 / static_cast<double>(n);
  out.mean_loss *= inv_n;
  for (auto& g : out.weight_grads) {
    for (double& x : g.data) x *= inv_n;
    check_finite(g, "mean weight gradient");
  }
  for (auto& b : out.bias_grads) {
    for (double& x : b) x *= inv_n;
  }
  return out;
}

ModelParams sgd_step(const ModelParams& params,
                     const std::vector<Matrix>& mean_weight_grads,
                     const std::vector<Vector>& mean_bias_grads,
                     const std::vector<double>& lr_per_layer) {
  const std::size_t num_layers = params.num_layers();
  if (mean_weight_grads.size() != num_layers ||
      lr_per_layer.size() != num_layers) {
    throw ShapeError("sgd_step: gradient/lr count does not match layer count");
  }
  ModelParams next = params;
  for (std::size_t l = 0; l < num_layers; ++l) {
    if (!params.weights[l].same_shape(mean_weight_grads[l])) {
      throw ShapeError("sgd_step: gradient shape mismatch at layer " +
                       std::to_string(l));
    }
    const double lr = lr_per_layer[l];
    if (lr < 0.0) throw std::invalid_argument("negative learning rate");
    if (lr == 0.0) continue;  // frozen layer: weights stay bit-identical
    for (std::size_t i = 0; i < next.weights[l].data.size(); ++i) {
      next.weights[l].data[i] -= lr * mean_weight_grads[l].data[i];
    }
    if (params.has_bias()) {
      if (mean_bias_grads.size() != num_layers ||
          mean_bias_grads[l].size() != next.biases[l].size()) {
        throw ShapeError("sgd_step: bias gradient shape mismatch");
      }
      for (std::size_t i = 0; i < next.biases[l].size(); ++i) {
        next.biases[l][i] -= lr * mean_bias_grads[l][i];
      }
    }
  }
  return next;
}

}  // namespace alignscope
