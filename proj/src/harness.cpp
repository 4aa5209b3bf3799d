#include "alignscope/harness.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "alignscope/common.hpp"
#include "alignscope/metrics.hpp"

namespace alignscope {
namespace {

using nlohmann::json;

std::string activation_name(Activation act) {
  switch (act) {
    case Activation::kSin: return "sin";
    case Activation::kRelu: return "relu";
    case Activation::kLinear: return "linear";
    case Activation::kSigmoid: return "sigmoid";
  }
  throw std::logic_error("unreachable");
}

Activation parse_activation(const std::string& name) {
  if (name == "sin") return Activation::kSin;
  if (name == "relu") return Activation::kRelu;
  if (name == "linear") return Activation::kLinear;
  if (name == "sigmoid") return Activation::kSigmoid;
  throw FormatError("config: unknown activation '" + name + "'");
}

std::string loss_name(const Loss& loss) {
  switch (loss.kind) {
    case Loss::Kind::kSoftmaxCrossEntropy: return "softmax_ce";
    case Loss::Kind::kHinge: return "hinge";
    case Loss::Kind::kSquared: return "squared";
  }
  throw std::logic_error("unreachable");
}

template <typename T>
std::string join_list(const std::vector<T>& xs) {
  std::ostringstream out;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    if (i) out << ',';
    out << xs[i];
  }
  return out.str();
}

std::vector<std::string> split_list(const std::string& text) {
  std::vector<std::string> out;
  std::string item;
  std::istringstream in(text);
  while (std::getline(in, item, ',')) {
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

std::string format_double(double x) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", x);
  return buf;
}

std::string format_cell(const std::optional<double>& x) {
  return x ? format_double(*x) : std::string();
}

}  // namespace

void RunConfig::validate() const {
  if (dataset != "blobs" && dataset != "cifar10") {
    throw FormatError("config: dataset must be 'blobs' or 'cifar10'");
  }
  if (num_classes < 2) throw FormatError("config: num_classes must be >= 2");
  if (dataset == "blobs" && (train_per_class == 0 || input_dim == 0)) {
    throw FormatError("config: blobs need train_per_class and input_dim >= 1");
  }
  if (dataset == "cifar10" && (cifar_train.empty() || cifar_test.empty())) {
    throw FormatError("config: cifar10 needs cifar_train and cifar_test paths");
  }
  if (hidden_sizes.empty()) {
    throw FormatError("config: at least one hidden layer");
  }
  for (std::size_t h : hidden_sizes) {
    if (h == 0) throw FormatError("config: hidden sizes must be >= 1");
  }
  if (!(shuffle_fraction >= 0.0 && shuffle_fraction <= 1.0)) {
    throw FormatError("config: shuffle_fraction must be in [0, 1]");
  }
  if (!(sigma >= 0.0) || !std::isfinite(sigma)) {
    throw FormatError("config: sigma must be finite and >= 0");
  }
  if (!(lr >= 0.0) || !std::isfinite(lr)) {
    throw FormatError("config: lr must be finite and >= 0");
  }
  const std::size_t layers = hidden_sizes.size() + 1;
  if (!lr_multipliers.empty() && lr_multipliers.size() != layers) {
    throw FormatError("config: lr_multipliers must have one entry per layer (" +
                      std::to_string(layers) + ")");
  }
  if (batch_size == 0) throw FormatError("config: batch_size must be >= 1");
  if (metric_cadence == 0) {
    throw FormatError("config: metric_cadence must be >= 1");
  }
  if (metric_sample < 2) {
    throw FormatError("config: metric_sample must be >= 2");
  }
  if (er_draws < 2) throw FormatError("config: er_draws must be >= 2");
}

RunConfig parse_run_config(const std::string& json_text) {
  json doc;
  try {
    doc = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw FormatError(std::string("config: ") + e.what());
  }
  if (!doc.is_object()) throw FormatError("config: top level must be an object");

  RunConfig cfg;
  auto get = [&doc](const char* key, auto& out) {
    if (!doc.contains(key)) return;
    try {
      out = doc.at(key).get<std::decay_t<decltype(out)>>();
    } catch (const json::exception& e) {
      throw FormatError(std::string("config: field '") + key + "': " + e.what());
    }
  };

  get("dataset", cfg.dataset);
  get("num_classes", cfg.num_classes);
  get("train_per_class", cfg.train_per_class);
  get("test_per_class", cfg.test_per_class);
  get("input_dim", cfg.input_dim);
  get("center_scale", cfg.center_scale);
  get("noise", cfg.noise);
  get("shuffle_fraction", cfg.shuffle_fraction);
  get("cifar_train", cfg.cifar_train);
  get("cifar_test", cfg.cifar_test);
  get("cifar_subset", cfg.cifar_subset);

  if (doc.contains("hidden_sizes")) {
    std::string text;
    get("hidden_sizes", text);
    cfg.hidden_sizes.clear();
    for (const auto& item : split_list(text)) {
      long v = 0;
      try {
        v = std::stol(item);
      } catch (const std::exception&) {
        throw FormatError("config: field 'hidden_sizes': bad entry '" + item +
                          "'");
      }
      if (v < 1) throw FormatError("config: hidden sizes must be >= 1");
      cfg.hidden_sizes.push_back(static_cast<std::size_t>(v));
    }
  }
  if (doc.contains("activation")) {
    std::string name;
    get("activation", name);
    cfg.activation = parse_activation(name);
  }
  get("bias", cfg.bias);

  std::string loss_kind = loss_name(cfg.loss);
  double temperature = cfg.loss.temperature;
  double margin = cfg.loss.margin;
  get("loss", loss_kind);
  get("temperature", temperature);
  get("margin", margin);
  try {
    if (loss_kind == "softmax_ce") {
      cfg.loss = Loss::softmax_ce(temperature);
    } else if (loss_kind == "hinge") {
      cfg.loss = Loss::hinge(margin);
    } else if (loss_kind == "squared") {
      cfg.loss = Loss::squared();
    } else {
      throw FormatError("config: unknown loss '" + loss_kind + "'");
    }
  } catch (const std::invalid_argument& e) {
    throw FormatError(std::string("config: ") + e.what());
  }

  get("sigma", cfg.sigma);
  get("lr", cfg.lr);
  if (doc.contains("lr_multipliers")) {
    std::string text;
    get("lr_multipliers", text);
    cfg.lr_multipliers.clear();
    for (const auto& item : split_list(text)) {
      try {
        cfg.lr_multipliers.push_back(std::stod(item));
      } catch (const std::exception&) {
        throw FormatError("config: field 'lr_multipliers': bad entry '" + item +
                          "'");
      }
    }
  }
  get("batch_size", cfg.batch_size);
  get("max_steps", cfg.max_steps);
  get("metric_cadence", cfg.metric_cadence);
  get("metric_sample", cfg.metric_sample);
  get("pair_budget", cfg.pair_budget);
  get("er_draws", cfg.er_draws);
  get("stop_at_perfect", cfg.stop_at_perfect);
  get("seed", cfg.seed);
  get("csv_out", cfg.csv_out);
  get("config_out", cfg.config_out);

  cfg.validate();
  return cfg;
}

RunConfig load_run_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("config: cannot open " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_run_config(buf.str());
}

std::string serialize_run_config(const RunConfig& cfg) {
  json doc;
  doc["dataset"] = cfg.dataset;
  doc["num_classes"] = cfg.num_classes;
  doc["train_per_class"] = cfg.train_per_class;
  doc["test_per_class"] = cfg.test_per_class;
  doc["input_dim"] = cfg.input_dim;
  doc["center_scale"] = cfg.center_scale;
  doc["noise"] = cfg.noise;
  doc["shuffle_fraction"] = cfg.shuffle_fraction;
  doc["cifar_train"] = cfg.cifar_train;
  doc["cifar_test"] = cfg.cifar_test;
  doc["cifar_subset"] = cfg.cifar_subset;
  doc["hidden_sizes"] = join_list(cfg.hidden_sizes);
  doc["activation"] = activation_name(cfg.activation);
  doc["bias"] = cfg.bias;
  doc["loss"] = loss_name(cfg.loss);
  doc["temperature"] = cfg.loss.temperature;
  doc["margin"] = cfg.loss.margin;
  doc["sigma"] = cfg.sigma;
  doc["lr"] = cfg.lr;
  doc["lr_multipliers"] = join_list(cfg.lr_multipliers);
  doc["batch_size"] = cfg.batch_size;
  doc["max_steps"] = cfg.max_steps;
  doc["metric_cadence"] = cfg.metric_cadence;
  doc["metric_sample"] = cfg.metric_sample;
  doc["pair_budget"] = cfg.pair_budget;
  doc["er_draws"] = cfg.er_draws;
  doc["stop_at_perfect"] = cfg.stop_at_perfect;
  doc["seed"] = cfg.seed;
  doc["csv_out"] = cfg.csv_out;
  doc["config_out"] = cfg.config_out;
  return doc.dump(2) + "\n";
}

std::string metric_csv_header() {
  return "# alignscope metrics csv v1\n"
         "step,train_loss,train_acc,test_acc,"
         "omega_inclass_grad_hidden,omega_inclass_grad_top,"
         "omega_inclass_grad_logit,omega_inclass_grad_whole,"
         "omega_inclass_rep,diversity,stiffness,confusion,"
         "grad_w1_over_w1,nec,er_mean,er_std\n";
}

std::string metric_csv_row(const MetricRecord& r) {
  std::ostringstream out;
  out << r.step << ',' << format_double(r.train_loss) << ','
      << format_double(r.train_acc) << ',' << format_double(r.test_acc) << ','
      << format_cell(r.omega_inclass_grad_hidden) << ','
      << format_cell(r.omega_inclass_grad_top) << ','
      << format_cell(r.omega_inclass_grad_logit) << ','
      << format_cell(r.omega_inclass_grad_whole) << ','
      << format_cell(r.omega_inclass_rep) << ',' << format_cell(r.diversity)
      << ',' << format_cell(r.stiffness) << ',' << format_cell(r.confusion)
      << ',' << format_double(r.grad_w1_over_w1) << ','
      << format_cell(r.nec_value) << ',' << format_cell(r.er_mean) << ','
      << format_cell(r.er_std) << '\n';
  return out.str();
}

namespace {

struct DataBundle {
  Dataset train;
  Dataset test;
};

DataBundle build_data(const RunConfig& cfg, Rng& root) {
  DataBundle data;
  Rng data_rng = root.child("data");
  if (cfg.dataset == "blobs") {
    Dataset all = synth_blobs(cfg.num_classes,
                              cfg.train_per_class + cfg.test_per_class,
                              cfg.input_dim, cfg.center_scale, cfg.noise,
                              data_rng);
    const std::size_t per = cfg.train_per_class + cfg.test_per_class;
    std::vector<std::size_t> train_idx;
    std::vector<std::size_t> test_idx;
    for (std::size_t c = 0; c < cfg.num_classes; ++c) {
      for (std::size_t s = 0; s < per; ++s) {
        (s < cfg.train_per_class ? train_idx : test_idx).push_back(c * per + s);
      }
    }
    auto take = [&all](const std::vector<std::size_t>& idx) {
      Dataset out;
      out.num_classes = all.num_classes;
      out.inputs = Matrix(idx.size(), all.dim());
      out.labels.resize(idx.size());
      for (std::size_t i = 0; i < idx.size(); ++i) {
        auto src = all.inputs.row(idx[i]);
        std::copy(src.begin(), src.end(), out.inputs.row(i).begin());
        out.labels[i] = all.labels[idx[i]];
      }
      return out;
    };
    data.train = take(train_idx);
    data.test = take(test_idx);
  } else {
    auto [train, test] = load_cifar10(split_list(cfg.cifar_train),
                                      cfg.cifar_test, cfg.cifar_subset,
                                      data_rng);
    data.train = std::move(train);
    data.test = std::move(test);
  }
  data.train.split = "train";
  data.test.split = "test";
  if (cfg.shuffle_fraction > 0.0) {
    Rng shuffle_rng = root.child("label_shuffle");
    data.train = shuffle_labels(data.train, cfg.shuffle_fraction, shuffle_rng);
  }
  return data;
}

ModelParams build_model(const RunConfig& cfg, std::size_t input_dim,
                        Rng& root) {
  Rng init_rng = root.child("init");
  std::vector<std::size_t> dims;
  dims.push_back(input_dim);
  for (std::size_t h : cfg.hidden_sizes) dims.push_back(h);
  dims.push_back(cfg.num_classes);

  ModelParams params;
  params.activation = cfg.activation;
  for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
    Rng layer_rng = init_rng.child("w" + std::to_string(l + 1));
    if (l == 0) {
      params.weights.push_back(
          init_gaussian(dims[l + 1], dims[l], cfg.sigma, layer_rng));
    } else {
      params.weights.push_back(
          init_glorot_uniform(dims[l + 1], dims[l], layer_rng));
    }
  }
  if (cfg.bias) {
    for (const auto& w : params.weights) {
      params.biases.emplace_back(w.rows, 0.0);
    }
  }
  params.validate();
  return params;
}

struct EvalStats {
  double mean_loss = 0.0;
  double acc = 0.0;
};

EvalStats evaluate(const ModelParams& params, const Loss& loss,
                   const Dataset& ds) {
  constexpr std::size_t kChunk = 512;
  EvalStats stats;
  std::size_t correct = 0;
  for (std::size_t start = 0; start < ds.size(); start += kChunk) {
    const std::size_t count = std::min(kChunk, ds.size() - start);
    Matrix chunk(count, ds.dim());
    std::copy(ds.inputs.data.begin() + start * ds.dim(),
              ds.inputs.data.begin() + (start + count) * ds.dim(),
              chunk.data.begin());
    ForwardTrace trace = forward(params, chunk);
    for (std::size_t i = 0; i < count; ++i) {
      auto logits = trace.logits.row(i);
      const std::size_t label = ds.labels[start + i];
      stats.mean_loss += loss_and_logit_grad(loss, logits, label).first;
      std::size_t arg = 0;
      for (std::size_t j = 1; j < logits.size(); ++j) {
        if (logits[j] > logits[arg]) arg = j;
      }
      if (arg == label) ++correct;
    }
  }
  stats.mean_loss /= static_cast<double>(ds.size());
  stats.acc = static_cast<double>(correct) / static_cast<double>(ds.size());
  if (!std::isfinite(stats.mean_loss)) {
    throw NumericError("evaluation produced a non-finite loss");
  }
  return stats;
}

Dataset fixed_metric_sample(const Dataset& train, std::size_t size, Rng& root) {
  std::vector<std::size_t> idx(train.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  Rng sample_rng = root.child("metric_sample");
  shuffle(idx, sample_rng);
  idx.resize(std::min(size, train.size()));
  Dataset out;
  out.num_classes = train.num_classes;
  out.split = "metric_sample";
  out.inputs = Matrix(idx.size(), train.dim());
  out.labels.resize(idx.size());
  for (std::size_t i = 0; i < idx.size(); ++i) {
    auto src = train.inputs.row(idx[i]);
    std::copy(src.begin(), src.end(), out.inputs.row(i).begin());
    out.labels[i] = train.labels[idx[i]];
  }
  return out;
}

template <typename Fn>
std::optional<double> defined_or_empty(Fn&& fn) {
  try {
    return fn();
  } catch (const UndefinedMetricError&) {
    return std::nullopt;
  }
}

MetricRecord compute_record(const RunConfig& cfg, const ModelParams& params,
                            const DataBundle& data, const Dataset& sample,
                            std::size_t step, Rng& metric_rng) {
  MetricRecord rec;
  rec.step = step;
  EvalStats train_stats = evaluate(params, cfg.loss, data.train);
  EvalStats test_stats = evaluate(params, cfg.loss, data.test);
  rec.train_loss = train_stats.mean_loss;
  rec.train_acc = train_stats.acc;
  rec.test_acc = test_stats.acc;

  ForwardTrace trace = forward(params, sample.inputs);
  PerExampleGrads grads =
      per_example_backward(params, sample.inputs, sample.labels, cfg.loss);

  const std::size_t n = sample.size();
  const std::size_t layers = params.num_layers();
  std::vector<std::size_t> layer_sizes(layers);
  std::size_t whole_dim = 0;
  for (std::size_t l = 0; l < layers; ++l) {
    layer_sizes[l] = params.weights[l].rows * params.weights[l].cols;
    whole_dim += layer_sizes[l];
  }

  VectorSet whole(n, whole_dim);
  whole.labels = sample.labels;
  for (std::size_t i = 0; i < n; ++i) {
    auto out = whole.row(i);
    std::size_t offset = 0;
    for (std::size_t l = 0; l < layers; ++l) {
      const auto& g = grads.weight_grads[l][i];
      std::copy(g.data.begin(), g.data.end(), out.begin() + offset);
      offset += layer_sizes[l];
    }
  }

  auto layer_scope = [&](std::size_t l) {
    VectorSet set(n, layer_sizes[l]);
    set.labels = sample.labels;
    for (std::size_t i = 0; i < n; ++i) {
      const auto& g = grads.weight_grads[l][i];
      std::copy(g.data.begin(), g.data.end(), set.row(i).begin());
    }
    return set;
  };

  const std::size_t k = sample.num_classes;
  rec.omega_inclass_grad_hidden = defined_or_empty(
      [&] { return class_alignment(layer_scope(0), k).omega_in_class; });
  rec.omega_inclass_grad_top = defined_or_empty([&] {
    return class_alignment(layer_scope(layers - 1), k).omega_in_class;
  });
  {
    VectorSet logit_set(n, grads.logit_grads.cols, grads.logit_grads.data,
                        sample.labels);
    rec.omega_inclass_grad_logit = defined_or_empty(
        [&] { return class_alignment(logit_set, k).omega_in_class; });
  }
  rec.omega_inclass_grad_whole = defined_or_empty(
      [&] { return class_alignment(whole, k).omega_in_class; });
  {
    const Matrix& reps = trace.representations();
    VectorSet rep_set(n, reps.cols, reps.data, sample.labels);
    rec.omega_inclass_rep = defined_or_empty(
        [&] { return representation_alignment(rep_set, k).omega_in_class; });
  }

  DiversityResult div = gradient_diversity(whole);
  rec.diversity = div.is_infinite ? std::optional<double>(
                                        std::numeric_limits<double>::infinity())
                                  : std::optional<double>(div.value);
  Rng stiffness_rng = metric_rng.child("stiffness");
  rec.stiffness = defined_or_empty([&] {
    return cosine_stiffness(whole, cfg.pair_budget, stiffness_rng).value;
  });
  Rng confusion_rng = metric_rng.child("confusion");
  rec.confusion = defined_or_empty([&] {
    return gradient_confusion(whole, cfg.pair_budget, confusion_rng).value;
  });
  rec.nec_value = defined_or_empty([&] { return nec(whole); });
  Rng er_rng = metric_rng.child("er");
  std::optional<RademacherAlignment> er = std::nullopt;
  try {
    er = empirical_rademacher_alignment(whole, cfg.er_draws, er_rng);
  } catch (const UndefinedMetricError&) {
  }
  if (er) {
    rec.er_mean = er->mean;
    rec.er_std = er->stddev;
  }

  Matrix mean_w1(params.weights[0].rows, params.weights[0].cols);
  for (std::size_t i = 0; i < n; ++i) {
    axpy(1.0, grads.weight_grads[0][i].data, mean_w1.data);
  }
  for (double& x : mean_w1.data) x /= static_cast<double>(n);
  rec.grad_w1_over_w1 = grad_param_norm_ratio(mean_w1, params.weights[0]);
  return rec;
}

void write_outputs(const RunConfig& cfg, const TrainResult& result) {
  if (!cfg.csv_out.empty()) {
    std::ofstream out(cfg.csv_out, std::ios::trunc);
    if (!out) throw FormatError("cannot open " + cfg.csv_out + " for write");
    out << metric_csv_header();
    for (const auto& rec : result.records) out << metric_csv_row(rec);
    if (result.diverged) {
      out << "# diverged at step " << result.divergence_step << "\n";
    }
  }
  if (!cfg.config_out.empty()) {
    std::ofstream out(cfg.config_out, std::ios::trunc);
    if (!out) throw FormatError("cannot open " + cfg.config_out + " for write");
    out << serialize_run_config(cfg);
  }
}

void finalize_aggregates(TrainResult& result) {
  double omega_sum = 0.0;
  std::size_t omega_count = 0;
  double rep_sum = 0.0;
  std::size_t rep_count = 0;
  for (const auto& rec : result.records) {
    result.best_test_acc = std::max(result.best_test_acc, rec.test_acc);
    if (rec.omega_inclass_grad_whole) {
      omega_sum += *rec.omega_inclass_grad_whole;
      ++omega_count;
    }
    if (rec.omega_inclass_rep) {
      rep_sum += *rec.omega_inclass_rep;
      ++rep_count;
    }
  }
  if (omega_count) {
    result.time_avg_omega_inclass = omega_sum / static_cast<double>(omega_count);
  }
  if (rep_count) {
    result.time_avg_omega_rep = rep_sum / static_cast<double>(rep_count);
  }
  if (!result.records.empty()) {
    result.final_train_acc = result.records.back().train_acc;
  }
}

}  // namespace

TrainResult train(const RunConfig& cfg) {
  cfg.validate();
  Rng root(cfg.seed);
  DataBundle data = build_data(cfg, root);
  ModelParams params = build_model(cfg, data.train.dim(), root);
  Dataset sample = fixed_metric_sample(data.train, cfg.metric_sample, root);

  std::vector<double> lr_per_layer(params.num_layers(), cfg.lr);
  if (!cfg.lr_multipliers.empty()) {
    for (std::size_t l = 0; l < lr_per_layer.size(); ++l) {
      lr_per_layer[l] *= cfg.lr_multipliers[l];
    }
  }

  Rng shuffle_rng = root.child("epoch_shuffle");
  Rng metrics_root = root.child("metrics");

  TrainResult result;
  std::size_t step = 0;
  bool stop = false;
  try {
    Rng rec_rng = metrics_root.child(std::uint64_t{0});
    result.records.push_back(
        compute_record(cfg, params, data, sample, 0, rec_rng));
    if (cfg.stop_at_perfect && result.records.back().train_acc >= 1.0) {
      stop = true;
    }

    std::vector<std::size_t> order(data.train.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::size_t pos = order.size();  // forces a shuffle before the first batch

    while (!stop && step < cfg.max_steps) {
      if (pos >= order.size()) {
        shuffle(order, shuffle_rng);
        pos = 0;
      }
      const std::size_t count = std::min(cfg.batch_size, order.size() - pos);
      Matrix batch(count, data.train.dim());
      std::vector<std::size_t> labels(count);
      for (std::size_t i = 0; i < count; ++i) {
        auto src = data.train.inputs.row(order[pos + i]);
        std::copy(src.begin(), src.end(), batch.row(i).begin());
        labels[i] = data.train.labels[order[pos + i]];
      }
      pos += count;

      MeanGrads grads = mean_backward(params, batch, labels, cfg.loss);
      params = sgd_step(params, grads.weight_grads, grads.bias_grads,
                        lr_per_layer);
      ++step;

      if (step % cfg.metric_cadence == 0) {
        Rng rec_rng = metrics_root.child(static_cast<std::uint64_t>(step));
        result.records.push_back(
            compute_record(cfg, params, data, sample, step, rec_rng));
        if (cfg.stop_at_perfect && result.records.back().train_acc >= 1.0) {
          stop = true;
        }
      }
    }
  } catch (const NumericError&) {
    result.diverged = true;
    result.divergence_step = step;
  }

  result.steps_run = step;
  result.final_params = std::move(params);
  finalize_aggregates(result);
  write_outputs(cfg, result);
  return result;
}

namespace {

std::string with_sigma_tag(const std::string& path, double sigma) {
  if (path.empty()) return path;
  std::string tag = "_sigma" + format_double(sigma);
  auto dot = path.find_last_of('.');
  auto slash = path.find_last_of('/');
  if (dot == std::string::npos || (slash != std::string::npos && dot < slash)) {
    return path + tag;
  }
  return path.substr(0, dot) + tag + path.substr(dot);
}

std::vector<double> average_ranks(const std::vector<double>& xs) {
  const std::size_t n = xs.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(),
            [&xs](std::size_t a, std::size_t b) { return xs[a] < xs[b]; });
  std::vector<double> ranks(n);
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i;
    while (j + 1 < n && xs[order[j + 1]] == xs[order[i]]) ++j;
    const double rank = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t t = i; t <= j; ++t) ranks[order[t]] = rank;
    i = j + 1;
  }
  return ranks;
}

double pearson(const std::vector<double>& xs, const std::vector<double>& ys) {
  const double n = static_cast<double>(xs.size());
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    mx += xs[i];
    my += ys[i];
  }
  mx /= n;
  my /= n;
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    sxy += (xs[i] - mx) * (ys[i] - my);
    sxx += (xs[i] - mx) * (xs[i] - mx);
    syy += (ys[i] - my) * (ys[i] - my);
  }
  if (sxx == 0.0 || syy == 0.0) {
    throw UndefinedMetricError("correlation needs nonzero variance");
  }
  return sxy / std::sqrt(sxx * syy);
}

}  // namespace

std::pair<double, double> correlation(
    const std::vector<std::pair<double, double>>& pairs) {
  if (pairs.size() < 3) {
    throw UndefinedMetricError("correlation needs at least 3 pairs");
  }
  std::vector<double> xs(pairs.size()), ys(pairs.size());
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    xs[i] = pairs[i].first;
    ys[i] = pairs[i].second;
  }
  const double p = pearson(xs, ys);
  const double s = pearson(average_ranks(xs), average_ranks(ys));
  return {p, s};
}

SweepResult sweep(const RunConfig& base, const std::vector<double>& sigmas) {
  if (sigmas.size() < 2) {
    throw std::invalid_argument("sweep needs at least 2 sigma values");
  }
  base.validate();
  SweepResult result;
  result.rows.resize(sigmas.size());
  parallel_for(sigmas.size(), [&](std::size_t i) {
    SweepRow& row = result.rows[i];
    row.sigma = sigmas[i];
    RunConfig cfg = base;
    cfg.sigma = sigmas[i];
    cfg.csv_out = with_sigma_tag(base.csv_out, sigmas[i]);
    cfg.config_out = with_sigma_tag(base.config_out, sigmas[i]);
    try {
      TrainResult run = train(cfg);
      row.best_test_acc = run.best_test_acc;
      row.final_train_acc = run.final_train_acc;
      row.time_avg_omega_inclass = run.time_avg_omega_inclass;
      row.time_avg_omega_rep = run.time_avg_omega_rep;
      row.diverged = run.diverged;
    } catch (const std::exception& e) {
      row.failed = true;
      row.error = e.what();
    }
  });

  std::vector<std::pair<double, double>> pairs;
  for (const auto& row : result.rows) {
    if (!row.failed && !row.diverged) {
      pairs.emplace_back(row.time_avg_omega_inclass, row.best_test_acc);
    }
  }
  if (pairs.size() >= 3) {
    try {
      auto [p, s] = correlation(pairs);
      result.pearson = p;
      result.spearman = s;
    } catch (const UndefinedMetricError&) {
    }
  }
  return result;
}

std::string serialize_sweep_result(const SweepResult& result) {
  json rows = json::array();
  for (const auto& row : result.rows) {
    json r;
    r["sigma"] = row.sigma;
    r["best_test_acc"] = row.best_test_acc;
    r["final_train_acc"] = row.final_train_acc;
    r["time_avg_omega_inclass"] = row.time_avg_omega_inclass;
    r["time_avg_omega_rep"] = row.time_avg_omega_rep;
    r["diverged"] = row.diverged;
    r["failed"] = row.failed;
    if (row.failed) r["error"] = row.error;
    rows.push_back(std::move(r));
  }
  json doc;
  doc["rows"] = std::move(rows);
  if (result.pearson) doc["pearson"] = *result.pearson;
  if (result.spearman) doc["spearman"] = *result.spearman;
  return doc.dump(2) + "\n";
}

}  // namespace alignscope
