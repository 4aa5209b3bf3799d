#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "alignscope/dataio.hpp"
#include "alignscope/model.hpp"

namespace alignscope {

// Flat key-value run configuration; serialized as a single-level JSON object.
struct RunConfig {
  // dataset
  std::string dataset = "blobs";  // "blobs" or "cifar10"
  std::size_t num_classes = 10;
  std::size_t train_per_class = 500;
  std::size_t test_per_class = 200;
  std::size_t input_dim = 16;
  double center_scale = 1.0;
  double noise = 0.25;
  double shuffle_fraction = 0.0;
  std::string cifar_train;  // comma-separated batch paths
  std::string cifar_test;
  std::size_t cifar_subset = 0;

  // model
  std::vector<std::size_t> hidden_sizes = {1024};
  Activation activation = Activation::kSin;
  bool bias = false;

  // loss
  Loss loss = Loss::softmax_ce();

  // init: first layer Gaussian(sigma), later layers Glorot uniform
  double sigma = 0.05;

  // optimizer
  double lr = 0.01;
  std::vector<double> lr_multipliers;  // empty = all 1.0
  std::size_t batch_size = 256;

  // schedule
  std::size_t max_steps = 2000;
  std::size_t metric_cadence = 50;
  std::size_t metric_sample = 1024;
  std::size_t pair_budget = 100000;
  std::size_t er_draws = 64;
  bool stop_at_perfect = true;

  std::uint64_t seed = 1;
  std::string csv_out;
  std::string config_out;

  void validate() const;
};

RunConfig parse_run_config(const std::string& json_text);
RunConfig load_run_config(const std::string& path);
std::string serialize_run_config(const RunConfig& config);

// One metric evaluation point. Undefined metrics stay empty, never 0.
struct MetricRecord {
  std::size_t step = 0;
  double train_loss = 0.0;
  double train_acc = 0.0;
  double test_acc = 0.0;
  std::optional<double> omega_inclass_grad_hidden;
  std::optional<double> omega_inclass_grad_top;
  std::optional<double> omega_inclass_grad_logit;
  std::optional<double> omega_inclass_grad_whole;
  std::optional<double> omega_inclass_rep;
  std::optional<double> diversity;  // empty when infinite (zero gradient sum)
  std::optional<double> stiffness;
  std::optional<double> confusion;
  double grad_w1_over_w1 = 0.0;
  std::optional<double> nec_value;
  std::optional<double> er_mean;
  std::optional<double> er_std;
};

std::string metric_csv_header();
std::string metric_csv_row(const MetricRecord& rec);

struct TrainResult {
  std::vector<MetricRecord> records;
  ModelParams final_params;
  std::size_t steps_run = 0;
  double final_train_acc = 0.0;
  double best_test_acc = 0.0;
  double time_avg_omega_inclass = 0.0;  // whole-net gradient scope
  double time_avg_omega_rep = 0.0;
  bool diverged = false;
  std::size_t divergence_step = 0;
};

// Mini-batch SGD with seeded epoch shuffles; metrics on a fixed train sample
// at step 0 and every `metric_cadence` steps. Writes the CSV and the resolved
// config when output paths are set. Non-finite values abort the run and set
// the divergence fields instead of throwing.
TrainResult train(const RunConfig& config);

struct SweepRow {
  double sigma = 0.0;
  double best_test_acc = 0.0;
  double final_train_acc = 0.0;
  double time_avg_omega_inclass = 0.0;
  double time_avg_omega_rep = 0.0;
  bool diverged = false;
  bool failed = false;
  std::string error;
};

struct SweepResult {
  std::vector<SweepRow> rows;
  // Best test accuracy vs time-averaged in-class alignment, across sigmas.
  std::optional<double> pearson;
  std::optional<double> spearman;
};

// One train() per sigma, identical seeds otherwise; run failures are recorded
// in the row and the sweep continues.
SweepResult sweep(const RunConfig& base, const std::vector<double>& sigmas);

std::string serialize_sweep_result(const SweepResult& result);

// Pearson and Spearman coefficients; needs >= 3 pairs and nonzero variance
// in both coordinates (UndefinedMetricError otherwise).
std::pair<double, double> correlation(
    const std::vector<std::pair<double, double>>& pairs);

}  // namespace alignscope
