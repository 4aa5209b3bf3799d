#include <cmath>
#include <cstdio>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "alignscope/bounds.hpp"
#include "alignscope/common.hpp"
#include "alignscope/dataio.hpp"
#include "alignscope/harness.hpp"
#include "alignscope/kernelcheck.hpp"
#include "alignscope/metrics.hpp"

namespace {

using namespace alignscope;

constexpr int kOk = 0;
constexpr int kValidationFailure = 1;
constexpr int kConfigError = 2;

std::vector<double> parse_double_list(const std::string& text,
                                      const char* what) {
  std::vector<double> out;
  std::string item;
  std::istringstream in(text);
  while (std::getline(in, item, ',')) {
    if (item.empty()) continue;
    try {
      out.push_back(std::stod(item));
    } catch (const std::exception&) {
      throw FormatError(std::string(what) + ": bad entry '" + item + "'");
    }
  }
  if (out.empty()) throw FormatError(std::string(what) + ": empty list");
  return out;
}

int cmd_train(const std::string& config_path) {
  RunConfig cfg = load_run_config(config_path);
  TrainResult result = train(cfg);
  std::printf("steps=%zu final_train_acc=%.6f best_test_acc=%.6f",
              result.steps_run, result.final_train_acc, result.best_test_acc);
  if (result.diverged) {
    std::printf(" diverged_at=%zu", result.divergence_step);
  }
  std::printf("\n");
  return result.diverged ? kValidationFailure : kOk;
}

int cmd_sweep(const std::string& config_path, const std::string& sigma_list,
              const std::string& json_out) {
  RunConfig cfg = load_run_config(config_path);
  std::vector<double> sigmas = parse_double_list(sigma_list, "--sigmas");
  SweepResult result = sweep(cfg, sigmas);
  std::string text = serialize_sweep_result(result);
  if (!json_out.empty()) {
    std::ofstream out(json_out, std::ios::trunc);
    if (!out) throw FormatError("cannot open " + json_out + " for write");
    out << text;
  } else {
    std::cout << text;
  }
  for (const auto& row : result.rows) {
    if (row.failed) return kValidationFailure;
  }
  return kOk;
}

int cmd_verify_kernel(const std::string& sigma_list,
                      const std::string& distance_list, std::size_t h,
                      std::size_t draws, std::uint64_t seed) {
  std::vector<double> sigmas = parse_double_list(sigma_list, "--sigmas");
  std::vector<double> distances = parse_double_list(distance_list, "--distances");
  const std::size_t dim = 8;
  Rng root(seed);
  bool all_pass = true;
  std::cout << "sigma,distance,estimate,se,bound,pass\n";
  for (double sigma : sigmas) {
    for (double dist : distances) {
      Vector x(dim, 0.0);
      Vector x_prime(dim, 0.0);
      x[0] = 1.0;
      x_prime[0] = 1.0 + dist;
      Rng cell = root.child("cell_s" + std::to_string(sigma) + "_d" +
                            std::to_string(dist));
      KernelEstimate est = sin_kernel_mc(x, x_prime, sigma, h, draws, cell);
      double bound = sin_kernel_bound(x, x_prime, sigma, h);
      bool pass = std::abs(est.estimate) <= bound + 3.0 * est.std_error;
      all_pass = all_pass && pass;
      std::printf("%.17g,%.17g,%.17g,%.17g,%.17g,%d\n", sigma, dist,
                  est.estimate, est.std_error, bound, pass ? 1 : 0);
    }
  }
  return all_pass ? kOk : kValidationFailure;
}

int cmd_verify_bounds(std::size_t trials, double delta, std::size_t n,
                      std::uint64_t seed) {
  Rng root(seed);
  Vector eval_point(16);
  for (std::size_t i = 0; i < eval_point.size(); ++i) {
    eval_point[i] = (i % 2 == 0) ? 1.0 : -1.0;
  }
  std::vector<TruthSpec> truths;
  truths.push_back(
      make_orthonormal_feature_truth(16, eval_point, logistic_scalar_loss()));
  Vector mu(16, 0.02);
  truths.push_back(make_clipped_gaussian_truth(16, mu, 0.1, 0.5));

  bool all_hold = true;
  for (const auto& truth : truths) {
    for (const auto& id : coverage_bound_ids()) {
      Rng run_rng = root.child(truth.id + "/" + id);
      BoundReport report = run_coverage(id, truth, n, delta, trials, run_rng);
      nlohmann::json line;
      line["bound_id"] = report.bound_id;
      line["truth"] = truth.id;
      line["delta"] = report.delta;
      line["n"] = report.n;
      line["trials"] = report.trials;
      line["failures"] = report.failures;
      line["failure_rate"] = report.failure_rate;
      line["holds"] = report.holds;
      std::cout << line.dump() << "\n";
      all_hold = all_hold && report.holds;
    }
  }
  return all_hold ? kOk : kValidationFailure;
}

int cmd_metrics(const std::string& dump_path, std::size_t pair_budget,
                std::size_t er_draws, std::uint64_t seed) {
  GradDump dump = read_grad_dump(dump_path);
  VectorSet set(dump.n, dump.d, dump.grads, dump.labels);
  Rng root(seed);
  nlohmann::json doc;
  doc["n"] = dump.n;
  doc["d"] = dump.d;
  doc["k"] = dump.k;
  try {
    doc["omega"] = alignment(set);
  } catch (const UndefinedMetricError& e) {
    doc["omega"] = nullptr;
  }
  if (dump.k >= 2) {
    try {
      AlignmentReport rep = class_alignment(set, dump.k);
      doc["omega_in_class"] = rep.omega_in_class;
    } catch (const UndefinedMetricError&) {
      doc["omega_in_class"] = nullptr;
    }
  }
  DiversityResult div = gradient_diversity(set);
  if (div.is_infinite) {
    doc["diversity"] = "inf";
  } else {
    doc["diversity"] = div.value;
  }
  Rng stiff_rng = root.child("stiffness");
  try {
    doc["stiffness"] = cosine_stiffness(set, pair_budget, stiff_rng).value;
  } catch (const UndefinedMetricError&) {
    doc["stiffness"] = nullptr;
  }
  Rng conf_rng = root.child("confusion");
  try {
    doc["confusion"] = gradient_confusion(set, pair_budget, conf_rng).value;
  } catch (const UndefinedMetricError&) {
    doc["confusion"] = nullptr;
  }
  try {
    doc["nec"] = nec(set);
  } catch (const UndefinedMetricError&) {
    doc["nec"] = nullptr;
  }
  Rng er_rng = root.child("er");
  try {
    RademacherAlignment er = empirical_rademacher_alignment(set, er_draws, er_rng);
    doc["er_mean"] = er.mean;
    doc["er_std"] = er.stddev;
  } catch (const UndefinedMetricError&) {
    doc["er_mean"] = nullptr;
    doc["er_std"] = nullptr;
  }
  std::cout << doc.dump(2) << "\n";
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Gradient alignment measurement and verification toolkit"};
  app.require_subcommand(1);

  std::string config_path;
  std::string sigma_list = "0.05,0.5,5";
  std::string json_out;
  std::string distance_list = "0.5,1,2";
  std::string dump_path;
  std::size_t h = 64;
  std::size_t draws = 10000;
  std::size_t trials = 2000;
  std::size_t n = 256;
  double delta = 0.1;
  std::size_t pair_budget = 100000;
  std::size_t er_draws = 64;
  std::uint64_t seed = 1;

  auto* train_cmd = app.add_subcommand("train", "Run one training config");
  train_cmd->add_option("--config", config_path, "Run config JSON")->required();

  auto* sweep_cmd =
      app.add_subcommand("sweep", "Train across first-layer init scales");
  sweep_cmd->add_option("--config", config_path, "Run config JSON")->required();
  sweep_cmd->add_option("--sigmas", sigma_list, "Comma-separated scales");
  sweep_cmd->add_option("--json-out", json_out, "Sweep result path");

  auto* kernel_cmd = app.add_subcommand(
      "verify-kernel", "Monte-Carlo check of the sin-feature kernel bound");
  kernel_cmd->add_option("--sigmas", sigma_list, "Weight scales");
  kernel_cmd->add_option("--distances", distance_list, "Input distances");
  kernel_cmd->add_option("--hidden", h, "Hidden units per draw");
  kernel_cmd->add_option("--draws", draws, "Monte-Carlo draws");
  kernel_cmd->add_option("--seed", seed, "RNG seed");

  auto* bounds_cmd = app.add_subcommand(
      "verify-bounds", "Coverage experiments for the concentration bounds");
  bounds_cmd->add_option("--trials", trials, "Trials per bound");
  bounds_cmd->add_option("--delta", delta, "Failure probability target");
  bounds_cmd->add_option("--n", n, "Sample size per trial");
  bounds_cmd->add_option("--seed", seed, "RNG seed");

  auto* metrics_cmd =
      app.add_subcommand("metrics", "Metric suite on a gradient dump");
  metrics_cmd->add_option("--grads", dump_path, "Gradient dump path")
      ->required();
  metrics_cmd->add_option("--pair-budget", pair_budget, "Pairwise stat budget");
  metrics_cmd->add_option("--er-draws", er_draws, "Rademacher sign draws");
  metrics_cmd->add_option("--seed", seed, "RNG seed");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? kOk : kConfigError;
  }

  try {
    if (train_cmd->parsed()) return cmd_train(config_path);
    if (sweep_cmd->parsed()) return cmd_sweep(config_path, sigma_list, json_out);
    if (kernel_cmd->parsed()) {
      return cmd_verify_kernel(sigma_list, distance_list, h, draws, seed);
    }
    if (bounds_cmd->parsed()) return cmd_verify_bounds(trials, delta, n, seed);
    if (metrics_cmd->parsed()) {
      return cmd_metrics(dump_path, pair_budget, er_draws, seed);
    }
  } catch (const FormatError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kConfigError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kValidationFailure;
  }
  return kConfigError;
}
