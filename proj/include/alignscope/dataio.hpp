#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "alignscope/matrix.hpp"
#include "alignscope/rng.hpp"

namespace alignscope {

struct Dataset {
  Matrix inputs;                     // n x p
  std::vector<std::size_t> labels;   // n entries < k
  std::size_t num_classes = 0;
  std::string split;                 // "train" / "test"

  std::size_t size() const { return inputs.rows; }
  std::size_t dim() const { return inputs.cols; }
};

// Gaussian class centers (0, center_scale^2 I) plus per-sample Gaussian noise.
Dataset synth_blobs(std::size_t k, std::size_t per_class, std::size_t dim,
                    double center_scale, double noise, Rng& rng);

// Standard CIFAR-10 binary files: 10000 records of 3073 bytes (label byte +
// 3072 pixel bytes). Pixels are scaled to [0, 1]. A train subset of `subset`
// examples is taken by seeded shuffle then truncation (0 = all); the test
// file is loaded in full.
std::pair<Dataset, Dataset> load_cifar10(
    const std::vector<std::string>& train_paths, const std::string& test_path,
    std::size_t subset, Rng& rng);

// Resamples labels of a seeded fraction of examples uniformly from {0..k-1}.
Dataset shuffle_labels(const Dataset& ds, double fraction, Rng& rng);

// Binary gradient dump: magic "PEGD", u32 version, u64 n/d/k, then n*d
// float64 gradients and n u64 labels, all little-endian.
struct GradDump {
  std::size_t n = 0;
  std::size_t d = 0;
  std::size_t k = 0;
  std::vector<double> grads;             // n * d
  std::vector<std::size_t> labels;       // n
};

void write_grad_dump(const std::string& path, const GradDump& dump);
GradDump read_grad_dump(const std::string& path);

}  // namespace alignscope
