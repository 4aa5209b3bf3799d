#include "alignscope/dataio.hpp"

#include <algorithm>
#include <cstring>
#include <fstream>
#include <numeric>
#include <stdexcept>

#include "alignscope/common.hpp"

namespace alignscope {
namespace {

constexpr std::size_t kCifarRecordBytes = 3073;
constexpr std::size_t kCifarPixels = 3072;
constexpr char kDumpMagic[4] = {'P', 'E', 'G', 'D'};
constexpr std::uint32_t kDumpVersion = 1;

void write_bytes(std::ofstream& out, const void* p, std::size_t n) {
  out.write(static_cast<const char*>(p), static_cast<std::streamsize>(n));
}

void read_bytes(std::ifstream& in, void* p, std::size_t n, const char* what) {
  in.read(static_cast<char*>(p), static_cast<std::streamsize>(n));
  if (static_cast<std::size_t>(in.gcount()) != n) {
    throw FormatError(std::string("grad dump: truncated while reading ") + what);
  }
}

}  // namespace

Dataset synth_blobs(std::size_t k, std::size_t per_class, std::size_t dim,
                    double center_scale, double noise, Rng& rng) {
  if (k < 2) throw std::invalid_argument("synth_blobs: k must be >= 2");
  if (per_class == 0 || dim == 0) {
    throw std::invalid_argument("synth_blobs: zero count");
  }
  Rng center_rng = rng.child("centers");
  Matrix centers(k, dim);
  for (double& x : centers.data) x = center_scale * center_rng.gaussian();

  Dataset ds;
  ds.num_classes = k;
  ds.inputs = Matrix(k * per_class, dim);
  ds.labels.resize(k * per_class);
  Rng noise_rng = rng.child("noise");
  std::size_t row = 0;
  for (std::size_t c = 0; c < k; ++c) {
    for (std::size_t s = 0; s < per_class; ++s, ++row) {
      auto out = ds.inputs.row(row);
      auto center = centers.row(c);
      for (std::size_t j = 0; j < dim; ++j) {
        out[j] = center[j] + noise * noise_rng.gaussian();
      }
      ds.labels[row] = c;
    }
  }
  return ds;
}

namespace {

Dataset load_cifar_file_set(const std::vector<std::string>& paths) {
  Dataset ds;
  ds.num_classes = 10;
  std::vector<double> inputs;
  for (const auto& path : paths) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw FormatError("cifar10: cannot open " + path);
    in.seekg(0, std::ios::end);
    const auto size = static_cast<std::size_t>(in.tellg());
    in.seekg(0, std::ios::beg);
    if (size == 0 || size % kCifarRecordBytes != 0) {
      throw FormatError("cifar10: " + path + " has size " +
                        std::to_string(size) +
                        " not a multiple of 3073 (stray bytes at offset " +
                        std::to_string(size - size % kCifarRecordBytes) + ")");
    }
    std::vector<unsigned char> record(kCifarRecordBytes);
    const std::size_t records = size / kCifarRecordBytes;
    for (std::size_t r = 0; r < records; ++r) {
      in.read(reinterpret_cast<char*>(record.data()), kCifarRecordBytes);
      if (!in) throw FormatError("cifar10: short read in " + path);
      if (record[0] > 9) {
        throw FormatError("cifar10: label byte " + std::to_string(record[0]) +
                          " > 9 at offset " +
                          std::to_string(r * kCifarRecordBytes) + " in " + path);
      }
      ds.labels.push_back(record[0]);
      for (std::size_t j = 0; j < kCifarPixels; ++j) {
        inputs.push_back(static_cast<double>(record[1 + j]) / 255.0);
      }
    }
  }
  ds.inputs = Matrix(ds.labels.size(), kCifarPixels, std::move(inputs));
  return ds;
}

Dataset take_subset(const Dataset& ds, const std::vector<std::size_t>& idx) {
  Dataset out;
  out.num_classes = ds.num_classes;
  out.split = ds.split;
  out.inputs = Matrix(idx.size(), ds.dim());
  out.labels.resize(idx.size());
  for (std::size_t i = 0; i < idx.size(); ++i) {
    auto src = ds.inputs.row(idx[i]);
    std::copy(src.begin(), src.end(), out.inputs.row(i).begin());
    out.labels[i] = ds.labels[idx[i]];
  }
  return out;
}

}  // namespace

std::pair<Dataset, Dataset> load_cifar10(
    const std::vector<std::string>& train_paths, const std::string& test_path,
    std::size_t subset, Rng& rng) {
  Dataset train = load_cifar_file_set(train_paths);
  train.split = "train";
  Dataset test = load_cifar_file_set({test_path});
  test.split = "test";
  if (subset > 0 && subset < train.size()) {
    std::vector<std::size_t> idx(train.size());
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    Rng subset_rng = rng.child("cifar_subset");
    shuffle(idx, subset_rng);
    idx.resize(subset);
    train = take_subset(train, idx);
    train.split = "train";
  }
  return {std::move(train), std::move(test)};
}

Dataset shuffle_labels(const Dataset& ds, double fraction, Rng& rng) {
  if (!(fraction >= 0.0 && fraction <= 1.0)) {
    throw std::invalid_argument("shuffle_labels: fraction must be in [0, 1]");
  }
  Dataset out = ds;
  if (fraction == 0.0) return out;
  Rng pick_rng = rng.child("shuffle_pick");
  Rng label_rng = rng.child("shuffle_labels");
  std::vector<std::size_t> idx(ds.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  shuffle(idx, pick_rng);
  const auto count =
      static_cast<std::size_t>(fraction * static_cast<double>(ds.size()) + 0.5);
  for (std::size_t i = 0; i < count; ++i) {
    out.labels[idx[i]] = label_rng.uniform_index(ds.num_classes);
  }
  return out;
}

void write_grad_dump(const std::string& path, const GradDump& dump) {
  if (dump.grads.size() != dump.n * dump.d ||
      dump.labels.size() != dump.n) {
    throw ShapeError("grad dump: payload shapes inconsistent with header");
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw FormatError("grad dump: cannot open " + path + " for write");
  write_bytes(out, kDumpMagic, 4);
  std::uint32_t version = kDumpVersion;
  write_bytes(out, &version, sizeof(version));
  std::uint64_t n = dump.n, d = dump.d, k = dump.k;
  write_bytes(out, &n, sizeof(n));
  write_bytes(out, &d, sizeof(d));
  write_bytes(out, &k, sizeof(k));
  write_bytes(out, dump.grads.data(), dump.grads.size() * sizeof(double));
  for (std::size_t label : dump.labels) {
    std::uint64_t v = label;
    write_bytes(out, &v, sizeof(v));
  }
  if (!out) throw FormatError("grad dump: write failed for " + path);
}

GradDump read_grad_dump(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("grad dump: cannot open " + path);
  char magic[4];
  read_bytes(in, magic, 4, "magic");
  if (std::memcmp(magic, kDumpMagic, 4) != 0) {
    throw FormatError("grad dump: bad magic in " + path);
  }
  std::uint32_t version = 0;
  read_bytes(in, &version, sizeof(version), "version");
  if (version != kDumpVersion) {
    throw FormatError("grad dump: unsupported version " +
                      std::to_string(version));
  }
  std::uint64_t n = 0, d = 0, k = 0;
  read_bytes(in, &n, sizeof(n), "n");
  read_bytes(in, &d, sizeof(d), "d");
  read_bytes(in, &k, sizeof(k), "k");
  GradDump dump;
  dump.n = n;
  dump.d = d;
  dump.k = k;
  dump.grads.resize(n * d);
  if (!dump.grads.empty()) {
    read_bytes(in, dump.grads.data(), dump.grads.size() * sizeof(double),
               "gradients");
  }
  dump.labels.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    std::uint64_t v = 0;
    read_bytes(in, &v, sizeof(v), "labels");
    dump.labels[i] = v;
  }
  char extra;
  if (in.read(&extra, 1)) {
    throw FormatError("grad dump: trailing bytes in " + path);
  }
  return dump;
}

}  // namespace alignscope
