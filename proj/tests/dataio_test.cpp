#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdio>
#include <fstream>
#include <string>
#include <vector>

#include "alignscope/common.hpp"
#include "alignscope/dataio.hpp"
#include "alignscope/rng.hpp"

using namespace alignscope;

namespace {

struct TempFile {
  std::string path;
  explicit TempFile(const std::string& name) : path("/tmp/alignscope_" + name) {}
  ~TempFile() { std::remove(path.c_str()); }
};

void write_fake_cifar(const std::string& path, std::size_t records,
                      unsigned seed) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  Rng rng(seed);
  for (std::size_t r = 0; r < records; ++r) {
    unsigned char label = static_cast<unsigned char>(rng.uniform_index(10));
    out.put(static_cast<char>(label));
    for (std::size_t j = 0; j < 3072; ++j) {
      out.put(static_cast<char>(rng.uniform_index(256)));
    }
  }
}

}  // namespace

TEST_CASE("synth_blobs shapes, labels, and determinism") {
  Rng a(1);
  Dataset ds = synth_blobs(3, 10, 5, 1.0, 0.2, a);
  CHECK(ds.size() == 30);
  CHECK(ds.dim() == 5);
  CHECK(ds.num_classes == 3);
  for (std::size_t i = 0; i < ds.size(); ++i) {
    CHECK(ds.labels[i] == i / 10);
  }
  Rng b(1);
  Dataset again = synth_blobs(3, 10, 5, 1.0, 0.2, b);
  CHECK(ds.inputs.data == again.inputs.data);

  CHECK_THROWS_AS(synth_blobs(1, 10, 5, 1.0, 0.2, a), std::invalid_argument);
  CHECK_THROWS_AS(synth_blobs(3, 0, 5, 1.0, 0.2, a), std::invalid_argument);
}

TEST_CASE("blobs cluster around shared class centers") {
  Rng rng(2);
  Dataset ds = synth_blobs(2, 200, 4, 5.0, 0.1, rng);
  // Distances within a class are small relative to the center scale.
  for (std::size_t c = 0; c < 2; ++c) {
    Vector mean(4, 0.0);
    for (std::size_t i = c * 200; i < (c + 1) * 200; ++i) {
      axpy(1.0, ds.inputs.row(i), mean);
    }
    for (double& m : mean) m /= 200.0;
    for (std::size_t i = c * 200; i < (c + 1) * 200; ++i) {
      Vector dev(4);
      for (std::size_t j = 0; j < 4; ++j) dev[j] = ds.inputs.at(i, j) - mean[j];
      CHECK(norm(dev) < 1.0);
    }
  }
}

TEST_CASE("shuffle_labels fraction 0 is the identity") {
  Rng rng(3);
  Dataset ds = synth_blobs(3, 20, 4, 1.0, 0.2, rng);
  Rng s(4);
  Dataset out = shuffle_labels(ds, 0.0, s);
  CHECK(out.labels == ds.labels);
  CHECK(out.inputs.data == ds.inputs.data);
}

TEST_CASE("shuffle_labels fraction 1 resamples every label uniformly") {
  Rng rng(5);
  Dataset ds = synth_blobs(4, 250, 3, 1.0, 0.2, rng);
  Rng s(6);
  Dataset out = shuffle_labels(ds, 1.0, s);
  CHECK(out.inputs.data == ds.inputs.data);
  std::vector<int> counts(4, 0);
  std::size_t changed = 0;
  for (std::size_t i = 0; i < out.size(); ++i) {
    REQUIRE(out.labels[i] < 4);
    ++counts[out.labels[i]];
    if (out.labels[i] != ds.labels[i]) ++changed;
  }
  // Uniform resampling keeps ~1/4 matches by chance.
  CHECK(changed > 600);
  for (int c : counts) CHECK(c > 150);

  Rng s2(6);
  Dataset again = shuffle_labels(ds, 1.0, s2);
  CHECK(again.labels == out.labels);

  CHECK_THROWS_AS(shuffle_labels(ds, 1.5, s), std::invalid_argument);
}

TEST_CASE("shuffle_labels fractional count") {
  Rng rng(7);
  Dataset ds = synth_blobs(2, 100, 2, 1.0, 0.2, rng);
  Rng s(8);
  Dataset out = shuffle_labels(ds, 0.5, s);
  std::size_t touched = 0;
  for (std::size_t i = 0; i < ds.size(); ++i) {
    if (out.labels[i] != ds.labels[i]) ++touched;
  }
  // 100 of 200 get resampled; about half keep their label by chance.
  CHECK(touched >= 25);
  CHECK(touched <= 100);
}

TEST_CASE("grad dump round trip is bit exact") {
  TempFile f("dump.bin");
  GradDump dump;
  dump.n = 3;
  dump.d = 4;
  dump.k = 2;
  Rng rng(9);
  dump.grads.resize(12);
  for (double& x : dump.grads) x = rng.gaussian();
  dump.labels = {0, 1, 1};
  write_grad_dump(f.path, dump);
  GradDump back = read_grad_dump(f.path);
  CHECK(back.n == dump.n);
  CHECK(back.d == dump.d);
  CHECK(back.k == dump.k);
  CHECK(back.grads == dump.grads);
  CHECK(back.labels == dump.labels);
}

TEST_CASE("grad dump rejects malformed files") {
  TempFile f("dump_bad.bin");
  GradDump dump;
  dump.n = 1;
  dump.d = 2;
  dump.k = 2;
  dump.grads = {1.0, 2.0};
  dump.labels = {1};
  write_grad_dump(f.path, dump);

  {
    std::ofstream out(f.path, std::ios::binary | std::ios::app);
    out.put('x');  // trailing byte
  }
  CHECK_THROWS_AS(read_grad_dump(f.path), FormatError);

  write_grad_dump(f.path, dump);
  {
    std::fstream out(f.path, std::ios::binary | std::ios::in | std::ios::out);
    out.put('X');  // corrupt magic
  }
  CHECK_THROWS_AS(read_grad_dump(f.path), FormatError);

  TempFile trunc("dump_trunc.bin");
  write_grad_dump(trunc.path, dump);
  {
    std::ifstream in(f.path, std::ios::binary);
    std::ofstream out(trunc.path, std::ios::binary | std::ios::trunc);
    std::vector<char> bytes(20);
    in.read(bytes.data(), 20);
    out.write(bytes.data(), 20);
  }
  CHECK_THROWS_AS(read_grad_dump(trunc.path), FormatError);

  CHECK_THROWS_AS(read_grad_dump("/tmp/alignscope_missing.bin"), FormatError);

  GradDump bad = dump;
  bad.labels = {0, 1};
  CHECK_THROWS_AS(write_grad_dump(f.path, bad), ShapeError);
}

TEST_CASE("cifar10 loader matches a byte-scan oracle") {
  TempFile train1("cifar_a.bin");
  TempFile train2("cifar_b.bin");
  TempFile test("cifar_t.bin");
  write_fake_cifar(train1.path, 20, 1);
  write_fake_cifar(train2.path, 15, 2);
  write_fake_cifar(test.path, 10, 3);

  Rng rng(10);
  auto [train, testset] =
      load_cifar10({train1.path, train2.path}, test.path, 0, rng);
  CHECK(train.size() == 35);
  CHECK(train.dim() == 3072);
  CHECK(testset.size() == 10);
  CHECK(train.num_classes == 10);

  // Oracle: rescan the raw bytes and compare labels and scaled pixels.
  std::vector<unsigned char> raw;
  for (const auto& p : {train1.path, train2.path}) {
    std::ifstream in(p, std::ios::binary);
    raw.insert(raw.end(), std::istreambuf_iterator<char>(in),
               std::istreambuf_iterator<char>());
  }
  REQUIRE(raw.size() == 35 * 3073);
  for (std::size_t r = 0; r < 35; ++r) {
    CHECK(train.labels[r] == raw[r * 3073]);
    for (std::size_t j : {std::size_t{0}, std::size_t{1535}, std::size_t{3071}}) {
      CHECK(train.inputs.at(r, j) ==
            doctest::Approx(raw[r * 3073 + 1 + j] / 255.0).epsilon(1e-15));
    }
  }
}

TEST_CASE("cifar10 subset is seeded and sized") {
  TempFile train1("cifar_s.bin");
  TempFile test("cifar_st.bin");
  write_fake_cifar(train1.path, 30, 4);
  write_fake_cifar(test.path, 5, 5);
  Rng a(11);
  auto [tr1, te1] = load_cifar10({train1.path}, test.path, 12, a);
  CHECK(tr1.size() == 12);
  CHECK(te1.size() == 5);
  Rng b(11);
  auto [tr2, te2] = load_cifar10({train1.path}, test.path, 12, b);
  CHECK(tr1.inputs.data == tr2.inputs.data);
  CHECK(tr1.labels == tr2.labels);
}

TEST_CASE("cifar10 loader rejects malformed files") {
  TempFile bad("cifar_bad.bin");
  {
    std::ofstream out(bad.path, std::ios::binary);
    for (int i = 0; i < 100; ++i) out.put('a');  // not a multiple of 3073
  }
  Rng rng(12);
  CHECK_THROWS_AS(load_cifar10({bad.path}, bad.path, 0, rng), FormatError);

  TempFile badlabel("cifar_badlabel.bin");
  {
    std::ofstream out(badlabel.path, std::ios::binary);
    out.put(static_cast<char>(11));  // label byte > 9
    for (int i = 0; i < 3072; ++i) out.put('\0');
  }
  CHECK_THROWS_AS(load_cifar10({badlabel.path}, badlabel.path, 0, rng),
                  FormatError);

  CHECK_THROWS_AS(load_cifar10({"/tmp/alignscope_nofile.bin"},
                               "/tmp/alignscope_nofile.bin", 0, rng),
                  FormatError);
}
