#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>
#include <vector>

#include "alignscope/rng.hpp"

using namespace alignscope;

TEST_CASE("same seed reproduces the bit stream") {
  Rng a(42);
  Rng b(42);
  for (int i = 0; i < 1000; ++i) {
    CHECK(a.next_u64() == b.next_u64());
  }
}

TEST_CASE("different seeds diverge") {
  Rng a(1);
  Rng b(2);
  int equal = 0;
  for (int i = 0; i < 100; ++i) {
    if (a.next_u64() == b.next_u64()) ++equal;
  }
  CHECK(equal == 0);
}

TEST_CASE("child streams do not disturb the parent") {
  Rng a(7);
  Rng b(7);
  (void)b.child("anything");
  (void)b.child(std::uint64_t{3});
  for (int i = 0; i < 100; ++i) {
    CHECK(a.next_u64() == b.next_u64());
  }
}

TEST_CASE("distinct labels give distinct streams") {
  Rng root(9);
  Rng a = root.child("alpha");
  Rng b = root.child("beta");
  Rng c = root.child(std::uint64_t{0});
  Rng d = root.child(std::uint64_t{1});
  std::set<std::uint64_t> firsts = {a.next_u64(), b.next_u64(), c.next_u64(),
                                    d.next_u64(), root.child("alpha").next_u64()};
  CHECK(firsts.size() == 4);  // alpha repeated must collide, others distinct
}

TEST_CASE("uniform lies in [0, 1)") {
  Rng rng(3);
  for (int i = 0; i < 10000; ++i) {
    double u = rng.uniform();
    CHECK(u >= 0.0);
    CHECK(u < 1.0);
  }
}

TEST_CASE("uniform range endpoints") {
  Rng rng(4);
  for (int i = 0; i < 1000; ++i) {
    double u = rng.uniform(-2.0, 5.0);
    CHECK(u >= -2.0);
    CHECK(u < 5.0);
  }
}

TEST_CASE("gaussian first two moments") {
  Rng rng(5);
  const int n = 200000;
  double sum = 0.0;
  double sum_sq = 0.0;
  for (int i = 0; i < n; ++i) {
    double g = rng.gaussian();
    sum += g;
    sum_sq += g * g;
  }
  double mean = sum / n;
  double var = sum_sq / n - mean * mean;
  CHECK(std::abs(mean) < 0.01);
  CHECK(std::abs(var - 1.0) < 0.02);
}

TEST_CASE("uniform_index stays in range and covers it") {
  Rng rng(6);
  std::vector<int> counts(7, 0);
  for (int i = 0; i < 7000; ++i) {
    auto idx = rng.uniform_index(7);
    REQUIRE(idx < 7);
    ++counts[idx];
  }
  for (int c : counts) CHECK(c > 700);
}

TEST_CASE("rademacher is balanced and valued in {-1, +1}") {
  Rng rng(8);
  int plus = 0;
  const int n = 100000;
  for (int i = 0; i < n; ++i) {
    int r = rng.rademacher();
    REQUIRE((r == 1 || r == -1));
    if (r == 1) ++plus;
  }
  CHECK(std::abs(plus - n / 2) < 4 * std::sqrt(n / 4.0));
}

TEST_CASE("shuffle is a permutation and seed-stable") {
  std::vector<int> v(50);
  std::iota(v.begin(), v.end(), 0);
  std::vector<int> w = v;
  Rng a(11);
  Rng b(11);
  shuffle(v, a);
  shuffle(w, b);
  CHECK(v == w);
  std::vector<int> sorted = v;
  std::sort(sorted.begin(), sorted.end());
  std::vector<int> expect(50);
  std::iota(expect.begin(), expect.end(), 0);
  CHECK(sorted == expect);
}
