#pragma once

#include <cstdint>
#include <string_view>

namespace alignscope {

// Counter-based splittable generator. A stream is (key, counter); the same
// seed always yields the same bit stream, and child(label) derives an
// independent stream from (key, label) without touching the parent state.
class Rng {
 public:
  explicit Rng(std::uint64_t seed);

  Rng child(std::string_view label) const;
  Rng child(std::uint64_t index) const;

  std::uint64_t next_u64();

  // Uniform in [0, 1) with 53 bits of precision.
  double uniform();
  double uniform(double lo, double hi);

  // Standard normal via Box-Muller.
  double gaussian();

  // Uniform index in [0, n). n must be >= 1.
  std::uint64_t uniform_index(std::uint64_t n);

  // +1 or -1 with equal probability.
  int rademacher();

 private:
  Rng(std::uint64_t key, int /*tag*/) : key_(key) {}

  std::uint64_t key_;
  std::uint64_t counter_ = 0;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

// Fisher-Yates over an index container using rng.uniform_index.
template <typename Container>
void shuffle(Container& c, Rng& rng) {
  for (std::uint64_t i = c.size(); i > 1; --i) {
    std::uint64_t j = rng.uniform_index(i);
    auto tmp = c[i - 1];
    c[i - 1] = c[j];
    c[j] = tmp;
  }
}

}  // namespace alignscope
