#pragma once

#include <cstdint>
#include <random>
#include <string_view>
#include <vector>

namespace unest {

// Splits one master seed into independent named streams ("data", "init",
// "shuffle", ...) so components can be re-seeded without consuming each
// other's draws.
std::uint64_t derive_seed(std::uint64_t master, std::string_view stream);
std::uint64_t derive_seed(std::uint64_t master, std::string_view stream,
                          std::uint64_t index);

// Deterministic RNG. The mt19937_64 sequence is pinned by the standard, and
// all transforms below are written out explicitly instead of using library
// distributions, whose output is implementation-defined.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }

  // Uniform on [0, 1), 53-bit mantissa.
  double uniform() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Box-Muller; the sine half of the pair is discarded so each call costs a
  // fixed two draws.
  double normal(double mean, double stddev);

  // Uniform integer on [0, n), rejection-sampled (no modulo bias).
  std::uint64_t uniform_int(std::uint64_t n);

  template <typename T>
  void shuffle(std::vector<T>& v) {
    if (v.size() < 2) return;
    for (std::size_t i = v.size() - 1; i > 0; --i) {
      const std::size_t j = static_cast<std::size_t>(uniform_int(i + 1));
      std::swap(v[i], v[j]);
    }
  }

 private:
  std::mt19937_64 engine_;
};

}  // namespace unest
