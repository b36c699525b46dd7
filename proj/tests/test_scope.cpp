#include <doctest.h>

#include "oracles.hpp"
#include "unest/rng.hpp"
#include "unest/scope.hpp"

using namespace unest;

namespace {

std::vector<std::pair<int, int>> as_pairs(const Scope& s) {
  std::vector<std::pair<int, int>> out;
  for (const TokenIndex& e : s.entries()) out.emplace_back(e.row, e.col);
  return out;
}

}  // namespace

TEST_CASE("global scope enumerates the grid row-major") {
  CHECK(as_pairs(scope_global(2, 2)) ==
        std::vector<std::pair<int, int>>{{0, 0}, {0, 1}, {1, 0}, {1, 1}});
  CHECK(as_pairs(scope_global(1, 1)) == std::vector<std::pair<int, int>>{{0, 0}});
  Rng rng(16);
  for (int trial = 0; trial < 20; ++trial) {
    const int h = 1 + static_cast<int>(rng.uniform_int(7));
    const int w = 1 + static_cast<int>(rng.uniform_int(7));
    CHECK(scope_global(h, w).size() == static_cast<std::size_t>(h) * w);
  }
  CHECK_THROWS_AS(scope_global(0, 3), std::invalid_argument);
}

TEST_CASE("local windows clip at the boundary") {
  CHECK(scope_local({2, 2}, 3, 5, 5).size() == 9);
  CHECK(as_pairs(scope_local({0, 0}, 3, 5, 5)) ==
        std::vector<std::pair<int, int>>{{0, 0}, {0, 1}, {1, 0}, {1, 1}});
  CHECK(scope_local({2, 2}, 9, 5, 5) == scope_global(5, 5));
  CHECK_THROWS_AS(scope_local({0, 0}, 2, 5, 5), std::invalid_argument);
  CHECK_THROWS_AS(scope_local({5, 0}, 3, 5, 5), std::out_of_range);
}

TEST_CASE("structural scope keeps strictly-above-threshold entries") {
  const PatchMask m = PatchMask::from_probs(2, 2, {0.9, 0.1, 0.6, 0.4}, 0.5);
  CHECK(as_pairs(scope_structural(m)) ==
        std::vector<std::pair<int, int>>{{0, 0}, {1, 0}});

  const PatchMask all = PatchMask::from_probs(3, 3, std::vector<double>(9, 1.0), 0.5);
  CHECK(scope_structural(all) == scope_global(3, 3));

  // Probability exactly at sigma goes to the background.
  const PatchMask edge = PatchMask::from_probs(1, 2, {0.5, 0.7}, 0.5);
  CHECK(as_pairs(scope_structural(edge)) ==
        std::vector<std::pair<int, int>>{{0, 1}});
  CHECK(as_pairs(scope_background(edge)) ==
        std::vector<std::pair<int, int>>{{0, 0}});
}

TEST_CASE("scope constructors agree with set-builder enumeration everywhere") {
  // Exhaustive: all grids up to 6x6, all odd windows, three thresholds,
  // randomized masks.
  Rng rng(17);
  for (int h = 1; h <= 6; ++h) {
    for (int w = 1; w <= 6; ++w) {
      CHECK(as_pairs(scope_global(h, w)) == oracle::scope_global(h, w));
      for (int m = 1; m <= 2 * std::max(h, w) - 1; m += 2) {
        for (int qi = 0; qi < h; ++qi) {
          for (int qj = 0; qj < w; ++qj) {
            REQUIRE(as_pairs(scope_local({qi, qj}, m, h, w)) ==
                    oracle::scope_local(qi, qj, m, h, w));
          }
        }
      }
      for (const double sigma : {0.25, 0.5, 0.75}) {
        for (int trial = 0; trial < 30; ++trial) {
          std::vector<double> probs(static_cast<std::size_t>(h) * w);
          for (double& p : probs) p = rng.uniform();
          const PatchMask mask = PatchMask::from_probs(h, w, probs, sigma);
          REQUIRE(as_pairs(scope_structural(mask)) ==
                  oracle::scope_structural(probs, h, w, sigma));
        }
      }
    }
  }
}
