#include <benchmark/benchmark.h>

#include "unest/attention.hpp"
#include "unest/rng.hpp"

namespace {

// Half-foreground mask: the block splits into one structural group plus
// per-query local windows, the shape training actually sees.
unest::PatchMask half_mask(int gh, int gw) {
  std::vector<double> probs(static_cast<std::size_t>(gh) * gw, 0.0);
  for (int i = 0; i < gh; ++i) {
    for (int j = 0; j < gw; ++j) {
      const double di = i - gh / 2.0 + 0.5;
      const double dj = j - gw / 2.0 + 0.5;
      if (di * di + dj * dj < gh * gw / 6.0) {
        probs[static_cast<std::size_t>(i) * gw + j] = 1.0;
      }
    }
  }
  return unest::PatchMask::from_probs(gh, gw, probs, 0.5);
}

void BM_st_block_forward(benchmark::State& state) {
  const int g = static_cast<int>(state.range(0));
  const int k = static_cast<int>(state.range(1));
  unest::Rng rng(5);
  unest::AttentionParams params = unest::init_attention_params(k, rng);
  std::vector<double> data(static_cast<std::size_t>(g) * g * k);
  for (double& v : data) v = rng.normal(0.0, 1.0);
  const unest::Tensor tokens = unest::Tensor::from_data({g * g, k}, data);
  const unest::PatchMask mask = half_mask(g, g);
  unest::StBlockConfig cfg;
  cfg.n_heads = 4;
  for (auto _ : state) {
    benchmark::DoNotOptimize(
        unest::st_block(tokens, mask, cfg, params).data().data());
  }
}
BENCHMARK(BM_st_block_forward)->Args({8, 16})->Args({8, 64})->Args({16, 64});

void BM_st_block_backward(benchmark::State& state) {
  const int g = static_cast<int>(state.range(0));
  const int k = static_cast<int>(state.range(1));
  unest::Rng rng(6);
  unest::AttentionParams params = unest::init_attention_params(k, rng);
  std::vector<double> data(static_cast<std::size_t>(g) * g * k);
  for (double& v : data) v = rng.normal(0.0, 1.0);
  const unest::Tensor tokens = unest::Tensor::from_data({g * g, k}, data);
  const unest::PatchMask mask = half_mask(g, g);
  unest::StBlockConfig cfg;
  cfg.n_heads = 4;
  for (auto _ : state) {
    unest::zero_grads(params.parameters());
    unest::backward(unest::sum(unest::st_block(tokens, mask, cfg, params)));
    benchmark::DoNotOptimize(params.w_q.grad().data());
  }
}
BENCHMARK(BM_st_block_backward)->Args({8, 16})->Args({8, 64});

}  // namespace
