#include <benchmark/benchmark.h>

#include "unest/rng.hpp"
#include "unest/tensor.hpp"

namespace {

unest::Tensor random_tensor(const unest::Shape& shape, unest::Rng& rng,
                            bool requires_grad = false) {
  std::vector<double> data(unest::shape_numel(shape));
  for (double& v : data) v = rng.normal(0.0, 1.0);
  return unest::Tensor::from_data(shape, std::move(data), requires_grad);
}

void BM_matmul(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  unest::Rng rng(1);
  const unest::Tensor a = random_tensor({n, n}, rng);
  const unest::Tensor b = random_tensor({n, n}, rng);
  for (auto _ : state) {
    benchmark::DoNotOptimize(unest::matmul(a, b).data().data());
  }
  state.SetItemsProcessed(state.iterations() * static_cast<long>(n) * n * n);
}
BENCHMARK(BM_matmul)->Arg(64)->Arg(128);

void BM_matmul_backward(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  unest::Rng rng(2);
  unest::Tensor a = random_tensor({n, n}, rng, true);
  const unest::Tensor b = random_tensor({n, n}, rng);
  for (auto _ : state) {
    a.zero_grad();
    unest::backward(unest::sum(unest::matmul(a, b)));
    benchmark::DoNotOptimize(a.grad().data());
  }
}
BENCHMARK(BM_matmul_backward)->Arg(64);

void BM_conv2d(benchmark::State& state) {
  const int side = static_cast<int>(state.range(0));
  const int c = static_cast<int>(state.range(1));
  unest::Rng rng(3);
  const unest::Tensor x = random_tensor({c, side, side}, rng);
  const unest::Tensor w = random_tensor({c, c, 3, 3}, rng);
  for (auto _ : state) {
    benchmark::DoNotOptimize(unest::conv2d(x, w, 1, 1).data().data());
  }
}
BENCHMARK(BM_conv2d)->Args({64, 8})->Args({32, 16});

void BM_deconv2d(benchmark::State& state) {
  const int side = static_cast<int>(state.range(0));
  unest::Rng rng(4);
  const unest::Tensor x = random_tensor({16, side, side}, rng);
  const unest::Tensor w = random_tensor({16, 8, 2, 2}, rng);
  for (auto _ : state) {
    benchmark::DoNotOptimize(unest::deconv2d(x, w).data().data());
  }
}
BENCHMARK(BM_deconv2d)->Arg(16)->Arg(32);

}  // namespace
