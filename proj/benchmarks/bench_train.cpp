#include <benchmark/benchmark.h>

#include "unest/synth.hpp"
#include "unest/train.hpp"

namespace {

void BM_train_step(benchmark::State& state) {
  const int embed = static_cast<int>(state.range(0));
  unest::SynthConfig synth;
  synth.n_per_domain = 10;
  synth.side = 64;
  synth.patch = 8;
  synth.seed = 7;
  const unest::UnpairedDataset ds = unest::synth_dataset(synth);

  unest::TrainConfig cfg;
  cfg.gen.image_side = 64;
  cfg.gen.patch = 8;
  cfg.gen.embed_dim = embed;
  cfg.gen.depth = 2;
  cfg.gen.n_heads = 4;
  cfg.gen.stem_channels = 4;
  cfg.disc_channels = 8;
  cfg.batch_size = 4;
  cfg.epochs = 1;
  unest::TrainState ts = unest::init_train_state(cfg);

  unest::Batch bx, by;
  for (int e = 0; e < cfg.batch_size; ++e) {
    bx.images.push_back(&ds.train_x.images[static_cast<std::size_t>(e)]);
    bx.masks.push_back(&ds.train_x.masks[static_cast<std::size_t>(e)]);
    by.images.push_back(&ds.train_y.images[static_cast<std::size_t>(e)]);
    by.masks.push_back(&ds.train_y.masks[static_cast<std::size_t>(e)]);
  }
  for (auto _ : state) {
    benchmark::DoNotOptimize(unest::train_step(bx, by, ts, 1e-4).total);
  }
}
BENCHMARK(BM_train_step)->Arg(16)->Arg(32)->Unit(benchmark::kMillisecond);

}  // namespace
