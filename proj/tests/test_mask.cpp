#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "oracles.hpp"
#include "unest/mask.hpp"
#include "unest/rng.hpp"
#include "unest/synth.hpp"

using namespace unest;
namespace fs = std::filesystem;

TEST_CASE("extract_foreground keeps only the largest blob") {
  ImageGrid img(6, 8, 0.0);
  // 3x3 blob (area 9) and a 5-pixel strip.
  for (int r = 0; r < 3; ++r) {
    for (int c = 0; c < 3; ++c) img.at(r, c) = 0.8;
  }
  for (int c = 0; c < 5; ++c) img.at(5, c + 3) = 0.9;
  const PixelMask m = extract_foreground(img, 0.5);
  int area = 0;
  for (const auto v : m.values) area += v;
  CHECK(area == 9);
  CHECK(m.at(0, 0) == 1);
  CHECK(m.at(5, 4) == 0);
}

TEST_CASE("uniformly bright image is one component") {
  const ImageGrid img(4, 4, 0.7);
  const PixelMask m = extract_foreground(img, 0.5);
  for (const auto v : m.values) CHECK(v == 1);
}

TEST_CASE("all-dark image raises the empty-foreground error") {
  const ImageGrid img(4, 4, 0.0);
  CHECK_THROWS_WITH_AS(extract_foreground(img, 0.5), doctest::Contains("tau"),
                       std::runtime_error);
  CHECK_THROWS_AS(extract_foreground(img, 1.5), std::invalid_argument);
}

TEST_CASE("largest component matches the brute-force oracle on random images") {
  Rng rng(13);
  for (int trial = 0; trial < 100; ++trial) {
    const int h = 3 + static_cast<int>(rng.uniform_int(8));
    const int w = 3 + static_cast<int>(rng.uniform_int(8));
    ImageGrid img(h, w);
    bool any = false;
    for (double& v : img.pixels) {
      v = rng.uniform() < 0.45 ? 0.9 : 0.05;
      any = any || v > 0.5;
    }
    if (!any) img.at(0, 0) = 0.9;
    const PixelMask got = extract_foreground(img, 0.5);
    const std::vector<std::uint8_t> expected =
        oracle::largest_component_mask(img.pixels, h, w, 0.5);
    REQUIRE(got.values == expected);
  }
}

TEST_CASE("patch pooling thresholds block means inclusively") {
  // All-ones pixel mask pools to an all-ones grid.
  PixelMask ones(4, 4);
  std::fill(ones.values.begin(), ones.values.end(), 1);
  const PatchMask pooled = pool_to_patchgrid(ones, 2);
  CHECK(pooled.count_foreground() == 4);

  // Exactly half foreground with rho=0.5 is foreground (inclusive bound).
  PixelMask half(2, 2);
  half.at(0, 0) = 1;
  half.at(0, 1) = 1;
  CHECK(pool_to_patchgrid(half, 2).count_foreground() == 1);

  // Pixel-level checkerboard means are exactly 0.5 everywhere.
  PixelMask checker(4, 4);
  for (int r = 0; r < 4; ++r) {
    for (int c = 0; c < 4; ++c) checker.at(r, c) = (r + c) % 2;
  }
  const PatchMask board = pool_to_patchgrid(checker, 2);
  CHECK(board.count_foreground() == 4);

  CHECK_THROWS_AS(pool_to_patchgrid(PixelMask(5, 4), 2), std::invalid_argument);
}

TEST_CASE("pooling is monotone in the pixel mask") {
  Rng rng(14);
  for (int trial = 0; trial < 50; ++trial) {
    PixelMask base(8, 8);
    for (auto& v : base.values) v = rng.uniform() < 0.4 ? 1 : 0;
    PixelMask grown = base;
    for (auto& v : grown.values) {
      if (rng.uniform() < 0.2) v = 1;
    }
    const PatchMask pooled_base = pool_to_patchgrid(base, 4);
    const PatchMask pooled_grown = pool_to_patchgrid(grown, 4);
    for (std::size_t i = 0; i < pooled_base.binary.size(); ++i) {
      if (pooled_base.binary[i]) CHECK(pooled_grown.binary[i] == 1);
    }
  }
}

TEST_CASE("mask round trip through UNTF is lossless") {
  Rng rng(15);
  PatchMask m(4, 6);
  for (std::size_t i = 0; i < m.size(); ++i) {
    const bool fg = rng.uniform() < 0.5;
    m.probs[i] = fg ? 1.0 : 0.0;
    m.binary[i] = fg ? 1 : 0;
  }
  const std::string dir = "mask_rt_tmp";
  fs::create_directories(dir);
  const std::string p = dir + "/m.untf";
  save_mask(m, p);
  const PatchMask back = load_mask(p);
  CHECK(back.grid_h == 4);
  CHECK(back.grid_w == 6);
  CHECK(back.probs == m.probs);
  CHECK(back.binary == m.binary);

  PatchMask empty(8, 8);
  save_mask(empty, p);
  const PatchMask back_empty = load_mask(p);
  CHECK(back_empty.count_foreground() == 0);

  {
    std::ifstream is(p, std::ios::binary);
    std::vector<char> bytes((std::istreambuf_iterator<char>(is)),
                            std::istreambuf_iterator<char>());
    std::ofstream os(dir + "/broken.untf", std::ios::binary);
    os.write(bytes.data(), static_cast<std::streamsize>(bytes.size() / 2));
  }
  CHECK_THROWS_WITH_AS(load_mask(dir + "/broken.untf"),
                       doctest::Contains("malformed"), std::runtime_error);
  fs::remove_all(dir);
}

TEST_CASE("oracle masks agree with generator ground truth on synthetic data") {
  SynthConfig cfg;
  cfg.n_per_domain = 60;
  cfg.side = 64;
  cfg.patch = 8;
  cfg.seed = 23;
  const UnpairedDataset ds = synth_dataset(cfg);
  std::size_t agree = 0;
  std::size_t total = 0;
  const auto scan = [&](const DatasetPart& part) {
    for (std::size_t i = 0; i < part.images.size(); ++i) {
      const PatchMask oracle_mask =
          pool_to_patchgrid(extract_foreground(part.images[i], 0.1), cfg.patch);
      const PatchMask& gt = part.masks[i];
      for (std::size_t j = 0; j < gt.binary.size(); ++j) {
        agree += oracle_mask.binary[j] == gt.binary[j] ? 1 : 0;
        ++total;
      }
    }
  };
  scan(ds.train_x);
  scan(ds.train_y);
  CHECK(static_cast<double>(agree) / static_cast<double>(total) >= 0.95);
}
