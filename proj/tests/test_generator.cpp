#include <doctest.h>

#include <cmath>

#include "oracles.hpp"
#include "unest/generator.hpp"
#include "unest/rng.hpp"

using namespace unest;

namespace {

Tensor random_image(int side, Rng& rng) {
  std::vector<double> data(static_cast<std::size_t>(side) * side);
  for (double& v : data) v = rng.uniform(-1.0, 1.0);
  return Tensor::from_data({1, side, side}, std::move(data));
}

}  // namespace

TEST_CASE("patch embedding shape arithmetic") {
  Rng rng(40);
  const Tensor x = random_image(8, rng);
  const Tensor patches = extract_patches(x, 4);
  CHECK(patches.shape() == Shape{4, 16});
  // Zero projection and positional embedding give zero tokens.
  const Tensor tokens = matmul(patches, Tensor::zeros({16, 8}));
  CHECK(tokens.data() == std::vector<double>(32, 0.0));
  // A constant image yields identical tokens under any projection.
  const Tensor constant = Tensor::full({1, 8, 8}, 0.3);
  std::vector<double> theta(16 * 8);
  for (double& v : theta) v = rng.normal(0.0, 1.0);
  const Tensor emb = matmul(extract_patches(constant, 4),
                            Tensor::from_data({16, 8}, theta));
  for (int t = 1; t < 4; ++t) {
    for (int j = 0; j < 8; ++j) {
      CHECK(emb.data()[static_cast<std::size_t>(t) * 8 + j] ==
            doctest::Approx(emb.data()[static_cast<std::size_t>(j)]).epsilon(1e-12));
    }
  }
}

TEST_CASE("output shape equals input shape across sides and patch sizes") {
  for (const int side : {16, 32}) {
    for (const int patch : {4, 8}) {
      UNestConfig cfg;
      cfg.image_side = side;
      cfg.patch = patch;
      cfg.embed_dim = 16;
      cfg.depth = 1;
      cfg.n_heads = 2;
      cfg.stem_channels = 2;
      Rng rng(41);
      const UNestParams params = init_unest_params(cfg, rng);
      Rng img_rng(42);
      const Tensor x = random_image(side, img_rng);
      const GeneratorOutput out = unest_forward(x, params, cfg);
      CHECK(out.image.shape() == Shape{1, side, side});
      CHECK(out.mask.grid_h == side / patch);
      for (const double v : out.image.data()) {
        CHECK(v > -1.0);
        CHECK(v < 1.0);
      }
    }
  }
}

TEST_CASE("forward is deterministic given parameters") {
  UNestConfig cfg;
  cfg.image_side = 16;
  cfg.patch = 4;
  cfg.embed_dim = 8;
  cfg.depth = 2;
  cfg.n_heads = 2;
  cfg.stem_channels = 2;
  Rng rng(43);
  const UNestParams params = init_unest_params(cfg, rng);
  Rng img_rng(44);
  const Tensor x = random_image(16, img_rng);
  const GeneratorOutput a = unest_forward(x, params, cfg);
  const GeneratorOutput b = unest_forward(x, params, cfg);
  CHECK(a.image.data() == b.image.data());
  CHECK(a.mask_probs.data() == b.mask_probs.data());
}

TEST_CASE("zeroed classifier marks everything background, saturated bias everything foreground") {
  UNestConfig cfg;
  cfg.image_side = 16;
  cfg.patch = 4;
  cfg.embed_dim = 8;
  cfg.depth = 1;
  cfg.n_heads = 2;
  cfg.stem_channels = 2;
  Rng rng(45);
  UNestParams params = init_unest_params(cfg, rng);
  params.cls_w = Tensor::zeros({8, 1}, true);
  params.cls_b = Tensor::zeros({1}, true);
  Rng img_rng(46);
  const Tensor x = random_image(16, img_rng);
  const GeneratorOutput neutral = unest_forward(x, params, cfg);
  for (const double p : neutral.mask_probs.data()) CHECK(p == 0.5);
  CHECK(neutral.mask.count_foreground() == 0);  // strict > sigma

  params.cls_b = Tensor::from_data({1}, {8.0}, true);
  const GeneratorOutput saturated = unest_forward(x, params, cfg);
  CHECK(saturated.mask.count_foreground() == 16);
  for (const double p : saturated.mask_probs.data()) {
    CHECK(p > 0.0);
    CHECK(p < 1.0);
  }
}

TEST_CASE("ground-truth scope source requires a mask and swaps cleanly") {
  UNestConfig cfg;
  cfg.image_side = 16;
  cfg.patch = 4;
  cfg.embed_dim = 8;
  cfg.depth = 1;
  cfg.n_heads = 2;
  cfg.stem_channels = 2;
  Rng rng(47);
  const UNestParams params = init_unest_params(cfg, rng);
  Rng img_rng(48);
  const Tensor x = random_image(16, img_rng);
  CHECK_THROWS_AS(unest_forward(x, params, cfg, ScopeSource::kGroundTruth, nullptr),
                  std::invalid_argument);
  const PatchMask gt = PatchMask::all_foreground(4, 4);
  const GeneratorOutput out = unest_forward(x, params, cfg, ScopeSource::kGroundTruth, &gt);
  CHECK(out.image.shape() == Shape{1, 16, 16});
}

TEST_CASE("token trunk with an all-foreground mask equals a stacked dense global encoder") {
  UNestConfig cfg;
  cfg.image_side = 16;
  cfg.patch = 4;
  cfg.embed_dim = 8;
  cfg.depth = 3;
  cfg.n_heads = 2;
  cfg.stem_channels = 2;
  Rng rng(49);
  const UNestParams params = init_unest_params(cfg, rng);
  Rng img_rng(50);
  const Tensor x = random_image(16, img_rng);

  // Library trunk.
  const Tensor tokens0 =
      add(matmul(extract_patches(x, cfg.patch), params.patch_proj), params.pos_embed);
  const PatchMask all_fg = PatchMask::all_foreground(4, 4);
  StBlockConfig bc;
  bc.n_heads = cfg.n_heads;
  bc.window = cfg.window;
  Tensor trunk = tokens0;
  for (int t = 0; t < cfg.depth; ++t) {
    trunk = st_block(trunk, all_fg, bc, params.blocks[static_cast<std::size_t>(t)]);
  }

  // Dense reference encoder with identical weights and full attention.
  const int n = cfg.n_tokens();
  std::vector<double> ref = tokens0.data();
  const auto allowed = std::vector<std::vector<bool>>(
      static_cast<std::size_t>(n), std::vector<bool>(static_cast<std::size_t>(n), true));
  for (int t = 0; t < cfg.depth; ++t) {
    const AttentionParams& p = params.blocks[static_cast<std::size_t>(t)];
    oracle::DenseBlockWeights w;
    w.wq = p.w_q.data();
    w.wk = p.w_k.data();
    w.wv = p.w_v.data();
    w.wo = p.w_o.data();
    w.ln1_g = p.ln1_gamma.data();
    w.ln1_b = p.ln1_beta.data();
    w.ln2_g = p.ln2_gamma.data();
    w.ln2_b = p.ln2_beta.data();
    w.w1 = p.mlp_w1.data();
    w.b1 = p.mlp_b1.data();
    w.w2 = p.mlp_w2.data();
    w.b2 = p.mlp_b2.data();
    ref = oracle::dense_block(ref, n, cfg.embed_dim, allowed, cfg.n_heads, w);
  }
  for (std::size_t i = 0; i < ref.size(); ++i) {
    REQUIRE(std::abs(trunk.data()[i] - ref[i]) <= 1e-10);
  }
}

TEST_CASE("attention trace rows from a forward pass sum to one") {
  UNestConfig cfg;
  cfg.image_side = 16;
  cfg.patch = 4;
  cfg.embed_dim = 8;
  cfg.depth = 2;
  cfg.n_heads = 2;
  cfg.stem_channels = 2;
  Rng rng(51);
  const UNestParams params = init_unest_params(cfg, rng);
  Rng img_rng(52);
  const Tensor x = random_image(16, img_rng);
  ForwardTrace trace;
  unest_forward(x, params, cfg, ScopeSource::kPredicted, nullptr, &trace);
  REQUIRE(trace.blocks.size() == 2);
  for (const AttentionTrace& bt : trace.blocks) {
    REQUIRE(bt.n_tokens == 16);
    for (const auto& rows : bt.head_rows) {
      for (int q = 0; q < 16; ++q) {
        double total = 0.0;
        for (int j = 0; j < 16; ++j) total += rows[static_cast<std::size_t>(q) * 16 + j];
        CHECK(std::abs(total - 1.0) <= 1e-9);
      }
    }
  }
}

TEST_CASE("end-to-end input gradient passes the finite-difference check") {
  UNestConfig cfg;
  cfg.image_side = 16;
  cfg.patch = 4;
  cfg.embed_dim = 8;
  cfg.depth = 2;
  cfg.n_heads = 2;
  cfg.stem_channels = 2;
  Rng rng(53);
  const UNestParams params = init_unest_params(cfg, rng);
  Rng img_rng(54);
  Tensor x = random_image(16, img_rng);
  x.set_requires_grad(true);
  const PatchMask gt = PatchMask::all_foreground(4, 4);
  std::vector<double> rv(16 * 16);
  for (double& v : rv) v = img_rng.normal(0.0, 1.0);
  const Tensor proj = Tensor::from_data({1, 16, 16}, rv);
  const double err = grad_check(
      [&](const Tensor& t) {
        const GeneratorOutput out =
            unest_forward(t, params, cfg, ScopeSource::kGroundTruth, &gt);
        return mul_scalar(sum(mul(out.image, proj)), 0.1);
      },
      x);
  CHECK(err < 1e-4);
}
