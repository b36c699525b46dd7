#include <doctest.h>

#include <cmath>

#include "oracles.hpp"
#include "unest/attention.hpp"
#include "unest/rng.hpp"

using namespace unest;

namespace {

Tensor random_tensor(const Shape& shape, Rng& rng, bool requires_grad = false) {
  std::vector<double> data(shape_numel(shape));
  for (double& v : data) v = rng.normal(0.0, 1.0);
  return Tensor::from_data(shape, std::move(data), requires_grad);
}

oracle::DenseBlockWeights dense_weights(const AttentionParams& p) {
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
  return w;
}

PatchMask random_mask(int gh, int gw, Rng& rng, double sigma = 0.5) {
  std::vector<double> probs(static_cast<std::size_t>(gh) * gw);
  for (double& p : probs) p = rng.uniform();
  return PatchMask::from_probs(gh, gw, probs, sigma);
}

std::vector<std::vector<bool>> full_allowance(int n) {
  return std::vector<std::vector<bool>>(static_cast<std::size_t>(n),
                                        std::vector<bool>(static_cast<std::size_t>(n), true));
}

}  // namespace

TEST_CASE("singleton scope returns the projected value row regardless of logits") {
  const int n = 6, k = 8;
  Rng rng(21);
  AttentionParams p = init_attention_params(k, rng);
  const Tensor tokens = random_tensor({n, k}, rng);
  const int target = 4;
  std::vector<Scope> scopes(n, Scope({{0, target}}));  // grid 1 x n
  const Tensor out = attend(tokens, scopes, p, 2, n);
  // Every query collapses onto token `target`: out = (v_target) w_o.
  const Tensor v = matmul(tokens, p.w_v);
  const Tensor expected = matmul(gather_rows(v, {target}), p.w_o);
  for (int q = 0; q < n; ++q) {
    for (int j = 0; j < k; ++j) {
      CHECK(out.data()[static_cast<std::size_t>(q) * k + j] ==
            doctest::Approx(expected.data()[static_cast<std::size_t>(j)]).epsilon(1e-12));
    }
  }
}

TEST_CASE("zero query projection averages values uniformly over the scope") {
  const int n = 4, k = 4;
  Rng rng(22);
  AttentionParams p = init_attention_params(k, rng);
  p.w_q = Tensor::zeros({k, k}, true);  // all logits equal
  const Tensor tokens = random_tensor({n, k}, rng);
  std::vector<Scope> scopes(static_cast<std::size_t>(n), scope_global(1, n));
  const Tensor out = attend(tokens, scopes, p, 2, n);
  const Tensor v = matmul(tokens, p.w_v);
  std::vector<double> mean_v(static_cast<std::size_t>(k), 0.0);
  for (int t = 0; t < n; ++t) {
    for (int j = 0; j < k; ++j) {
      mean_v[static_cast<std::size_t>(j)] += v.data()[static_cast<std::size_t>(t) * k + j] / n;
    }
  }
  const Tensor expected = matmul(Tensor::from_data({1, k}, mean_v), p.w_o);
  for (int q = 0; q < n; ++q) {
    for (int j = 0; j < k; ++j) {
      CHECK(out.data()[static_cast<std::size_t>(q) * k + j] ==
            doctest::Approx(expected.data()[static_cast<std::size_t>(j)]).epsilon(1e-11));
    }
  }
}

TEST_CASE("attend with full scopes matches the dense reference") {
  Rng rng(23);
  for (const int g : {2, 3}) {
    const int n = g * g;
    const int k = 8;
    AttentionParams p = init_attention_params(k, rng);
    const Tensor tokens = random_tensor({n, k}, rng);
    std::vector<Scope> scopes(static_cast<std::size_t>(n), scope_global(g, g));
    const Tensor out = attend(tokens, scopes, p, 4, g);
    const std::vector<double> ref = oracle::dense_masked_attention(
        tokens.data(), n, k, full_allowance(n), 4, p.w_q.data(), p.w_k.data(),
        p.w_v.data(), p.w_o.data());
    for (std::size_t i = 0; i < ref.size(); ++i) {
      CHECK(std::abs(out.data()[i] - ref[i]) < 1e-10);
    }
  }
}

TEST_CASE("attend rejects empty scopes") {
  Rng rng(24);
  AttentionParams p = init_attention_params(4, rng);
  const Tensor tokens = random_tensor({4, 4}, rng);
  std::vector<Scope> scopes(4, scope_global(2, 2));
  scopes[2] = Scope();
  CHECK_THROWS_WITH_AS(attend(tokens, scopes, p, 2, 2),
                       doctest::Contains("empty scope"), std::invalid_argument);
}

TEST_CASE("st_block with an all-foreground mask equals a plain global block") {
  Rng rng(25);
  const int g = 4, k = 16;
  const int n = g * g;
  AttentionParams p = init_attention_params(k, rng);
  const Tensor tokens = random_tensor({n, k}, rng);
  const PatchMask all_fg = PatchMask::all_foreground(g, g);
  StBlockConfig cfg;
  cfg.n_heads = 4;
  cfg.window = 3;
  const Tensor out = st_block(tokens, all_fg, cfg, p);
  const std::vector<double> ref = oracle::dense_block(
      tokens.data(), n, k, full_allowance(n), 4, dense_weights(p));
  for (std::size_t i = 0; i < ref.size(); ++i) {
    CHECK(std::abs(out.data()[i] - ref[i]) <= 1e-12);
  }
}

TEST_CASE("all-background masks degrade to local windows, covering windows to global") {
  Rng rng(26);
  const int g = 3, k = 8;
  const int n = g * g;
  AttentionParams p = init_attention_params(k, rng);
  const Tensor tokens = random_tensor({n, k}, rng);
  const PatchMask none = PatchMask::from_probs(g, g, std::vector<double>(9, 0.0), 0.5);
  StBlockConfig cfg;
  cfg.n_heads = 2;
  cfg.window = 2 * g - 1;  // covers the grid from every query
  const Tensor out = st_block(tokens, none, cfg, p);
  const std::vector<double> ref = oracle::dense_block(
      tokens.data(), n, k, full_allowance(n), 2, dense_weights(p));
  for (std::size_t i = 0; i < ref.size(); ++i) {
    CHECK(std::abs(out.data()[i] - ref[i]) <= 1e-12);
  }
}

TEST_CASE("st_block matches the dense-mask oracle in both modes") {
  Rng rng(27);
  for (int trial = 0; trial < 25; ++trial) {
    const int gh = 2 + static_cast<int>(rng.uniform_int(4));
    const int gw = 2 + static_cast<int>(rng.uniform_int(4));
    const int n = gh * gw;
    const int k = 8;
    AttentionParams p = init_attention_params(k, rng);
    const Tensor tokens = random_tensor({n, k}, rng);
    const PatchMask mask = random_mask(gh, gw, rng);
    for (const bool bg_structural : {false, true}) {
      // Degenerate partitions fall back per the block contract; the oracle
      // allowance below encodes the non-degenerate rules only.
      if (mask.count_foreground() == 0 ||
          mask.count_foreground() == static_cast<int>(mask.size())) {
        continue;
      }
      StBlockConfig cfg;
      cfg.n_heads = 2;
      cfg.window = 3;
      cfg.mode = bg_structural ? AttentionMode::kFgStructuralBgStructural
                               : AttentionMode::kFgStructuralBgLocal;
      const Tensor out = st_block(tokens, mask, cfg, p);
      const auto allowed = oracle::allowance_from_mask(mask.probs, gh, gw, 0.5,
                                                       cfg.window, bg_structural);
      const std::vector<double> ref = oracle::dense_block(
          tokens.data(), n, k, allowed, cfg.n_heads, dense_weights(p));
      for (std::size_t i = 0; i < ref.size(); ++i) {
        REQUIRE(std::abs(out.data()[i] - ref[i]) < 1e-10);
      }
    }
  }
}

TEST_CASE("ablation mode fg-s+bg-l is the default block bit for bit") {
  Rng rng(28);
  const int g = 4, k = 8;
  AttentionParams p = init_attention_params(k, rng);
  const Tensor tokens = random_tensor({g * g, k}, rng);
  const PatchMask mask = random_mask(g, g, rng);
  StBlockConfig a;
  a.n_heads = 2;
  StBlockConfig b = a;
  b.mode = AttentionMode::kFgStructuralBgLocal;
  CHECK(st_block(tokens, mask, a, p).data() == st_block(tokens, mask, b, p).data());
}

TEST_CASE("no attention weight leaks outside any scope") {
  Rng rng(29);
  for (int trial = 0; trial < 20; ++trial) {
    const int g = 8;
    const int n = g * g;
    const int k = 8;
    AttentionParams p = init_attention_params(k, rng);
    const Tensor tokens = random_tensor({n, k}, rng);
    const PatchMask mask = random_mask(g, g, rng);
    StBlockConfig cfg;
    cfg.n_heads = 2;
    const std::vector<Scope> scopes = build_scopes(mask, cfg);
    AttentionTrace trace;
    attend(tokens, scopes, p, cfg.n_heads, g, &trace);
    for (const auto& rows : trace.head_rows) {
      for (int q = 0; q < n; ++q) {
        std::vector<bool> in_scope(static_cast<std::size_t>(n), false);
        for (const int f : scopes[static_cast<std::size_t>(q)].flat(g)) {
          in_scope[static_cast<std::size_t>(f)] = true;
        }
        double total = 0.0;
        for (int j = 0; j < n; ++j) {
          const double w = rows[static_cast<std::size_t>(q) * n + j];
          if (!in_scope[static_cast<std::size_t>(j)]) {
            REQUIRE(w == 0.0);  // exactly zero, not merely small
          }
          total += w;
        }
        REQUIRE(std::abs(total - 1.0) <= 1e-9);
      }
    }
  }
}

TEST_CASE("consolidation is index-based: permuting the token order of a scope changes nothing") {
  Rng rng(30);
  const int g = 4, k = 8;
  const int n = g * g;
  AttentionParams p = init_attention_params(k, rng);
  const Tensor tokens = random_tensor({n, k}, rng);
  const PatchMask mask = random_mask(g, g, rng);
  StBlockConfig cfg;
  cfg.n_heads = 2;
  std::vector<Scope> scopes = build_scopes(mask, cfg);
  const Tensor base = attend(tokens, scopes, p, cfg.n_heads, g);

  // Reverse the entry order inside every background scope; softmax weights
  // travel with their indices, so outputs are unchanged up to summation
  // order.
  std::vector<Scope> permuted = scopes;
  for (int q = 0; q < n; ++q) {
    const int qi = q / g;
    const int qj = q % g;
    if (mask.is_foreground(qi, qj)) continue;
    std::vector<TokenIndex> entries = scopes[static_cast<std::size_t>(q)].entries();
    std::reverse(entries.begin(), entries.end());
    permuted[static_cast<std::size_t>(q)] = Scope(std::move(entries));
  }
  const Tensor out = attend(tokens, permuted, p, cfg.n_heads, g);
  for (std::size_t i = 0; i < base.numel(); ++i) {
    CHECK(out.data()[i] == doctest::Approx(base.data()[i]).epsilon(1e-12));
  }
}

TEST_CASE("block gradients pass the finite-difference check") {
  Rng rng(31);
  const int g = 3, k = 8;
  const int n = g * g;
  AttentionParams p = init_attention_params(k, rng);
  const PatchMask mask = random_mask(g, g, rng);
  StBlockConfig cfg;
  cfg.n_heads = 2;
  Tensor tokens = random_tensor({n, k}, rng, true);
  // Smooth projection at O(0.1) magnitude: the check's 1e-8 relative floor
  // assumes a loss of roughly unit scale, and central differences of a large
  // loss drown near-zero gradients in rounding noise.
  std::vector<double> rv(static_cast<std::size_t>(n) * k);
  for (double& v : rv) v = rng.normal(0.0, 1.0);
  const Tensor proj = Tensor::from_data({n, k}, rv);
  const auto functional = [&](const Tensor& t) {
    return mul_scalar(sum(mul(st_block(t, mask, cfg, p), proj)), 0.01);
  };
  const double err_tokens = grad_check(functional, tokens);
  CHECK(err_tokens < 1e-4);

  const Tensor fixed = tokens.detach();
  const double err_params = grad_check_params(
      [&]() { return functional(fixed); }, p.parameters());
  CHECK(err_params < 1e-4);
}
