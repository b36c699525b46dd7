#pragma once

#include <vector>

#include "unest/rng.hpp"
#include "unest/scope.hpp"
#include "unest/tensor.hpp"

namespace unest {

// FG-S+BG-L: structural attention on foreground queries, clipped local
// windows on background queries (the default hybrid).
// FG-S+BG-S: structural attention on both regions, background queries
// sharing the complement scope.
enum class AttentionMode { kFgStructuralBgLocal, kFgStructuralBgStructural };

struct AttentionParams {
  Tensor w_q, w_k, w_v, w_o;    // [K,K], heads are column slices of width K/n_heads
  Tensor ln1_gamma, ln1_beta;   // [K]
  Tensor ln2_gamma, ln2_beta;   // [K]
  Tensor mlp_w1, mlp_b1;        // [K,4K], [4K]
  Tensor mlp_w2, mlp_b2;        // [4K,K], [K]

  std::vector<Tensor*> parameters();
  std::vector<const Tensor*> parameters() const;
};

AttentionParams init_attention_params(int embed_dim, Rng& rng);

// Post-softmax rows captured per head for export and leakage checks: entry
// [h][q * n_tokens + j] is the weight query q puts on token j, exactly zero
// when j is outside q's scope.
struct AttentionTrace {
  int n_tokens = 0;
  std::vector<std::vector<double>> head_rows;
};

// Scope-masked multi-head self-attention over tokens [N,K]. Query q attends
// only to keys/values at scopes[q]; logits are scaled by 1/sqrt(d_head);
// head outputs are concatenated and projected by w_o. Scopes must be
// non-empty. grid_w maps (row,col) scope entries onto token rows
// (row * grid_w + col), so N must be grid_h * grid_w.
Tensor attend(const Tensor& tokens, const std::vector<Scope>& scopes,
              const AttentionParams& params, int n_heads, int grid_w,
              AttentionTrace* trace = nullptr);

struct StBlockConfig {
  int n_heads = 4;
  int window = 3;
  AttentionMode mode = AttentionMode::kFgStructuralBgLocal;
  double ln_eps = 1e-5;
};

// Per-query scopes from the mask partition. Foreground queries share the
// structural scope; background queries take local windows over the full
// token grid (mode FG-S+BG-L) or the shared background scope (FG-S+BG-S).
// An all-background mask degrades to local (or global) attention everywhere
// and an all-foreground mask to global attention, so no scope is ever empty.
std::vector<Scope> build_scopes(const PatchMask& mask,
                                const StBlockConfig& cfg);

// Pre-norm transformer block with dual-scope attention:
//   f' = SA(LN(f), S) + f,  f_out = MLP(LN(f')) + f'.
// Outputs land at their original positions, each written exactly once.
Tensor st_block(const Tensor& tokens, const PatchMask& mask,
                const StBlockConfig& cfg, const AttentionParams& params,
                AttentionTrace* trace = nullptr);

}  // namespace unest
