#pragma once

#include <string>
#include <utility>
#include <vector>

#include "unest/attention.hpp"
#include "unest/image.hpp"
#include "unest/mask.hpp"
#include "unest/rng.hpp"
#include "unest/tensor.hpp"

namespace unest {

enum class ScopeSource { kPredicted, kGroundTruth };

struct UNestConfig {
  int image_side = 64;
  int patch = 8;       // power of two; the decoder runs log2(patch) stages
  int embed_dim = 64;  // divisible by n_heads and by 2^stages
  int depth = 4;
  int n_heads = 4;
  int window = 3;
  double sigma = 0.5;
  AttentionMode mode = AttentionMode::kFgStructuralBgLocal;
  int stem_channels = 8;

  int grid_h() const { return image_side / patch; }
  int grid_w() const { return image_side / patch; }
  int n_tokens() const { return grid_h() * grid_w(); }
  int patch_dim() const { return patch * patch; }
  int stages() const;  // log2(patch)
  void validate() const;
};

struct UNestParams {
  Tensor patch_proj;  // [p*p, K]
  Tensor pos_embed;   // [N, K]
  Tensor cls_w;       // [K, 1]  per-token linear == 1x1 conv over the token map
  Tensor cls_b;       // [1]
  std::vector<AttentionParams> blocks;
  std::vector<Tensor> stem_w, stem_b;  // 3x3 convs, stride 2 between levels
  std::vector<Tensor> up_w;            // 2x2 stride-2 deconvs, halving channels
  std::vector<Tensor> fuse_w, fuse_b;  // 3x3 convs after each skip concat
  Tensor head_w;                       // [1, C, 1, 1]
  Tensor head_b;                       // [1]

  std::vector<Tensor*> parameters();
  std::vector<std::pair<std::string, Tensor*>> named_parameters();
};

UNestParams init_unest_params(const UNestConfig& cfg, Rng& rng);

struct ForwardTrace {
  std::vector<AttentionTrace> blocks;
};

struct GeneratorOutput {
  Tensor image;       // [1,H,W], tanh range
  Tensor mask_probs;  // [N,1], graph-connected, feeds the mask loss
  PatchMask mask;     // thresholded prediction (values only, no graph edge)
};

// Patch embedding (flattened p x p patches times the projection, plus the
// positional embedding), the patch classifier, depth dual-attention blocks
// over the selected mask, then the convolutional decoder with stem skips.
// Scope selection reads mask values only, so no gradient flows through the
// threshold; the classifier trains from the mask loss alone.
GeneratorOutput unest_forward(const Tensor& x, const UNestParams& params,
                              const UNestConfig& cfg,
                              ScopeSource scope_source = ScopeSource::kPredicted,
                              const PatchMask* gt_mask = nullptr,
                              ForwardTrace* trace = nullptr);

// Convenience wrapper: [0,1] image in, [0,1] image out.
ImageGrid translate_image(const ImageGrid& input, const UNestParams& params,
                          const UNestConfig& cfg);

}  // namespace unest
