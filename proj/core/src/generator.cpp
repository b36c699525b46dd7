#include "unest/generator.hpp"

#include <cmath>
#include <stdexcept>

namespace unest {

int UNestConfig::stages() const {
  int p = patch;
  int s = 0;
  while (p > 1) {
    p >>= 1;
    ++s;
  }
  return s;
}

void UNestConfig::validate() const {
  if (patch < 2 || (patch & (patch - 1)) != 0) {
    throw std::invalid_argument("patch size must be a power of two >= 2, got " +
                                std::to_string(patch));
  }
  if (image_side % patch != 0) {
    throw std::invalid_argument("image side " + std::to_string(image_side) +
                                " not divisible by patch " + std::to_string(patch));
  }
  if (embed_dim % n_heads != 0) {
    throw std::invalid_argument("embed dim " + std::to_string(embed_dim) +
                                " not divisible by heads " + std::to_string(n_heads));
  }
  if (embed_dim % (1 << stages()) != 0) {
    throw std::invalid_argument("embed dim " + std::to_string(embed_dim) +
                                " not divisible by 2^stages = " +
                                std::to_string(1 << stages()));
  }
  if (depth < 1) throw std::invalid_argument("depth must be >= 1");
  if (window < 1 || window % 2 == 0) {
    throw std::invalid_argument("window must be odd, got " + std::to_string(window));
  }
  if (stem_channels < 1) throw std::invalid_argument("stem_channels must be >= 1");
}

namespace {

Tensor init_normal(const Shape& shape, Rng& rng, double stddev) {
  std::vector<double> data(shape_numel(shape));
  for (double& v : data) v = rng.normal(0.0, stddev);
  return Tensor::from_data(shape, std::move(data), true);
}

// Fan-in-scaled init. The convolutional stem/decoder has no normalization
// layers, so a flat 0.02 scale collapses activations (and gradients) by
// orders of magnitude across the stack; scaling by fan-in keeps signal O(1).
// The attention trunk keeps the flat small init: its layer norms make it
// scale-insensitive.
Tensor init_fan_in(const Shape& shape, Rng& rng, double gain, int fan_in) {
  return init_normal(shape, rng, gain / std::sqrt(static_cast<double>(fan_in)));
}

}  // namespace

UNestParams init_unest_params(const UNestConfig& cfg, Rng& rng) {
  cfg.validate();
  const int k = cfg.embed_dim;
  const double relu_gain = std::sqrt(2.0);
  UNestParams p;
  p.patch_proj = init_fan_in({cfg.patch_dim(), k}, rng, 1.0, cfg.patch_dim());
  p.pos_embed = init_normal({cfg.n_tokens(), k}, rng, 0.02);
  p.cls_w = init_normal({k, 1}, rng, 0.02);
  p.cls_b = Tensor::zeros({1}, true);
  p.blocks.reserve(static_cast<std::size_t>(cfg.depth));
  for (int t = 0; t < cfg.depth; ++t) {
    p.blocks.push_back(init_attention_params(k, rng));
  }
  const int levels = cfg.stages();
  const int sc = cfg.stem_channels;
  for (int l = 0; l < levels; ++l) {
    const int c_in = l == 0 ? 1 : sc;
    p.stem_w.push_back(init_fan_in({sc, c_in, 3, 3}, rng, relu_gain, c_in * 9));
    p.stem_b.push_back(Tensor::zeros({sc}, true));
  }
  int ch = k;
  for (int s = 0; s < levels; ++s) {
    const int c_out = ch / 2;
    // Each deconv output tap sums over exactly the input channels (kernel
    // equals stride), so fan-in is ch.
    p.up_w.push_back(init_fan_in({ch, c_out, 2, 2}, rng, 1.0, ch));
    p.fuse_w.push_back(
        init_fan_in({c_out, c_out + sc, 3, 3}, rng, relu_gain, (c_out + sc) * 9));
    p.fuse_b.push_back(Tensor::zeros({c_out}, true));
    ch = c_out;
  }
  p.head_w = init_fan_in({1, ch, 1, 1}, rng, 1.0, ch);
  p.head_b = Tensor::zeros({1}, true);
  return p;
}

std::vector<Tensor*> UNestParams::parameters() {
  std::vector<Tensor*> out;
  for (auto& [name, t] : named_parameters()) out.push_back(t);
  return out;
}

std::vector<std::pair<std::string, Tensor*>> UNestParams::named_parameters() {
  std::vector<std::pair<std::string, Tensor*>> out;
  out.emplace_back("patch_proj", &patch_proj);
  out.emplace_back("pos_embed", &pos_embed);
  out.emplace_back("cls_w", &cls_w);
  out.emplace_back("cls_b", &cls_b);
  for (std::size_t t = 0; t < blocks.size(); ++t) {
    const std::string prefix = "blocks." + std::to_string(t) + ".";
    AttentionParams& b = blocks[t];
    out.emplace_back(prefix + "w_q", &b.w_q);
    out.emplace_back(prefix + "w_k", &b.w_k);
    out.emplace_back(prefix + "w_v", &b.w_v);
    out.emplace_back(prefix + "w_o", &b.w_o);
    out.emplace_back(prefix + "ln1_gamma", &b.ln1_gamma);
    out.emplace_back(prefix + "ln1_beta", &b.ln1_beta);
    out.emplace_back(prefix + "ln2_gamma", &b.ln2_gamma);
    out.emplace_back(prefix + "ln2_beta", &b.ln2_beta);
    out.emplace_back(prefix + "mlp_w1", &b.mlp_w1);
    out.emplace_back(prefix + "mlp_b1", &b.mlp_b1);
    out.emplace_back(prefix + "mlp_w2", &b.mlp_w2);
    out.emplace_back(prefix + "mlp_b2", &b.mlp_b2);
  }
  for (std::size_t l = 0; l < stem_w.size(); ++l) {
    out.emplace_back("stem." + std::to_string(l) + ".w", &stem_w[l]);
    out.emplace_back("stem." + std::to_string(l) + ".b", &stem_b[l]);
  }
  for (std::size_t s = 0; s < up_w.size(); ++s) {
    out.emplace_back("up." + std::to_string(s) + ".w", &up_w[s]);
    out.emplace_back("fuse." + std::to_string(s) + ".w", &fuse_w[s]);
    out.emplace_back("fuse." + std::to_string(s) + ".b", &fuse_b[s]);
  }
  out.emplace_back("head_w", &head_w);
  out.emplace_back("head_b", &head_b);
  return out;
}

GeneratorOutput unest_forward(const Tensor& x, const UNestParams& params,
                              const UNestConfig& cfg, ScopeSource scope_source,
                              const PatchMask* gt_mask, ForwardTrace* trace) {
  if (x.rank() != 3 || x.dim(0) != 1 || x.dim(1) != cfg.image_side ||
      x.dim(2) != cfg.image_side) {
    throw std::invalid_argument("unest_forward: expected [1," +
                                std::to_string(cfg.image_side) + "," +
                                std::to_string(cfg.image_side) + "] input, got " +
                                shape_to_string(x.shape()));
  }
  if (scope_source == ScopeSource::kGroundTruth) {
    if (gt_mask == nullptr) {
      throw std::invalid_argument("unest_forward: ground-truth scope source needs a mask");
    }
    if (gt_mask->grid_h != cfg.grid_h() || gt_mask->grid_w != cfg.grid_w()) {
      throw std::invalid_argument("unest_forward: ground-truth mask grid mismatch");
    }
  }

  GeneratorOutput out;
  const Tensor tokens0 =
      add(matmul(extract_patches(x, cfg.patch), params.patch_proj),
          params.pos_embed);

  out.mask_probs = sigmoid(add(matmul(tokens0, params.cls_w), params.cls_b));
  out.mask = PatchMask::from_probs(cfg.grid_h(), cfg.grid_w(),
                                   out.mask_probs.data(), cfg.sigma);

  const PatchMask& scope_mask =
      scope_source == ScopeSource::kPredicted ? out.mask : *gt_mask;

  StBlockConfig block_cfg;
  block_cfg.n_heads = cfg.n_heads;
  block_cfg.window = cfg.window;
  block_cfg.mode = cfg.mode;

  if (trace) trace->blocks.resize(static_cast<std::size_t>(cfg.depth));
  Tensor tokens = tokens0;
  for (int t = 0; t < cfg.depth; ++t) {
    AttentionTrace* bt = trace ? &trace->blocks[static_cast<std::size_t>(t)] : nullptr;
    tokens = st_block(tokens, scope_mask, block_cfg, params.blocks[static_cast<std::size_t>(t)], bt);
  }

  // Token map [K, H', W'] for the decoder.
  Tensor feat = reshape(transpose(tokens),
                        {cfg.embed_dim, cfg.grid_h(), cfg.grid_w()});

  // Stem pyramid over the raw input at resolutions H, H/2, ..., H/(p/2).
  const int levels = cfg.stages();
  std::vector<Tensor> stem;
  stem.reserve(static_cast<std::size_t>(levels));
  for (int l = 0; l < levels; ++l) {
    const Tensor& src = l == 0 ? x : stem.back();
    const int stride = l == 0 ? 1 : 2;
    stem.push_back(relu(add_channel_bias(
        conv2d(src, params.stem_w[static_cast<std::size_t>(l)], stride, 1),
        params.stem_b[static_cast<std::size_t>(l)])));
  }

  for (int s = 0; s < levels; ++s) {
    feat = deconv2d(feat, params.up_w[static_cast<std::size_t>(s)]);
    feat = concat({feat, stem[static_cast<std::size_t>(levels - 1 - s)]}, 0);
    feat = relu(add_channel_bias(
        conv2d(feat, params.fuse_w[static_cast<std::size_t>(s)], 1, 1),
        params.fuse_b[static_cast<std::size_t>(s)]));
  }

  out.image = tanh_act(add_channel_bias(conv2d(feat, params.head_w, 1, 0),
                                        params.head_b));
  return out;
}

ImageGrid translate_image(const ImageGrid& input, const UNestParams& params,
                          const UNestConfig& cfg) {
  const Tensor x = normalize_for_model(input);
  return denormalize(unest_forward(x, params, cfg).image);
}

}  // namespace unest
