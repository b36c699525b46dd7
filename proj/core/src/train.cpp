#include "unest/train.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <stdexcept>

#include "unest/checkpoint.hpp"
#include "unest/rng.hpp"

namespace fs = std::filesystem;

namespace unest {

namespace {

Tensor generator_adversarial(const Tensor& d_fake_scores, GanMode mode) {
  if (mode == GanMode::kLeastSquares) {
    const Tensor err = sub(d_fake_scores, Tensor::ones(d_fake_scores.shape()));
    return mean(mul(err, err));
  }
  return mul_scalar(
      mean(log_act(clamp(sigmoid(d_fake_scores), 1e-12, 1.0))), -1.0);
}

Tensor discriminator_adversarial(const Tensor& d_real_scores,
                                 const Tensor& d_fake_scores, GanMode mode) {
  if (mode == GanMode::kLeastSquares) {
    const Tensor real_err = sub(d_real_scores, Tensor::ones(d_real_scores.shape()));
    return mul_scalar(add(mean(mul(real_err, real_err)),
                          mean(mul(d_fake_scores, d_fake_scores))),
                      0.5);
  }
  const Tensor p_real = sigmoid(d_real_scores);
  const Tensor p_fake = sigmoid(d_fake_scores);
  const Tensor one_minus = sub(Tensor::ones(p_fake.shape()), p_fake);
  return mul_scalar(add(mean(log_act(clamp(p_real, 1e-12, 1.0))),
                        mean(log_act(clamp(one_minus, 1e-12, 1.0)))),
                    -1.0);
}

void check_finite(const Tensor& value, const char* name) {
  for (const double v : value.data()) {
    if (!std::isfinite(v)) {
      throw std::runtime_error(std::string("non-finite loss tensor: ") + name);
    }
  }
}

void check_params_finite(TrainState& state) {
  const auto scan = [](const std::string& net,
                       std::vector<std::pair<std::string, Tensor*>> named) {
    for (const auto& [name, t] : named) {
      for (const double v : t->data()) {
        if (!std::isfinite(v)) {
          throw std::runtime_error("non-finite parameter after update: " + net +
                                   "." + name);
        }
      }
    }
  };
  scan("gen_xy", state.gen_xy.named_parameters());
  scan("gen_yx", state.gen_yx.named_parameters());
  scan("disc_x", state.disc_x.named_parameters());
  scan("disc_y", state.disc_y.named_parameters());
}

// Scope selection for a real input under the configured policy, and for the
// second hop of a cycle (a synthetic image, so no ground truth exists and
// the predicted mask is used unless the ablation forces all-foreground).
struct MaskPolicy {
  TrainMaskSource source;
  PatchMask all_fg;

  GeneratorOutput first_hop(const Tensor& img, const UNestParams& p,
                            const UNestConfig& cfg, const PatchMask* gt) const {
    switch (source) {
      case TrainMaskSource::kPredicted:
        return unest_forward(img, p, cfg, ScopeSource::kPredicted, nullptr);
      case TrainMaskSource::kGroundTruth:
        return unest_forward(img, p, cfg, ScopeSource::kGroundTruth, gt);
      case TrainMaskSource::kAllForeground:
        return unest_forward(img, p, cfg, ScopeSource::kGroundTruth, &all_fg);
    }
    throw std::logic_error("bad mask source");
  }

  GeneratorOutput second_hop(const Tensor& img, const UNestParams& p,
                             const UNestConfig& cfg) const {
    if (source == TrainMaskSource::kAllForeground) {
      return unest_forward(img, p, cfg, ScopeSource::kGroundTruth, &all_fg);
    }
    return unest_forward(img, p, cfg, ScopeSource::kPredicted, nullptr);
  }
};

}  // namespace

TrainState init_train_state(const TrainConfig& cfg) {
  cfg.gen.validate();
  if (cfg.batch_size < 1) throw std::invalid_argument("batch_size must be >= 1");
  if (cfg.epochs < 1) throw std::invalid_argument("epochs must be >= 1");
  TrainState state;
  state.cfg = cfg;
  Rng rng(derive_seed(cfg.seed, "init"));
  state.gen_xy = init_unest_params(cfg.gen, rng);
  state.gen_yx = init_unest_params(cfg.gen, rng);
  state.disc_x = init_discriminator_params(cfg.disc_channels, rng);
  state.disc_y = init_discriminator_params(cfg.disc_channels, rng);
  return state;
}

StepReport train_step(const Batch& batch_x, const Batch& batch_y,
                      TrainState& state, double lr) {
  const std::size_t b = batch_x.images.size();
  if (b == 0 || batch_y.images.size() != b ||
      batch_x.masks.size() != b || batch_y.masks.size() != b) {
    throw std::invalid_argument("train_step: batches must be same-sized and non-empty");
  }
  const TrainConfig& cfg = state.cfg;
  MaskPolicy policy{cfg.mask_source,
                    PatchMask::all_foreground(cfg.gen.grid_h(), cfg.gen.grid_w(),
                                              cfg.gen.sigma)};
  const double inv_b = 1.0 / static_cast<double>(b);

  StepReport report;

  // ---- generator update ----
  auto gen_params_xy = state.gen_xy.parameters();
  auto gen_params_yx = state.gen_yx.parameters();
  zero_grads(gen_params_xy);
  zero_grads(gen_params_yx);

  Tensor gen_total;
  std::vector<Tensor> fake_y_detached, fake_x_detached;
  std::vector<Tensor> real_x_tensors, real_y_tensors;
  fake_y_detached.reserve(b);
  fake_x_detached.reserve(b);
  real_x_tensors.reserve(b);
  real_y_tensors.reserve(b);

  for (std::size_t e = 0; e < b; ++e) {
    const Tensor x = normalize_for_model(*batch_x.images[e]);
    const Tensor y = normalize_for_model(*batch_y.images[e]);
    real_x_tensors.push_back(x);
    real_y_tensors.push_back(y);

    GeneratorOutput fx = policy.first_hop(x, state.gen_xy, cfg.gen, batch_x.masks[e]);
    GeneratorOutput fy = policy.first_hop(y, state.gen_yx, cfg.gen, batch_y.masks[e]);
    const Tensor rec_x = policy.second_hop(fx.image, state.gen_yx, cfg.gen).image;
    const Tensor rec_y = policy.second_hop(fy.image, state.gen_xy, cfg.gen).image;

    fake_y_detached.push_back(fx.image.detach());
    fake_x_detached.push_back(fy.image.detach());

    GeneratorLossParts parts;
    parts.w_adv = cfg.w_adv;
    parts.w_cyc = cfg.w_cyc;
    parts.lambda_mask = cfg.lambda_mask;
    parts.adv_xy =
        generator_adversarial(discriminator_forward(fx.image, state.disc_y), cfg.gan_mode);
    parts.adv_yx =
        generator_adversarial(discriminator_forward(fy.image, state.disc_x), cfg.gan_mode);
    parts.cycle = loss_cycle(x, rec_x, y, rec_y);
    if (cfg.lambda_mask != 0.0) {
      parts.mask_xy = loss_mask(fx.mask_probs, *batch_x.masks[e]);
      parts.mask_yx = loss_mask(fy.mask_probs, *batch_y.masks[e]);
    }
    check_finite(parts.adv_xy, "g_adv_xy");
    check_finite(parts.adv_yx, "g_adv_yx");
    check_finite(parts.cycle, "g_cycle");
    if (parts.mask_xy.defined()) check_finite(parts.mask_xy, "g_mask_xy");
    if (parts.mask_yx.defined()) check_finite(parts.mask_yx, "g_mask_yx");

    const Tensor total_e = loss_generator_total(parts);
    report.g_adv += (parts.adv_xy.item() + parts.adv_yx.item()) * inv_b;
    report.g_cyc += parts.cycle.item() * inv_b;
    if (parts.mask_xy.defined()) {
      report.g_mask += (parts.mask_xy.item() + parts.mask_yx.item()) * inv_b;
    }
    report.total += total_e.item() * inv_b;
    gen_total = gen_total.defined() ? add(gen_total, total_e) : total_e;
  }
  gen_total = mul_scalar(gen_total, inv_b);
  backward(gen_total);
  adam_step(gen_params_xy, state.adam_gen_xy, lr);
  adam_step(gen_params_yx, state.adam_gen_yx, lr);

  // ---- discriminator update (fakes detached, no path into generators) ----
  auto disc_params_x = state.disc_x.parameters();
  auto disc_params_y = state.disc_y.parameters();
  zero_grads(disc_params_x);
  zero_grads(disc_params_y);

  Tensor disc_total;
  for (std::size_t e = 0; e < b; ++e) {
    const Tensor d_loss_x = discriminator_adversarial(
        discriminator_forward(real_x_tensors[e], state.disc_x),
        discriminator_forward(fake_x_detached[e], state.disc_x), cfg.gan_mode);
    const Tensor d_loss_y = discriminator_adversarial(
        discriminator_forward(real_y_tensors[e], state.disc_y),
        discriminator_forward(fake_y_detached[e], state.disc_y), cfg.gan_mode);
    check_finite(d_loss_x, "d_x");
    check_finite(d_loss_y, "d_y");
    report.d_x += d_loss_x.item() * inv_b;
    report.d_y += d_loss_y.item() * inv_b;
    const Tensor both = add(d_loss_x, d_loss_y);
    disc_total = disc_total.defined() ? add(disc_total, both) : both;
  }
  disc_total = mul_scalar(disc_total, inv_b);
  backward(disc_total);
  adam_step(disc_params_x, state.adam_disc_x, lr);
  adam_step(disc_params_y, state.adam_disc_y, lr);

  check_params_finite(state);
  return report;
}

TrainResult train(const UnpairedDataset& ds, TrainState& state,
                  const std::string& out_dir) {
  const TrainConfig& cfg = state.cfg;
  const DatasetPart& tx = ds.train_x;
  const DatasetPart& ty = ds.train_y;
  const std::size_t n = std::min(tx.images.size(), ty.images.size());
  const std::size_t steps_per_epoch = n / static_cast<std::size_t>(cfg.batch_size);
  if (steps_per_epoch == 0) {
    throw std::invalid_argument("train: fewer training images (" +
                                std::to_string(n) + ") than one batch of " +
                                std::to_string(cfg.batch_size));
  }
  if (!out_dir.empty()) fs::create_directories(out_dir);

  TrainResult result;
  std::vector<std::size_t> idx_x(tx.images.size());
  std::vector<std::size_t> idx_y(ty.images.size());
  while (state.epoch < cfg.epochs) {
    const int epoch = state.epoch;
    const double lr = lr_schedule(epoch, cfg.epochs, cfg.base_lr);
    std::iota(idx_x.begin(), idx_x.end(), 0);
    std::iota(idx_y.begin(), idx_y.end(), 0);
    Rng rng_x(derive_seed(cfg.seed, "shuffle-x", static_cast<std::uint64_t>(epoch)));
    Rng rng_y(derive_seed(cfg.seed, "shuffle-y", static_cast<std::uint64_t>(epoch)));
    rng_x.shuffle(idx_x);
    rng_y.shuffle(idx_y);

    for (std::size_t step = 0; step < steps_per_epoch; ++step) {
      Batch bx, by;
      for (int e = 0; e < cfg.batch_size; ++e) {
        const std::size_t ix = idx_x[step * cfg.batch_size + e];
        const std::size_t iy = idx_y[step * cfg.batch_size + e];
        bx.images.push_back(&tx.images[ix]);
        bx.masks.push_back(&tx.masks[ix]);
        by.images.push_back(&ty.images[iy]);
        by.masks.push_back(&ty.masks[iy]);
      }
      const StepReport losses = train_step(bx, by, state, lr);
      result.curve.push_back({epoch, static_cast<int>(step), losses});
    }

    // Advance before checkpointing so a resumed run starts at the next
    // epoch rather than repeating this one.
    state.epoch = epoch + 1;
    if (!out_dir.empty() && cfg.checkpoint_every > 0 &&
        state.epoch % cfg.checkpoint_every == 0 && state.epoch < cfg.epochs) {
      char name[32];
      std::snprintf(name, sizeof name, "ckpt_epoch_%03d", state.epoch);
      save_checkpoint((fs::path(out_dir) / name).string(), state);
    }
  }

  if (!out_dir.empty()) {
    save_checkpoint((fs::path(out_dir) / "ckpt_final").string(), state);
    write_loss_curves_csv((fs::path(out_dir) / "loss_curves.csv").string(),
                          result.curve);
  }
  return result;
}

void write_loss_curves_csv(const std::string& path,
                           const std::vector<CurveRow>& curve) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot write " + path);
  os << "epoch,step,d_x,d_y,g_adv,g_cyc,g_mask,total\n";
  char buf[64];
  for (const CurveRow& row : curve) {
    os << row.epoch << ',' << row.step;
    const double vals[6] = {row.losses.d_x,   row.losses.d_y,
                            row.losses.g_adv, row.losses.g_cyc,
                            row.losses.g_mask, row.losses.total};
    for (const double v : vals) {
      std::snprintf(buf, sizeof buf, "%.17g", v);
      os << ',' << buf;
    }
    os << '\n';
  }
}

const char* gan_mode_name(GanMode m) {
  return m == GanMode::kNonSaturating ? "nsgan" : "lsgan";
}

const char* mask_source_name(TrainMaskSource m) {
  switch (m) {
    case TrainMaskSource::kPredicted: return "predicted";
    case TrainMaskSource::kGroundTruth: return "ground_truth";
    case TrainMaskSource::kAllForeground: return "all_foreground";
  }
  return "?";
}

const char* attention_mode_name(AttentionMode m) {
  return m == AttentionMode::kFgStructuralBgLocal ? "fg_s_bg_l" : "fg_s_bg_s";
}

GanMode parse_gan_mode(const std::string& s) {
  if (s == "nsgan") return GanMode::kNonSaturating;
  if (s == "lsgan") return GanMode::kLeastSquares;
  throw std::invalid_argument("unknown gan mode '" + s + "' (nsgan|lsgan)");
}

TrainMaskSource parse_mask_source(const std::string& s) {
  if (s == "predicted") return TrainMaskSource::kPredicted;
  if (s == "ground_truth") return TrainMaskSource::kGroundTruth;
  if (s == "all_foreground") return TrainMaskSource::kAllForeground;
  throw std::invalid_argument("unknown mask source '" + s +
                              "' (predicted|ground_truth|all_foreground)");
}

AttentionMode parse_attention_mode(const std::string& s) {
  if (s == "fg_s_bg_l") return AttentionMode::kFgStructuralBgLocal;
  if (s == "fg_s_bg_s") return AttentionMode::kFgStructuralBgStructural;
  throw std::invalid_argument("unknown attention mode '" + s +
                              "' (fg_s_bg_l|fg_s_bg_s)");
}

}  // namespace unest
