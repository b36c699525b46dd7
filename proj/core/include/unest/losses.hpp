#pragma once

#include "unest/mask.hpp"
#include "unest/tensor.hpp"

namespace unest {

enum class GanMode { kNonSaturating, kLeastSquares };

struct AdversarialLosses {
  Tensor d_loss;
  Tensor g_loss;
};

// Scores are pre-sigmoid maps. The discriminator minimizes
// -mean[log s(real)] - mean[log(1 - s(fake))]; the generator minimizes the
// non-saturating -mean[log s(fake)]. Logs are clamped at 1e-12.
AdversarialLosses loss_adversarial(const Tensor& d_real_scores,
                                   const Tensor& d_fake_scores);

// Least-squares alternative on raw scores: D matches real to 1 and fake to
// 0 (halved sum), G matches fake to 1.
AdversarialLosses loss_adversarial_ls(const Tensor& d_real_scores,
                                      const Tensor& d_fake_scores);

// Per-pixel L1 means of both reconstruction directions.
Tensor loss_cycle(const Tensor& x, const Tensor& x_rec, const Tensor& y,
                  const Tensor& y_rec);

// Mean binary cross-entropy between predicted foreground probabilities
// (clamped into [1e-12, 1-1e-12]) and the 0/1 ground-truth grid.
Tensor loss_mask(const Tensor& pred_probs, const PatchMask& gt);

struct GeneratorLossParts {
  Tensor adv_xy;  // generator-side adversarial terms
  Tensor adv_yx;
  Tensor cycle;
  Tensor mask_xy;  // may be undefined when lambda_mask == 0
  Tensor mask_yx;
  double w_adv = 1.0;
  double w_cyc = 10.0;
  double lambda_mask = 1.0;
};

Tensor loss_generator_total(const GeneratorLossParts& parts);

// Constant base rate for the first half, then linear decay to zero over the
// second half (with the canonical 100-epoch schedule: 1e-4 until epoch 50,
// reaching 0 at epoch 100).
double lr_schedule(int epoch, int total_epochs = 100, double base_lr = 1e-4);

}  // namespace unest
