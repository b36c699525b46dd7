#include "unest/losses.hpp"

#include <stdexcept>

namespace unest {
namespace {

constexpr double kLogClamp = 1e-12;

Tensor mean_log_clamped(const Tensor& probs) {
  return mean(log_act(clamp(probs, kLogClamp, 1.0)));
}

}  // namespace

AdversarialLosses loss_adversarial(const Tensor& d_real_scores,
                                   const Tensor& d_fake_scores) {
  const Tensor p_real = sigmoid(d_real_scores);
  const Tensor p_fake = sigmoid(d_fake_scores);
  const Tensor one_minus_fake =
      sub(Tensor::ones(p_fake.shape()), p_fake);
  AdversarialLosses out;
  out.d_loss = mul_scalar(
      add(mean_log_clamped(p_real), mean_log_clamped(one_minus_fake)), -1.0);
  out.g_loss = mul_scalar(mean_log_clamped(p_fake), -1.0);
  return out;
}

AdversarialLosses loss_adversarial_ls(const Tensor& d_real_scores,
                                      const Tensor& d_fake_scores) {
  const Tensor real_err = sub(d_real_scores, Tensor::ones(d_real_scores.shape()));
  const Tensor fake_err_g = sub(d_fake_scores, Tensor::ones(d_fake_scores.shape()));
  AdversarialLosses out;
  out.d_loss = mul_scalar(add(mean(mul(real_err, real_err)),
                              mean(mul(d_fake_scores, d_fake_scores))),
                          0.5);
  out.g_loss = mean(mul(fake_err_g, fake_err_g));
  return out;
}

Tensor loss_cycle(const Tensor& x, const Tensor& x_rec, const Tensor& y,
                  const Tensor& y_rec) {
  if (x.shape() != x_rec.shape() || y.shape() != y_rec.shape()) {
    throw std::invalid_argument("loss_cycle: shape mismatch " +
                                shape_to_string(x.shape()) + " vs " +
                                shape_to_string(x_rec.shape()) + " / " +
                                shape_to_string(y.shape()) + " vs " +
                                shape_to_string(y_rec.shape()));
  }
  return add(abs_mean(sub(x, x_rec)), abs_mean(sub(y, y_rec)));
}

Tensor loss_mask(const Tensor& pred_probs, const PatchMask& gt) {
  if (pred_probs.numel() != gt.size()) {
    throw std::invalid_argument("loss_mask: grid mismatch, " +
                                std::to_string(pred_probs.numel()) +
                                " probabilities vs " + std::to_string(gt.size()) +
                                " ground-truth patches");
  }
  std::vector<double> gt_vals(gt.size());
  for (std::size_t i = 0; i < gt.size(); ++i) {
    gt_vals[i] = gt.binary[i] ? 1.0 : 0.0;
  }
  const Tensor target = Tensor::from_data(pred_probs.shape(), std::move(gt_vals));
  const Tensor p = clamp(pred_probs, kLogClamp, 1.0 - kLogClamp);
  const Tensor ones = Tensor::ones(p.shape());
  const Tensor per_patch =
      add(mul(target, log_act(p)),
          mul(sub(ones, target), log_act(sub(ones, p))));
  return mul_scalar(mean(per_patch), -1.0);
}

Tensor loss_generator_total(const GeneratorLossParts& parts) {
  Tensor total = mul_scalar(add(parts.adv_xy, parts.adv_yx), parts.w_adv);
  total = add(total, mul_scalar(parts.cycle, parts.w_cyc));
  if (parts.lambda_mask != 0.0) {
    if (!parts.mask_xy.defined() || !parts.mask_yx.defined()) {
      throw std::invalid_argument(
          "loss_generator_total: lambda_mask != 0 but mask losses missing");
    }
    total = add(total, mul_scalar(add(parts.mask_xy, parts.mask_yx),
                                  parts.lambda_mask));
  }
  return total;
}

double lr_schedule(int epoch, int total_epochs, double base_lr) {
  if (epoch < 0 || epoch > total_epochs) {
    throw std::out_of_range("lr_schedule: epoch " + std::to_string(epoch) +
                            " outside [0," + std::to_string(total_epochs) + "]");
  }
  const int decay_start = total_epochs / 2;
  if (epoch < decay_start) return base_lr;
  return base_lr * static_cast<double>(total_epochs - epoch) /
         static_cast<double>(total_epochs - decay_start);
}

}  // namespace unest
