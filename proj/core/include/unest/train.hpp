#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "unest/dataset.hpp"
#include "unest/discriminator.hpp"
#include "unest/generator.hpp"
#include "unest/losses.hpp"

namespace unest {

// Which mask drives scope construction during training. kAllForeground
// degenerates every block to global attention (the structural-bias-off
// ablation); combined with lambda_mask = 0 it removes the mask machinery
// entirely.
enum class TrainMaskSource { kPredicted, kGroundTruth, kAllForeground };

struct TrainConfig {
  UNestConfig gen;
  int disc_channels = 16;
  int epochs = 100;
  int batch_size = 16;
  double base_lr = 1e-4;
  double w_adv = 1.0;
  double w_cyc = 10.0;
  double lambda_mask = 1.0;
  GanMode gan_mode = GanMode::kNonSaturating;
  TrainMaskSource mask_source = TrainMaskSource::kPredicted;
  std::uint64_t seed = 0;
  int checkpoint_every = 10;
};

struct TrainState {
  TrainConfig cfg;
  UNestParams gen_xy, gen_yx;
  DiscriminatorParams disc_x, disc_y;
  AdamState adam_gen_xy, adam_gen_yx, adam_disc_x, adam_disc_y;
  int epoch = 0;
};

// Fresh networks from the "init" stream of cfg.seed.
TrainState init_train_state(const TrainConfig& cfg);

struct StepReport {
  double d_x = 0.0;
  double d_y = 0.0;
  double g_adv = 0.0;
  double g_cyc = 0.0;
  double g_mask = 0.0;
  double total = 0.0;
};

struct Batch {
  std::vector<const ImageGrid*> images;
  std::vector<const PatchMask*> masks;
};

// One alternating update: generators first (both cycles, the combined
// adversarial + cycle + mask objective, Adam on both), then discriminators
// on real vs detached fakes. Throws with the offending tensor's name when a
// loss or parameter goes non-finite.
StepReport train_step(const Batch& batch_x, const Batch& batch_y,
                      TrainState& state, double lr);

struct CurveRow {
  int epoch = 0;
  int step = 0;
  StepReport losses;
};

struct TrainResult {
  std::vector<CurveRow> curve;
};

// Runs state.epoch .. cfg.epochs-1 with per-epoch learning rates and
// independent per-domain shuffles reseeded from (seed, epoch), so a resumed
// run retraces the uninterrupted one. With a non-empty out_dir, writes
// loss_curves.csv, periodic checkpoints and ckpt_final/.
TrainResult train(const UnpairedDataset& ds, TrainState& state,
                  const std::string& out_dir);

void write_loss_curves_csv(const std::string& path,
                           const std::vector<CurveRow>& curve);

const char* gan_mode_name(GanMode m);
const char* mask_source_name(TrainMaskSource m);
const char* attention_mode_name(AttentionMode m);
GanMode parse_gan_mode(const std::string& s);
TrainMaskSource parse_mask_source(const std::string& s);
AttentionMode parse_attention_mode(const std::string& s);

}  // namespace unest
