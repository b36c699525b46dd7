// Command-line front end: data synthesis, offline mask extraction, training,
// synthesis, evaluation, map export, gradient checking and self-test.
// Exit codes: 0 success, 1 usage error, 2 runtime error.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "unest/checkpoint.hpp"
#include "unest/config.hpp"
#include "unest/dataset.hpp"
#include "unest/export_maps.hpp"
#include "unest/losses.hpp"
#include "unest/metrics.hpp"
#include "unest/rng.hpp"
#include "unest/selftest.hpp"
#include "unest/synth.hpp"
#include "unest/train.hpp"
#include "unest/untf.hpp"

namespace fs = std::filesystem;
using namespace unest;

namespace {

std::string fmt_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

void write_resolved_config(const std::string& out_dir, const std::string& command,
                           const ConfigMap& values) {
  if (out_dir.empty()) return;
  fs::create_directories(out_dir);
  std::ofstream os(fs::path(out_dir) / "resolved_config.txt");
  os << "# unest " << command << "\n";
  for (const auto& [k, v] : values.entries()) os << k << '=' << v << '\n';
}

std::vector<TokenIndex> parse_queries(const std::string& spec) {
  std::vector<TokenIndex> out;
  std::istringstream ss(spec);
  std::string item;
  while (std::getline(ss, item, ';')) {
    if (item.empty()) continue;
    const std::size_t comma = item.find(',');
    if (comma == std::string::npos) {
      throw CLI::ValidationError("--queries", "expected r,c pairs separated by ';'");
    }
    out.push_back({std::stoi(item.substr(0, comma)), std::stoi(item.substr(comma + 1))});
  }
  return out;
}

struct ModelFlags {
  int patch = 8;
  int embed_dim = 64;
  int depth = 4;
  int n_heads = 4;
  int window = 3;
  double sigma = 0.5;
  std::string mode = "fg_s_bg_l";
  int stem_channels = 8;

  void attach(CLI::App* cmd) {
    cmd->add_option("--patch", patch, "patch size (power of two)");
    cmd->add_option("--embed", embed_dim, "token embedding dimension");
    cmd->add_option("--depth", depth, "number of dual-attention blocks");
    cmd->add_option("--heads", n_heads, "attention heads");
    cmd->add_option("--window", window, "background local window (odd)");
    cmd->add_option("--sigma", sigma, "foreground threshold on mask probabilities");
    cmd->add_option("--mode", mode, "attention mode: fg_s_bg_l|fg_s_bg_s");
    cmd->add_option("--stem", stem_channels, "skip-stem channels");
  }

  UNestConfig to_config(int side) const {
    UNestConfig g;
    g.image_side = side;
    g.patch = patch;
    g.embed_dim = embed_dim;
    g.depth = depth;
    g.n_heads = n_heads;
    g.window = window;
    g.sigma = sigma;
    g.mode = parse_attention_mode(mode);
    g.stem_channels = stem_channels;
    return g;
  }

  void record(ConfigMap& c) const {
    c.set_int("patch", patch);
    c.set_int("embed", embed_dim);
    c.set_int("depth", depth);
    c.set_int("heads", n_heads);
    c.set_int("window", window);
    c.set_double("sigma", sigma);
    c.set("mode", mode);
    c.set_int("stem", stem_channels);
  }
};

int run_cli(int argc, char** argv) {
  CLI::App app{"UNest: unpaired image synthesis with dual scope-masked attention"};
  app.require_subcommand(1);

  // ---- synth-data ----
  auto* synth_cmd = app.add_subcommand("synth-data", "generate the synthetic two-domain dataset");
  int synth_n = 100, synth_side = 64, synth_patch = 8;
  std::uint64_t synth_seed = 0;
  std::string synth_out;
  synth_cmd->add_option("--n", synth_n, "samples per domain (>= 10)");
  synth_cmd->add_option("--side", synth_side, "image side in pixels");
  synth_cmd->add_option("--patch", synth_patch, "patch size for ground-truth masks");
  synth_cmd->add_option("--seed", synth_seed, "master seed");
  synth_cmd->add_option("--out", synth_out, "output directory")->required();
  synth_cmd->set_config("--config");

  // ---- masks ----
  auto* masks_cmd = app.add_subcommand("masks", "run the offline foreground-mask oracle over a manifest");
  std::string masks_data, masks_out;
  double masks_tau = 0.1, masks_rho = 0.5, masks_sigma = 0.5;
  int masks_patch = 8;
  masks_cmd->add_option("--data", masks_data, "dataset directory (with manifest.tsv)")->required();
  masks_cmd->add_option("--out", masks_out, "output directory for oracle masks + manifest")->required();
  masks_cmd->add_option("--tau", masks_tau, "foreground intensity threshold");
  masks_cmd->add_option("--rho", masks_rho, "patch pooling threshold");
  masks_cmd->add_option("--sigma", masks_sigma, "mask binarization threshold");
  masks_cmd->add_option("--patch", masks_patch, "patch size");
  masks_cmd->set_config("--config");

  // ---- train ----
  auto* train_cmd = app.add_subcommand("train", "train the unpaired translation framework");
  std::string train_data, train_out, train_resume;
  std::uint64_t train_seed = 0;
  int train_epochs = 100, train_batch = 16, train_ndf = 16, train_ckpt_every = 10;
  double train_lr = 1e-4, train_w_adv = 1.0, train_w_cyc = 10.0, train_lambda = 1.0;
  std::string train_gan = "nsgan", train_mask_source = "predicted";
  ModelFlags train_model;
  train_cmd->add_option("--data", train_data, "dataset directory")->required();
  train_cmd->add_option("--out", train_out, "run directory")->required();
  train_cmd->add_option("--resume", train_resume, "checkpoint directory to resume from");
  train_cmd->add_option("--seed", train_seed, "master seed");
  train_cmd->add_option("--epochs", train_epochs, "total epochs");
  train_cmd->add_option("--batch", train_batch, "batch size");
  train_cmd->add_option("--lr", train_lr, "base learning rate");
  train_cmd->add_option("--w-adv", train_w_adv, "adversarial weight");
  train_cmd->add_option("--w-cyc", train_w_cyc, "cycle weight");
  train_cmd->add_option("--lambda-mask", train_lambda, "mask loss weight");
  train_cmd->add_option("--gan-mode", train_gan, "nsgan|lsgan");
  train_cmd->add_option("--mask-source", train_mask_source,
                        "predicted|ground_truth|all_foreground");
  train_cmd->add_option("--ndf", train_ndf, "discriminator base channels");
  train_cmd->add_option("--checkpoint-every", train_ckpt_every, "epochs between checkpoints");
  train_model.attach(train_cmd);
  train_cmd->set_config("--config");

  // ---- generate ----
  auto* gen_cmd = app.add_subcommand("generate", "translate images with a trained generator");
  std::string gen_ckpt, gen_input, gen_data, gen_split = "test", gen_direction = "xy", gen_out;
  gen_cmd->add_option("--ckpt", gen_ckpt, "checkpoint directory")->required();
  gen_cmd->add_option("--direction", gen_direction, "xy|yx");
  gen_cmd->add_option("--input", gen_input, "single PGM image to translate");
  gen_cmd->add_option("--data", gen_data, "dataset directory (translate a whole split)");
  gen_cmd->add_option("--split", gen_split, "train|val|test");
  gen_cmd->add_option("--out", gen_out, "output directory")->required();
  gen_cmd->set_config("--config");

  // ---- eval ----
  auto* eval_cmd = app.add_subcommand("eval", "evaluate checkpoints on the paired test split");
  std::vector<std::string> eval_ckpts;
  std::string eval_data, eval_direction = "xy", eval_out;
  eval_cmd->add_option("--ckpt", eval_ckpts, "checkpoint directory (repeat to aggregate runs)")
      ->required();
  eval_cmd->add_option("--data", eval_data, "dataset directory")->required();
  eval_cmd->add_option("--direction", eval_direction, "xy|yx");
  eval_cmd->add_option("--out", eval_out, "output directory")->required();
  eval_cmd->set_config("--config");

  // ---- maps ----
  auto* maps_cmd = app.add_subcommand("maps", "export predicted mask, attention and error maps");
  std::string maps_ckpt, maps_input, maps_target, maps_queries = "0,0", maps_direction = "xy", maps_out;
  maps_cmd->add_option("--ckpt", maps_ckpt, "checkpoint directory")->required();
  maps_cmd->add_option("--direction", maps_direction, "xy|yx");
  maps_cmd->add_option("--input", maps_input, "input PGM image")->required();
  maps_cmd->add_option("--target", maps_target, "aligned target PGM (enables the error map)");
  maps_cmd->add_option("--queries", maps_queries, "token-grid queries, e.g. 1,2;4,4");
  maps_cmd->add_option("--out", maps_out, "output directory")->required();
  maps_cmd->set_config("--config");

  // ---- gradcheck ----
  auto* grad_cmd = app.add_subcommand("gradcheck", "finite-difference check of the full objective");
  int grad_side = 16, grad_ndf = 4;
  double grad_h = 1e-5;
  std::uint64_t grad_seed = 0;
  std::string grad_out;
  ModelFlags grad_model;
  grad_model.patch = 4;
  grad_model.embed_dim = 8;
  grad_model.depth = 2;
  grad_model.n_heads = 2;
  grad_model.stem_channels = 2;
  grad_cmd->add_option("--side", grad_side, "image side");
  grad_cmd->add_option("--ndf", grad_ndf, "discriminator base channels");
  grad_cmd->add_option("--fd-step", grad_h, "finite-difference step");
  grad_cmd->add_option("--seed", grad_seed, "master seed");
  grad_cmd->add_option("--out", grad_out, "output directory (optional)");
  grad_model.attach(grad_cmd);
  grad_cmd->set_config("--config");

  // ---- selftest ----
  auto* self_cmd = app.add_subcommand("selftest", "run the built-in invariant suite");
  std::string self_out;
  self_cmd->add_option("--out", self_out, "output directory for the report");
  self_cmd->set_config("--config");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    std::cout << app.help();
    return 0;
  }

  if (synth_cmd->parsed()) {
    SynthConfig cfg;
    cfg.n_per_domain = synth_n;
    cfg.side = synth_side;
    cfg.patch = synth_patch;
    cfg.seed = synth_seed;
    const UnpairedDataset ds = synth_dataset(cfg);
    write_dataset(ds, synth_out);
    ConfigMap rc;
    rc.set_int("n", synth_n);
    rc.set_int("side", synth_side);
    rc.set_int("patch", synth_patch);
    rc.set_u64("seed", synth_seed);
    rc.set("out", synth_out);
    write_resolved_config(synth_out, "synth-data", rc);
    std::cout << "wrote " << ds.train_x.images.size() << "/" << ds.val_x.images.size()
              << "/" << ds.test_x.images.size() << " train/val/test images per domain to "
              << synth_out << "\n";
    return 0;
  }

  if (masks_cmd->parsed()) {
    const fs::path data_dir(masks_data);
    const fs::path out_dir(masks_out);
    fs::create_directories(out_dir / "masks");
    std::ifstream manifest(data_dir / "manifest.tsv");
    if (!manifest) throw std::runtime_error("cannot open manifest in " + masks_data);
    std::ofstream out_manifest(out_dir / "manifest.tsv");
    std::string line;
    std::size_t count = 0;
    while (std::getline(manifest, line)) {
      if (line.empty()) continue;
      std::istringstream row(line);
      std::string split_s, domain_s, img_rel, mask_rel;
      std::getline(row, split_s, '\t');
      std::getline(row, domain_s, '\t');
      std::getline(row, img_rel, '\t');
      std::getline(row, mask_rel);
      const ImageGrid img = load_pgm((data_dir / img_rel).string());
      const PatchMask m = pool_to_patchgrid(extract_foreground(img, masks_tau),
                                            masks_patch, masks_rho, masks_sigma);
      const std::string new_mask_rel =
          "masks/" + fs::path(img_rel).stem().string() + ".untf";
      save_mask(m, (out_dir / new_mask_rel).string());
      const fs::path img_abs = fs::absolute(data_dir / img_rel);
      out_manifest << split_s << '\t' << domain_s << '\t'
                   << fs::relative(img_abs, fs::absolute(out_dir)).string() << '\t'
                   << new_mask_rel << '\n';
      ++count;
    }
    ConfigMap rc;
    rc.set("data", masks_data);
    rc.set("out", masks_out);
    rc.set_double("tau", masks_tau);
    rc.set_double("rho", masks_rho);
    rc.set_double("sigma", masks_sigma);
    rc.set_int("patch", masks_patch);
    write_resolved_config(masks_out, "masks", rc);
    std::cout << "extracted " << count << " masks into " << masks_out << "\n";
    return 0;
  }

  if (train_cmd->parsed()) {
    const UnpairedDataset ds = load_dataset(train_data, train_model.sigma);
    TrainState state;
    if (!train_resume.empty()) {
      state = load_checkpoint(train_resume);
    } else {
      TrainConfig cfg;
      cfg.gen = train_model.to_config(ds.side);
      cfg.disc_channels = train_ndf;
      cfg.epochs = train_epochs;
      cfg.batch_size = train_batch;
      cfg.base_lr = train_lr;
      cfg.w_adv = train_w_adv;
      cfg.w_cyc = train_w_cyc;
      cfg.lambda_mask = train_lambda;
      cfg.gan_mode = parse_gan_mode(train_gan);
      cfg.mask_source = parse_mask_source(train_mask_source);
      cfg.seed = train_seed;
      cfg.checkpoint_every = train_ckpt_every;
      state = init_train_state(cfg);
    }
    ConfigMap rc;
    rc.set("data", train_data);
    rc.set("out", train_out);
    rc.set("resume", train_resume);
    rc.set_u64("seed", state.cfg.seed);
    rc.set_int("epochs", state.cfg.epochs);
    rc.set_int("batch", state.cfg.batch_size);
    rc.set_double("lr", state.cfg.base_lr);
    rc.set_double("w-adv", state.cfg.w_adv);
    rc.set_double("w-cyc", state.cfg.w_cyc);
    rc.set_double("lambda-mask", state.cfg.lambda_mask);
    rc.set("gan-mode", gan_mode_name(state.cfg.gan_mode));
    rc.set("mask-source", mask_source_name(state.cfg.mask_source));
    rc.set_int("ndf", state.cfg.disc_channels);
    rc.set_int("checkpoint-every", state.cfg.checkpoint_every);
    rc.set_int("patch", state.cfg.gen.patch);
    rc.set_int("embed", state.cfg.gen.embed_dim);
    rc.set_int("depth", state.cfg.gen.depth);
    rc.set_int("heads", state.cfg.gen.n_heads);
    rc.set_int("window", state.cfg.gen.window);
    rc.set_double("sigma", state.cfg.gen.sigma);
    rc.set("mode", attention_mode_name(state.cfg.gen.mode));
    rc.set_int("stem", state.cfg.gen.stem_channels);
    write_resolved_config(train_out, "train", rc);

    const TrainResult result = train(ds, state, train_out);
    if (!result.curve.empty()) {
      const StepReport& last = result.curve.back().losses;
      std::cout << "finished epoch " << state.epoch << ", final losses: total "
                << fmt_double(last.total) << ", cycle " << fmt_double(last.g_cyc)
                << "\n";
    }
    return 0;
  }

  if (gen_cmd->parsed()) {
    const GeneratorCheckpoint g =
        load_generator_checkpoint(gen_ckpt, parse_direction(gen_direction));
    fs::create_directories(gen_out);
    ConfigMap rc;
    rc.set("ckpt", gen_ckpt);
    rc.set("direction", gen_direction);
    rc.set("input", gen_input);
    rc.set("data", gen_data);
    rc.set("split", gen_split);
    rc.set("out", gen_out);
    write_resolved_config(gen_out, "generate", rc);
    if (!gen_input.empty()) {
      const ImageGrid img = load_pgm(gen_input);
      save_pgm(translate_image(img, g.params, g.cfg),
               (fs::path(gen_out) / "translated.pgm").string());
      std::cout << "translated 1 image\n";
      return 0;
    }
    if (gen_data.empty()) {
      throw CLI::ValidationError("generate", "need --input or --data");
    }
    const UnpairedDataset ds = load_dataset(gen_data, g.cfg.sigma);
    const Split split = gen_split == "train" ? Split::kTrain
                        : gen_split == "val" ? Split::kVal
                                             : Split::kTest;
    const Domain source_domain =
        parse_direction(gen_direction) == Direction::kXY ? Domain::kX : Domain::kY;
    const DatasetPart& part = ds.part(split, source_domain);
    for (std::size_t i = 0; i < part.images.size(); ++i) {
      char name[48];
      std::snprintf(name, sizeof name, "translated_%04zu.pgm", i);
      save_pgm(translate_image(part.images[i], g.params, g.cfg),
               (fs::path(gen_out) / name).string());
    }
    std::cout << "translated " << part.images.size() << " images\n";
    return 0;
  }

  if (eval_cmd->parsed()) {
    const Direction direction = parse_direction(eval_direction);
    fs::create_directories(eval_out);
    std::vector<MetricReport> runs;
    for (std::size_t i = 0; i < eval_ckpts.size(); ++i) {
      const GeneratorCheckpoint g = load_generator_checkpoint(eval_ckpts[i], direction);
      const UnpairedDataset ds = load_dataset(eval_data, g.cfg.sigma);
      runs.push_back(evaluate_split(g.params, g.cfg, ds, direction));
      char name[32];
      std::snprintf(name, sizeof name, "metrics_run%zu.csv", i);
      write_metric_report_csv((fs::path(eval_out) / name).string(), runs.back());
    }
    const std::vector<AggregateStat> agg = aggregate_reports(runs);
    std::ostringstream summary;
    const char* labels[3] = {"mae", "psnr", "ssim"};
    for (int m = 0; m < 3; ++m) {
      char line[96];
      std::snprintf(line, sizeof line, "%s %.4f+/-%.4f\n", labels[m],
                    agg[static_cast<std::size_t>(m)].mean,
                    agg[static_cast<std::size_t>(m)].stddev);
      summary << line;
    }
    std::ofstream((fs::path(eval_out) / "summary.txt")) << summary.str();
    std::cout << summary.str();
    ConfigMap rc;
    rc.set("data", eval_data);
    rc.set("direction", eval_direction);
    rc.set("out", eval_out);
    for (std::size_t i = 0; i < eval_ckpts.size(); ++i) {
      rc.set("ckpt" + (eval_ckpts.size() > 1 ? std::to_string(i) : std::string()),
             eval_ckpts[i]);
    }
    write_resolved_config(eval_out, "eval", rc);
    return 0;
  }

  if (maps_cmd->parsed()) {
    const GeneratorCheckpoint g =
        load_generator_checkpoint(maps_ckpt, parse_direction(maps_direction));
    const ImageGrid input = load_pgm(maps_input);
    ImageGrid target;
    ExportMapsOptions options;
    options.queries = parse_queries(maps_queries);
    if (!maps_target.empty()) {
      target = load_pgm(maps_target);
      options.target = &target;
    }
    export_maps(g.params, g.cfg, input, maps_out, options);
    ConfigMap rc;
    rc.set("ckpt", maps_ckpt);
    rc.set("direction", maps_direction);
    rc.set("input", maps_input);
    rc.set("target", maps_target);
    rc.set("queries", maps_queries);
    rc.set("out", maps_out);
    write_resolved_config(maps_out, "maps", rc);
    std::cout << "exported maps for " << options.queries.size() << " queries to "
              << maps_out << "\n";
    return 0;
  }

  if (grad_cmd->parsed()) {
    // Fixed ground-truth scopes keep the loss smooth under coordinate
    // perturbation (scope selection is thresholded and deliberately carries
    // no gradient), so the check isolates the differentiable path.
    TrainConfig cfg;
    cfg.gen = grad_model.to_config(grad_side);
    cfg.disc_channels = grad_ndf;
    cfg.seed = grad_seed;
    TrainState state = init_train_state(cfg);

    // Zero-initialized biases put relu kinks exactly at the preactivations
    // of the synthetic images' constant regions, where central differences
    // and the subgradient-0 convention must disagree. Jitter every
    // parameter slightly so the check runs at a generic point.
    Rng jitter(derive_seed(grad_seed, "gradcheck-jitter"));
    const auto jitter_params = [&](std::vector<std::pair<std::string, Tensor*>> named) {
      for (auto& [name, t] : named) {
        for (double& v : t->data()) v += jitter.normal(0.0, 0.03);
      }
    };
    jitter_params(state.gen_xy.named_parameters());
    jitter_params(state.gen_yx.named_parameters());
    jitter_params(state.disc_x.named_parameters());
    jitter_params(state.disc_y.named_parameters());

    SynthConfig synth_cfg;
    synth_cfg.n_per_domain = 10;
    synth_cfg.side = grad_side;
    synth_cfg.patch = grad_model.patch;
    synth_cfg.seed = derive_seed(grad_seed, "gradcheck-data");
    const UnpairedDataset ds = synth_dataset(synth_cfg);
    const Tensor x = normalize_for_model(ds.train_x.images[0]);
    const Tensor y = normalize_for_model(ds.train_y.images[0]);
    const PatchMask& mx = ds.train_x.masks[0];
    const PatchMask& my = ds.train_y.masks[0];

    // The total is scaled down so the check's absolute 1e-8 floor is not
    // swamped by central-difference rounding noise on near-zero-gradient
    // coordinates (the noise is ~eps*|f|/2h); scaling leaves the relative
    // error of every genuinely trained coordinate unchanged.
    const auto loss_fn = [&]() {
      GeneratorLossParts parts;
      const GeneratorOutput fx =
          unest_forward(x, state.gen_xy, cfg.gen, ScopeSource::kGroundTruth, &mx);
      const GeneratorOutput fy =
          unest_forward(y, state.gen_yx, cfg.gen, ScopeSource::kGroundTruth, &my);
      const Tensor rec_x =
          unest_forward(fx.image, state.gen_yx, cfg.gen, ScopeSource::kGroundTruth, &mx).image;
      const Tensor rec_y =
          unest_forward(fy.image, state.gen_xy, cfg.gen, ScopeSource::kGroundTruth, &my).image;
      parts.adv_xy = mul_scalar(
          mean(log_act(clamp(sigmoid(discriminator_forward(fx.image, state.disc_y)),
                             1e-12, 1.0))),
          -1.0);
      parts.adv_yx = mul_scalar(
          mean(log_act(clamp(sigmoid(discriminator_forward(fy.image, state.disc_x)),
                             1e-12, 1.0))),
          -1.0);
      parts.cycle = loss_cycle(x, rec_x, y, rec_y);
      parts.mask_xy = loss_mask(fx.mask_probs, mx);
      parts.mask_yx = loss_mask(fy.mask_probs, my);
      return mul_scalar(loss_generator_total(parts), 3e-4);
    };

    std::vector<Tensor*> params;
    for (Tensor* t : state.gen_xy.parameters()) params.push_back(t);
    for (Tensor* t : state.gen_yx.parameters()) params.push_back(t);
    for (Tensor* t : state.disc_x.parameters()) params.push_back(t);
    for (Tensor* t : state.disc_y.parameters()) params.push_back(t);
    std::size_t n_coords = 0;
    for (Tensor* t : params) n_coords += t->numel();

    const double err = grad_check_params(loss_fn, params, grad_h);
    std::cout << "max rel error " << fmt_double(err) << " over " << n_coords
              << " coordinates\n";
    if (!grad_out.empty()) {
      ConfigMap rc;
      rc.set_int("side", grad_side);
      rc.set_int("ndf", grad_ndf);
      rc.set_double("fd-step", grad_h);
      rc.set_u64("seed", grad_seed);
      rc.set("out", grad_out);
      grad_model.record(rc);
      write_resolved_config(grad_out, "gradcheck", rc);
      std::ofstream os(fs::path(grad_out) / "gradcheck.txt");
      os << "max_rel_error=" << fmt_double(err) << "\ncoordinates=" << n_coords
         << "\n";
    }
    if (!(err < 1e-4)) {
      throw std::runtime_error("gradient check failed: max rel error " +
                               fmt_double(err));
    }
    return 0;
  }

  if (self_cmd->parsed()) {
    const std::vector<SelfTestResult> results = run_selftest();
    const std::string report = format_selftest_report(results);
    std::cout << report;
    if (!self_out.empty()) {
      fs::create_directories(self_out);
      std::ofstream os(fs::path(self_out) / "selftest_report.txt");
      os << report;
      ConfigMap rc;
      rc.set("out", self_out);
      write_resolved_config(self_out, "selftest", rc);
    }
    for (const SelfTestResult& r : results) {
      if (!r.passed) throw std::runtime_error("selftest failed: " + r.name);
    }
    return 0;
  }

  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run_cli(argc, argv);
  } catch (const CLI::ParseError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
}
