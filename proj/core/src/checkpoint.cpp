#include "unest/checkpoint.hpp"

#include <filesystem>
#include <stdexcept>

#include "unest/config.hpp"
#include "unest/rng.hpp"
#include "unest/untf.hpp"

namespace fs = std::filesystem;

namespace unest {
namespace {

void write_model_config(ConfigMap& c, const UNestConfig& g) {
  c.set_int("model.image_side", g.image_side);
  c.set_int("model.patch", g.patch);
  c.set_int("model.embed_dim", g.embed_dim);
  c.set_int("model.depth", g.depth);
  c.set_int("model.n_heads", g.n_heads);
  c.set_int("model.window", g.window);
  c.set_double("model.sigma", g.sigma);
  c.set("model.mode", attention_mode_name(g.mode));
  c.set_int("model.stem_channels", g.stem_channels);
}

UNestConfig read_model_config(const ConfigMap& c) {
  UNestConfig g;
  g.image_side = static_cast<int>(c.get_int("model.image_side"));
  g.patch = static_cast<int>(c.get_int("model.patch"));
  g.embed_dim = static_cast<int>(c.get_int("model.embed_dim"));
  g.depth = static_cast<int>(c.get_int("model.depth"));
  g.n_heads = static_cast<int>(c.get_int("model.n_heads"));
  g.window = static_cast<int>(c.get_int("model.window"));
  g.sigma = c.get_double("model.sigma");
  g.mode = parse_attention_mode(c.get("model.mode"));
  g.stem_channels = static_cast<int>(c.get_int("model.stem_channels"));
  return g;
}

void load_params_into(const fs::path& dir, const std::string& net,
                      std::vector<std::pair<std::string, Tensor*>> named,
                      bool prefer_exact) {
  for (auto& [name, t] : named) {
    const fs::path exact = dir / "state64" / (net + "." + name + ".untf");
    const fs::path f32 = dir / "weights" / (net + "." + name + ".untf");
    const fs::path& src = prefer_exact && fs::exists(exact) ? exact : f32;
    const Tensor loaded = load_untf(src.string());
    if (loaded.shape() != t->shape()) {
      throw std::runtime_error("checkpoint tensor " + src.string() +
                               " has shape " + shape_to_string(loaded.shape()) +
                               ", expected " + shape_to_string(t->shape()));
    }
    t->data() = loaded.data();
  }
}

void save_adam(const fs::path& dir, const std::string& net,
               const std::vector<std::pair<std::string, Tensor*>>& named,
               const AdamState& adam) {
  if (adam.first_moment.empty()) return;  // not yet stepped
  if (adam.first_moment.size() != named.size()) {
    throw std::logic_error("adam state size mismatch for " + net);
  }
  fs::create_directories(dir / "state64" / "adam");
  for (std::size_t i = 0; i < named.size(); ++i) {
    const Shape& shape = named[i].second->shape();
    save_untf((dir / "state64" / "adam" / (net + "." + named[i].first + ".m.untf")).string(),
              Tensor::from_data(shape, adam.first_moment[i]), 2);
    save_untf((dir / "state64" / "adam" / (net + "." + named[i].first + ".v.untf")).string(),
              Tensor::from_data(shape, adam.second_moment[i]), 2);
  }
}

void load_adam(const fs::path& dir, const std::string& net,
               const std::vector<std::pair<std::string, Tensor*>>& named,
               AdamState& adam, long step_count) {
  adam.step_count = step_count;
  if (step_count == 0) return;
  adam.first_moment.clear();
  adam.second_moment.clear();
  for (const auto& [name, t] : named) {
    const fs::path m = dir / "state64" / "adam" / (net + "." + name + ".m.untf");
    const fs::path v = dir / "state64" / "adam" / (net + "." + name + ".v.untf");
    adam.first_moment.push_back(load_untf(m.string()).data());
    adam.second_moment.push_back(load_untf(v.string()).data());
    if (adam.first_moment.back().size() != t->numel() ||
        adam.second_moment.back().size() != t->numel()) {
      throw std::runtime_error("adam moment size mismatch for " + net + "." + name);
    }
  }
}

void save_params(const fs::path& dir, const std::string& net,
                 const std::vector<std::pair<std::string, Tensor*>>& named) {
  for (const auto& [name, t] : named) {
    save_untf((dir / "weights" / (net + "." + name + ".untf")).string(), *t, 1);
    save_untf((dir / "state64" / (net + "." + name + ".untf")).string(), *t, 2);
  }
}

}  // namespace

void save_checkpoint(const std::string& dir_s, const TrainState& state) {
  const fs::path dir(dir_s);
  fs::create_directories(dir / "weights");
  fs::create_directories(dir / "state64");

  ConfigMap c;
  write_model_config(c, state.cfg.gen);
  c.set_int("train.disc_channels", state.cfg.disc_channels);
  c.set_int("train.epochs", state.cfg.epochs);
  c.set_int("train.batch_size", state.cfg.batch_size);
  c.set_double("train.base_lr", state.cfg.base_lr);
  c.set_double("train.w_adv", state.cfg.w_adv);
  c.set_double("train.w_cyc", state.cfg.w_cyc);
  c.set_double("train.lambda_mask", state.cfg.lambda_mask);
  c.set("train.gan_mode", gan_mode_name(state.cfg.gan_mode));
  c.set("train.mask_source", mask_source_name(state.cfg.mask_source));
  c.set_u64("train.seed", state.cfg.seed);
  c.set_int("train.checkpoint_every", state.cfg.checkpoint_every);
  c.set_int("state.epoch", state.epoch);
  c.set_int("state.adam_gen_xy.steps", state.adam_gen_xy.step_count);
  c.set_int("state.adam_gen_yx.steps", state.adam_gen_yx.step_count);
  c.set_int("state.adam_disc_x.steps", state.adam_disc_x.step_count);
  c.set_int("state.adam_disc_y.steps", state.adam_disc_y.step_count);
  save_config_file((dir / "config.txt").string(), c);

  TrainState& mutable_state = const_cast<TrainState&>(state);
  save_params(dir, "gen_xy", mutable_state.gen_xy.named_parameters());
  save_params(dir, "gen_yx", mutable_state.gen_yx.named_parameters());
  save_params(dir, "disc_x", mutable_state.disc_x.named_parameters());
  save_params(dir, "disc_y", mutable_state.disc_y.named_parameters());
  save_adam(dir, "gen_xy", mutable_state.gen_xy.named_parameters(), state.adam_gen_xy);
  save_adam(dir, "gen_yx", mutable_state.gen_yx.named_parameters(), state.adam_gen_yx);
  save_adam(dir, "disc_x", mutable_state.disc_x.named_parameters(), state.adam_disc_x);
  save_adam(dir, "disc_y", mutable_state.disc_y.named_parameters(), state.adam_disc_y);
}

TrainState load_checkpoint(const std::string& dir_s) {
  const fs::path dir(dir_s);
  const ConfigMap c = load_config_file((dir / "config.txt").string());
  TrainConfig cfg;
  cfg.gen = read_model_config(c);
  cfg.disc_channels = static_cast<int>(c.get_int("train.disc_channels"));
  cfg.epochs = static_cast<int>(c.get_int("train.epochs"));
  cfg.batch_size = static_cast<int>(c.get_int("train.batch_size"));
  cfg.base_lr = c.get_double("train.base_lr");
  cfg.w_adv = c.get_double("train.w_adv");
  cfg.w_cyc = c.get_double("train.w_cyc");
  cfg.lambda_mask = c.get_double("train.lambda_mask");
  cfg.gan_mode = parse_gan_mode(c.get("train.gan_mode"));
  cfg.mask_source = parse_mask_source(c.get("train.mask_source"));
  cfg.seed = c.get_u64("train.seed");
  cfg.checkpoint_every = static_cast<int>(c.get_int("train.checkpoint_every"));

  TrainState state = init_train_state(cfg);
  state.epoch = static_cast<int>(c.get_int("state.epoch"));
  load_params_into(dir, "gen_xy", state.gen_xy.named_parameters(), true);
  load_params_into(dir, "gen_yx", state.gen_yx.named_parameters(), true);
  load_params_into(dir, "disc_x", state.disc_x.named_parameters(), true);
  load_params_into(dir, "disc_y", state.disc_y.named_parameters(), true);
  load_adam(dir, "gen_xy", state.gen_xy.named_parameters(), state.adam_gen_xy,
            c.get_int("state.adam_gen_xy.steps"));
  load_adam(dir, "gen_yx", state.gen_yx.named_parameters(), state.adam_gen_yx,
            c.get_int("state.adam_gen_yx.steps"));
  load_adam(dir, "disc_x", state.disc_x.named_parameters(), state.adam_disc_x,
            c.get_int("state.adam_disc_x.steps"));
  load_adam(dir, "disc_y", state.disc_y.named_parameters(), state.adam_disc_y,
            c.get_int("state.adam_disc_y.steps"));
  return state;
}

GeneratorCheckpoint load_generator_checkpoint(const std::string& dir_s,
                                              Direction direction) {
  const fs::path dir(dir_s);
  const ConfigMap c = load_config_file((dir / "config.txt").string());
  GeneratorCheckpoint out;
  out.cfg = read_model_config(c);
  Rng rng(0);
  out.params = init_unest_params(out.cfg, rng);
  const std::string net = direction == Direction::kXY ? "gen_xy" : "gen_yx";
  load_params_into(dir, net, out.params.named_parameters(), true);
  return out;
}

}  // namespace unest
