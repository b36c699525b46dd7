#include "unest/synth.hpp"

#include <cmath>
#include <stdexcept>

#include "unest/rng.hpp"

namespace unest {
namespace {

struct Ellipse {
  double cx, cy, ax, ay;
  bool contains(double px, double py) const {
    const double u = (px - cx) / ax;
    const double v = (py - cy) / ay;
    return u * u + v * v <= 1.0;
  }
};

struct SampleRecipe {
  Ellipse body;
  std::vector<Ellipse> cavities;
  double x_body, x_cavity;
  double y_body, y_cavity;
};

constexpr double kBackgroundX = 0.03;
constexpr double kGradientTop = 0.0;
constexpr double kGradientBottom = 0.08;

// All draws happen in a fixed order so one seed pins the whole sample,
// including both domains' rendering styles (the test-split replay renders
// the same recipe in the other style).
SampleRecipe draw_recipe(std::uint64_t sample_seed, int side) {
  Rng rng(sample_seed);
  SampleRecipe r;
  const double s = static_cast<double>(side);
  r.body.ax = s * rng.uniform(0.27, 0.45);
  r.body.ay = s * rng.uniform(0.27, 0.45);
  r.body.cx = rng.uniform(r.body.ax + 1.0, s - 1.0 - r.body.ax);
  r.body.cy = rng.uniform(r.body.ay + 1.0, s - 1.0 - r.body.ay);
  const int n_cavities = 1 + static_cast<int>(rng.uniform_int(3));
  for (int c = 0; c < n_cavities; ++c) {
    Ellipse cav;
    cav.ax = s * rng.uniform(0.07, 0.14);
    cav.ay = s * rng.uniform(0.07, 0.14);
    const double u = rng.uniform(-0.5, 0.5);
    const double v = rng.uniform(-0.5, 0.5);
    cav.cx = r.body.cx + u * r.body.ax;
    cav.cy = r.body.cy + v * r.body.ay;
    // Shrink until the cavity's bounding box sits inside the body.
    bool placed = false;
    for (int attempt = 0; attempt < 4; ++attempt) {
      const double du = (std::abs(cav.cx - r.body.cx) + cav.ax) / r.body.ax;
      const double dv = (std::abs(cav.cy - r.body.cy) + cav.ay) / r.body.ay;
      if (du * du + dv * dv <= 0.9 * 0.9) {
        placed = true;
        break;
      }
      cav.ax *= 0.7;
      cav.ay *= 0.7;
    }
    if (placed) r.cavities.push_back(cav);
  }
  r.x_body = rng.uniform(0.50, 0.60);
  r.x_cavity = rng.uniform(0.85, 0.95);
  r.y_body = rng.uniform(0.75, 0.85);
  r.y_cavity = rng.uniform(0.22, 0.32);
  return r;
}

ImageGrid render(const SampleRecipe& r, int side, Domain style) {
  ImageGrid img(side, side);
  for (int row = 0; row < side; ++row) {
    const double bg =
        style == Domain::kX
            ? kBackgroundX
            : kGradientTop + (kGradientBottom - kGradientTop) *
                                 static_cast<double>(row) / (side - 1);
    const double body = style == Domain::kX ? r.x_body : r.y_body;
    const double cavity = style == Domain::kX ? r.x_cavity : r.y_cavity;
    for (int col = 0; col < side; ++col) {
      const double px = col + 0.5;
      const double py = row + 0.5;
      double v = bg;
      if (r.body.contains(px, py)) {
        v = body;
        for (const Ellipse& cav : r.cavities) {
          if (cav.contains(px, py)) {
            v = cavity;
            break;
          }
        }
      }
      img.at(row, col) = v;
    }
  }
  return img;
}

PatchMask ground_truth_mask(const SampleRecipe& r, int side, int patch) {
  PixelMask pixel(side, side);
  for (int row = 0; row < side; ++row) {
    for (int col = 0; col < side; ++col) {
      pixel.at(row, col) = r.body.contains(col + 0.5, row + 0.5) ? 1 : 0;
    }
  }
  return pool_to_patchgrid(pixel, patch);
}

}  // namespace

UnpairedDataset synth_dataset(const SynthConfig& cfg) {
  if (cfg.n_per_domain < 10) {
    throw std::invalid_argument("synth_dataset: need at least 10 samples per domain");
  }
  if (cfg.patch < 1 || cfg.side % cfg.patch != 0) {
    throw std::invalid_argument("synth_dataset: side " + std::to_string(cfg.side) +
                                " not divisible by patch " + std::to_string(cfg.patch));
  }
  const int n = cfg.n_per_domain;
  const int n_val = n / 10;
  const int n_test = n / 10;
  const int n_train = n - n_val - n_test;

  UnpairedDataset ds;
  ds.side = cfg.side;
  ds.patch = cfg.patch;

  const auto fill_domain = [&](Domain domain) {
    const char* stream = domain == Domain::kX ? "sample-x" : "sample-y";
    for (int i = 0; i < n; ++i) {
      const SampleRecipe recipe =
          draw_recipe(derive_seed(cfg.seed, stream, static_cast<std::uint64_t>(i)),
                      cfg.side);
      const Split split = i < n_train            ? Split::kTrain
                          : i < n_train + n_val ? Split::kVal
                                                : Split::kTest;
      DatasetPart& part = ds.part(split, domain);
      part.images.push_back(render(recipe, cfg.side, domain));
      part.masks.push_back(ground_truth_mask(recipe, cfg.side, cfg.patch));
      if (split == Split::kTest) {
        // Replay the same recipe in the other domain's style: the aligned
        // evaluation target that unpaired training never sees.
        const Domain other = domain == Domain::kX ? Domain::kY : Domain::kX;
        ImageGrid target = render(recipe, cfg.side, other);
        if (domain == Domain::kX) {
          ds.test_targets_xy.push_back(std::move(target));
        } else {
          ds.test_targets_yx.push_back(std::move(target));
        }
      }
    }
  };
  fill_domain(Domain::kX);
  fill_domain(Domain::kY);
  return ds;
}

double synth_foreground_fraction(const ImageGrid& img) {
  // 0.15 separates both domains' backgrounds (<= 0.08) from every body or
  // cavity intensity (>= 0.22).
  std::size_t count = 0;
  for (const double v : img.pixels) count += v > 0.15 ? 1 : 0;
  return static_cast<double>(count) / static_cast<double>(img.size());
}

}  // namespace unest
