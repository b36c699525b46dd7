#pragma once

#include <cstdint>

#include "unest/dataset.hpp"

namespace unest {

// Synthetic two-modality data: every sample is one bright "anatomy" ellipse
// with 1-3 interior cavity ellipses on a dark background. Domain X renders
// the body at mid intensity with bright cavities on a flat dark background;
// domain Y renders the same shape family with inverted cavity contrast
// (bright body, dark cavities) over a smooth vertical background gradient.
// A structure-preserving cross-domain mapping therefore exists, but the two
// domains are sampled independently, so no pairing is available to training.
struct SynthConfig {
  int n_per_domain = 100;  // >= 10; split 8:1:1
  int side = 64;
  int patch = 8;
  std::uint64_t seed = 0;
};

// Pure function of its config: identical configs give identical datasets.
UnpairedDataset synth_dataset(const SynthConfig& cfg);

// Foreground pixel fraction of one sample's body ellipse, exposed for the
// generator-bound checks.
double synth_foreground_fraction(const ImageGrid& gt_rendering);

}  // namespace unest
