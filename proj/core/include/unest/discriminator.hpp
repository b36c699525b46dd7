#pragma once

#include <string>
#include <utility>
#include <vector>

#include "unest/rng.hpp"
#include "unest/tensor.hpp"

namespace unest {

// PatchGAN: 4x4 convs (three stride-2, one stride-1), leaky-relu 0.2, final
// 1-channel map of pre-sigmoid patch scores. The sigmoid lives in the loss.
struct DiscriminatorParams {
  std::vector<Tensor> w;
  std::vector<Tensor> b;

  std::vector<Tensor*> parameters();
  std::vector<std::pair<std::string, Tensor*>> named_parameters();
};

DiscriminatorParams init_discriminator_params(int base_channels, Rng& rng);

Tensor discriminator_forward(const Tensor& image,
                             const DiscriminatorParams& params);

}  // namespace unest
