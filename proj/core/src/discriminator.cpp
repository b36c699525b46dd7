#include "unest/discriminator.hpp"

#include <stdexcept>

namespace unest {
namespace {

Tensor init_weight(const Shape& shape, Rng& rng) {
  std::vector<double> data(shape_numel(shape));
  for (double& v : data) v = rng.normal(0.0, 0.02);
  return Tensor::from_data(shape, std::move(data), true);
}

}  // namespace

DiscriminatorParams init_discriminator_params(int base_channels, Rng& rng) {
  if (base_channels < 1) {
    throw std::invalid_argument("discriminator base_channels must be >= 1");
  }
  const int c = base_channels;
  DiscriminatorParams p;
  const int plan[4][2] = {{c, 1}, {2 * c, c}, {4 * c, 2 * c}, {1, 4 * c}};
  for (const auto& [out_c, in_c] : plan) {
    p.w.push_back(init_weight({out_c, in_c, 4, 4}, rng));
    p.b.push_back(Tensor::zeros({out_c}, true));
  }
  return p;
}

std::vector<Tensor*> DiscriminatorParams::parameters() {
  std::vector<Tensor*> out;
  for (auto& [name, t] : named_parameters()) out.push_back(t);
  return out;
}

std::vector<std::pair<std::string, Tensor*>>
DiscriminatorParams::named_parameters() {
  std::vector<std::pair<std::string, Tensor*>> out;
  for (std::size_t l = 0; l < w.size(); ++l) {
    out.emplace_back("conv." + std::to_string(l) + ".w", &w[l]);
    out.emplace_back("conv." + std::to_string(l) + ".b", &b[l]);
  }
  return out;
}

Tensor discriminator_forward(const Tensor& image,
                             const DiscriminatorParams& params) {
  if (params.w.size() != 4) {
    throw std::invalid_argument("discriminator expects 4 conv layers");
  }
  Tensor h = image;
  for (std::size_t l = 0; l < 4; ++l) {
    const int stride = l < 3 ? 2 : 1;
    h = add_channel_bias(conv2d(h, params.w[l], stride, 1), params.b[l]);
    if (l + 1 < 4) h = leaky_relu(h, 0.2);
  }
  return h;
}

}  // namespace unest
