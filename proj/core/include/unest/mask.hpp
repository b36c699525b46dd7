#pragma once

#include <string>
#include <vector>

#include "unest/image.hpp"

namespace unest {

// Token-grid foreground probabilities plus their thresholded binary form.
// binary[i] is probs[i] > sigma (strict, ties go to background).
struct PatchMask {
  int grid_h = 0;
  int grid_w = 0;
  double sigma = 0.5;
  std::vector<double> probs;
  std::vector<std::uint8_t> binary;

  PatchMask() = default;
  PatchMask(int h, int w, double sigma_ = 0.5)
      : grid_h(h), grid_w(w), sigma(sigma_),
        probs(static_cast<std::size_t>(h) * w, 0.0),
        binary(static_cast<std::size_t>(h) * w, 0) {}

  static PatchMask from_probs(int h, int w, std::vector<double> probs,
                              double sigma);
  static PatchMask all_foreground(int h, int w, double sigma = 0.5);

  std::size_t size() const { return probs.size(); }
  bool is_foreground(int i, int j) const {
    return binary[static_cast<std::size_t>(i) * grid_w + j] != 0;
  }
  int count_foreground() const;
};

// Pixel-level H x W binary mask.
struct PixelMask {
  int height = 0;
  int width = 0;
  std::vector<std::uint8_t> values;

  PixelMask() = default;
  PixelMask(int h, int w)
      : height(h), width(w), values(static_cast<std::size_t>(h) * w, 0) {}
  std::uint8_t& at(int r, int c) {
    return values[static_cast<std::size_t>(r) * width + c];
  }
  std::uint8_t at(int r, int c) const {
    return values[static_cast<std::size_t>(r) * width + c];
  }
};

// Deterministic stand-in for a learned segmenter: pixels brighter than tau
// are candidates, 4-connected components are labeled and only the largest
// one (by pixel count, ties broken by smallest row-major start) is kept.
// Throws when no pixel exceeds tau.
PixelMask extract_foreground(const ImageGrid& img, double tau);

// Patch (h,w) is foreground iff the mean of its p x p block is >= rho;
// probs are set to exactly 0/1.
PatchMask pool_to_patchgrid(const PixelMask& pixel_mask, int patch,
                            double rho = 0.5, double sigma = 0.5);

// Lossless round trip through a rank-2 UNTF tensor of 0/1 values.
void save_mask(const PatchMask& m, const std::string& path);
PatchMask load_mask(const std::string& path, double sigma = 0.5);

}  // namespace unest
