#pragma once

#include <string>
#include <vector>

#include "unest/tensor.hpp"

namespace unest {

// Single-channel image with intensities in [0,1], row-major.
struct ImageGrid {
  int height = 0;
  int width = 0;
  std::vector<double> pixels;

  ImageGrid() = default;
  ImageGrid(int h, int w, double fill = 0.0)
      : height(h), width(w),
        pixels(static_cast<std::size_t>(h) * static_cast<std::size_t>(w), fill) {}

  double& at(int r, int c) {
    return pixels[static_cast<std::size_t>(r) * width + c];
  }
  double at(int r, int c) const {
    return pixels[static_cast<std::size_t>(r) * width + c];
  }
  std::size_t size() const { return pixels.size(); }
};

// Binary PGM (P5), 8- or 16-bit; intensities are divided by maxval on load.
ImageGrid load_pgm(const std::string& path);
// 8-bit writer; round trip differs from the original by at most 1/510 per
// pixel. Out-of-range intensities are rejected.
void save_pgm(const ImageGrid& img, const std::string& path);

// Affine [0,1] -> [-1,1] as a [1,H,W] tensor, and its inverse (clamped back
// into [0,1]).
Tensor normalize_for_model(const ImageGrid& img);
ImageGrid denormalize(const Tensor& t);

}  // namespace unest
