#include "unest/mask.hpp"

#include <stdexcept>
#include <vector>

#include "unest/untf.hpp"

namespace unest {

PatchMask PatchMask::from_probs(int h, int w, std::vector<double> probs,
                                double sigma) {
  if (probs.size() != static_cast<std::size_t>(h) * w) {
    throw std::invalid_argument("PatchMask: probability count mismatch");
  }
  PatchMask m(h, w, sigma);
  m.probs = std::move(probs);
  for (std::size_t i = 0; i < m.probs.size(); ++i) {
    const double p = m.probs[i];
    if (!(p >= 0.0 && p <= 1.0)) {
      throw std::invalid_argument("PatchMask: probability " +
                                  std::to_string(p) + " outside [0,1]");
    }
    m.binary[i] = p > sigma ? 1 : 0;
  }
  return m;
}

PatchMask PatchMask::all_foreground(int h, int w, double sigma) {
  PatchMask m(h, w, sigma);
  std::fill(m.probs.begin(), m.probs.end(), 1.0);
  std::fill(m.binary.begin(), m.binary.end(), 1);
  return m;
}

int PatchMask::count_foreground() const {
  int n = 0;
  for (const std::uint8_t b : binary) n += b;
  return n;
}

PixelMask extract_foreground(const ImageGrid& img, double tau) {
  if (!(tau > 0.0 && tau < 1.0)) {
    throw std::invalid_argument("extract_foreground: tau must be in (0,1)");
  }
  const int h = img.height;
  const int w = img.width;
  std::vector<int> label(static_cast<std::size_t>(h) * w, -1);
  int best_label = -1;
  std::size_t best_area = 0;
  int next_label = 0;
  std::vector<int> frontier;
  for (int r0 = 0; r0 < h; ++r0) {
    for (int c0 = 0; c0 < w; ++c0) {
      const int start = r0 * w + c0;
      if (img.pixels[static_cast<std::size_t>(start)] <= tau ||
          label[static_cast<std::size_t>(start)] >= 0) {
        continue;
      }
      // Flood fill one 4-connected component.
      const int cur = next_label++;
      std::size_t area = 0;
      frontier.clear();
      frontier.push_back(start);
      label[static_cast<std::size_t>(start)] = cur;
      while (!frontier.empty()) {
        const int p = frontier.back();
        frontier.pop_back();
        ++area;
        const int r = p / w;
        const int c = p % w;
        const int neigh[4] = {p - w, p + w, p - 1, p + 1};
        const bool ok[4] = {r > 0, r + 1 < h, c > 0, c + 1 < w};
        for (int k = 0; k < 4; ++k) {
          if (!ok[k]) continue;
          const int q = neigh[k];
          if (label[static_cast<std::size_t>(q)] < 0 &&
              img.pixels[static_cast<std::size_t>(q)] > tau) {
            label[static_cast<std::size_t>(q)] = cur;
            frontier.push_back(q);
          }
        }
      }
      // Ties resolved by scan order: the earlier component wins.
      if (area > best_area) {
        best_area = area;
        best_label = cur;
      }
    }
  }
  if (best_label < 0) {
    throw std::runtime_error("extract_foreground: no pixel exceeds tau=" +
                             std::to_string(tau));
  }
  PixelMask out(h, w);
  for (std::size_t i = 0; i < label.size(); ++i) {
    out.values[i] = label[i] == best_label ? 1 : 0;
  }
  return out;
}

PatchMask pool_to_patchgrid(const PixelMask& pixel_mask, int patch, double rho,
                            double sigma) {
  const int h = pixel_mask.height;
  const int w = pixel_mask.width;
  if (patch < 1 || h % patch != 0 || w % patch != 0) {
    throw std::invalid_argument(
        "pool_to_patchgrid: patch " + std::to_string(patch) +
        " must divide mask dims " + std::to_string(h) + "x" + std::to_string(w));
  }
  const int gh = h / patch;
  const int gw = w / patch;
  PatchMask m(gh, gw, sigma);
  const double block = static_cast<double>(patch) * patch;
  for (int gi = 0; gi < gh; ++gi) {
    for (int gj = 0; gj < gw; ++gj) {
      int count = 0;
      for (int r = 0; r < patch; ++r) {
        for (int c = 0; c < patch; ++c) {
          count += pixel_mask.at(gi * patch + r, gj * patch + c);
        }
      }
      const bool fg = static_cast<double>(count) / block >= rho;
      const std::size_t idx = static_cast<std::size_t>(gi) * gw + gj;
      m.probs[idx] = fg ? 1.0 : 0.0;
      m.binary[idx] = fg ? 1 : 0;
    }
  }
  return m;
}

void save_mask(const PatchMask& m, const std::string& path) {
  save_untf(path, Tensor::from_data({m.grid_h, m.grid_w}, m.probs), 1);
}

PatchMask load_mask(const std::string& path, double sigma) {
  const Tensor t = load_untf(path);
  if (t.rank() != 2) {
    throw std::runtime_error("malformed mask file " + path +
                             ": expected rank 2, got rank " +
                             std::to_string(t.rank()));
  }
  return PatchMask::from_probs(t.dim(0), t.dim(1), t.data(), sigma);
}

}  // namespace unest
