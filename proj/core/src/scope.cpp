#include "unest/scope.hpp"

#include <algorithm>
#include <stdexcept>

namespace unest {

std::vector<int> Scope::flat(int grid_w) const {
  std::vector<int> out(entries_.size());
  for (std::size_t i = 0; i < entries_.size(); ++i) {
    out[i] = entries_[i].row * grid_w + entries_[i].col;
  }
  return out;
}

Scope scope_global(int grid_h, int grid_w) {
  if (grid_h < 1 || grid_w < 1) {
    throw std::invalid_argument("scope_global: grid extents must be positive");
  }
  std::vector<TokenIndex> entries;
  entries.reserve(static_cast<std::size_t>(grid_h) * grid_w);
  for (int i = 0; i < grid_h; ++i) {
    for (int j = 0; j < grid_w; ++j) entries.push_back({i, j});
  }
  return Scope(std::move(entries));
}

Scope scope_local(TokenIndex query, int m, int grid_h, int grid_w) {
  if (m < 1 || m % 2 == 0) {
    throw std::invalid_argument("scope_local: window must be odd, got " +
                                std::to_string(m));
  }
  if (query.row < 0 || query.row >= grid_h || query.col < 0 ||
      query.col >= grid_w) {
    throw std::out_of_range("scope_local: query outside grid");
  }
  const int half = m / 2;
  const int i_lo = std::max(0, query.row - half);
  const int i_hi = std::min(grid_h - 1, query.row + half);
  const int j_lo = std::max(0, query.col - half);
  const int j_hi = std::min(grid_w - 1, query.col + half);
  std::vector<TokenIndex> entries;
  entries.reserve(static_cast<std::size_t>(i_hi - i_lo + 1) * (j_hi - j_lo + 1));
  for (int i = i_lo; i <= i_hi; ++i) {
    for (int j = j_lo; j <= j_hi; ++j) entries.push_back({i, j});
  }
  return Scope(std::move(entries));
}

Scope scope_structural(const PatchMask& mask) {
  std::vector<TokenIndex> entries;
  for (int i = 0; i < mask.grid_h; ++i) {
    for (int j = 0; j < mask.grid_w; ++j) {
      if (mask.probs[static_cast<std::size_t>(i) * mask.grid_w + j] > mask.sigma) {
        entries.push_back({i, j});
      }
    }
  }
  return Scope(std::move(entries));
}

Scope scope_background(const PatchMask& mask) {
  std::vector<TokenIndex> entries;
  for (int i = 0; i < mask.grid_h; ++i) {
    for (int j = 0; j < mask.grid_w; ++j) {
      if (!(mask.probs[static_cast<std::size_t>(i) * mask.grid_w + j] > mask.sigma)) {
        entries.push_back({i, j});
      }
    }
  }
  return Scope(std::move(entries));
}

}  // namespace unest
