#pragma once

#include <compare>
#include <cstddef>
#include <vector>

#include "unest/mask.hpp"

namespace unest {

struct TokenIndex {
  int row = 0;
  int col = 0;
  auto operator<=>(const TokenIndex&) const = default;
};

// Ordered set of token-grid positions a query may attend to. Entries are
// unique and in-bounds; ordering is row-major for all constructors below.
class Scope {
 public:
  Scope() = default;
  explicit Scope(std::vector<TokenIndex> entries)
      : entries_(std::move(entries)) {}

  const std::vector<TokenIndex>& entries() const { return entries_; }
  std::size_t size() const { return entries_.size(); }
  bool empty() const { return entries_.empty(); }

  // Flat row-major indices for a grid of the given width.
  std::vector<int> flat(int grid_w) const;

  bool operator==(const Scope&) const = default;

 private:
  std::vector<TokenIndex> entries_;
};

// Every position of the grid, row-major.
Scope scope_global(int grid_h, int grid_w);

// The m x m window centered on the query, clipped at grid boundaries.
// m must be odd.
Scope scope_local(TokenIndex query, int m, int grid_h, int grid_w);

// Positions with mask probability strictly above sigma; shared by every
// foreground query.
Scope scope_structural(const PatchMask& mask);

// The complement: positions with probability <= sigma.
Scope scope_background(const PatchMask& mask);

}  // namespace unest
