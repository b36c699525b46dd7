#pragma once

#include <string>
#include <vector>

#include "unest/generator.hpp"

namespace unest {

struct ExportMapsOptions {
  std::vector<TokenIndex> queries;      // token-grid positions to export
  const ImageGrid* target = nullptr;    // enables the error map when present
};

// Writes, under out_dir: the translated image, the predicted mask (UNTF +
// PGM), per-(block, head, query) attention rows reshaped to the token grid
// (UNTF + min-max PGM rendering), and |output - target| when a target is
// given. Attention rows are asserted to sum to 1 over the scope before
// rendering.
void export_maps(const UNestParams& params, const UNestConfig& cfg,
                 const ImageGrid& input, const std::string& out_dir,
                 const ExportMapsOptions& options);

}  // namespace unest
