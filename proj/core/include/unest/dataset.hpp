#pragma once

#include <string>
#include <vector>

#include "unest/image.hpp"
#include "unest/mask.hpp"

namespace unest {

enum class Split { kTrain, kVal, kTest };
enum class Domain { kX, kY };
enum class Direction { kXY, kYX };

const char* split_name(Split s);
const char* domain_name(Domain d);
const char* direction_name(Direction d);
Direction parse_direction(const std::string& s);

struct DatasetPart {
  std::vector<ImageGrid> images;
  std::vector<PatchMask> masks;  // aligned with images
};

// Two unpaired domains split 8:1:1. Training never consumes an (x,y) index
// pair; the test-split target lists exist only for metric evaluation, where
// the synthetic generator replays each test shape in the other domain's
// rendering style.
struct UnpairedDataset {
  int side = 0;
  int patch = 0;
  DatasetPart train_x, train_y, val_x, val_y, test_x, test_y;
  std::vector<ImageGrid> test_targets_xy;  // y-style target per test_x image
  std::vector<ImageGrid> test_targets_yx;  // x-style target per test_y image

  DatasetPart& part(Split s, Domain d);
  const DatasetPart& part(Split s, Domain d) const;
};

// Writes PGM images, UNTF masks, the manifest
// (split<TAB>domain<TAB>image_path<TAB>mask_path, paths relative to dir) and
// pairs.tsv (direction<TAB>input_path<TAB>target_path) for the test split.
void write_dataset(const UnpairedDataset& ds, const std::string& dir);

// Loads a dataset directory through its manifest; mask files may have been
// produced by any tool as long as they are rank-2 UNTF grids.
UnpairedDataset load_dataset(const std::string& dir, double sigma = 0.5);

}  // namespace unest
