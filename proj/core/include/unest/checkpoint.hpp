#pragma once

#include <string>

#include "unest/train.hpp"

namespace unest {

// Checkpoint directory: config.txt (key=value), weights/ as float32 UNTF
// (interchange), state64/ as float64 UNTF for parameters and Adam moments so
// a resumed run retraces the uninterrupted one bit for bit.
void save_checkpoint(const std::string& dir, const TrainState& state);
TrainState load_checkpoint(const std::string& dir);

struct GeneratorCheckpoint {
  UNestConfig cfg;
  UNestParams params;
};

// Loads one generator for synthesis/evaluation; prefers the exact float64
// state when present, else the float32 weights.
GeneratorCheckpoint load_generator_checkpoint(const std::string& dir,
                                              Direction direction);

}  // namespace unest
