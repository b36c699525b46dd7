#pragma once

#include <string>

#include "unest/tensor.hpp"

namespace unest {

// UNTF binary tensor file: magic "UNTF", u8 version, u8 rank, little-endian
// u32 dims[rank], then the payload row-major. Version 1 carries float32 (the
// interchange format for masks, exported maps and published weights);
// version 2 carries float64 and is used for training state, where a float32
// round trip would break bit-exact resume.
void save_untf(const std::string& path, const Tensor& t, int version = 1);
Tensor load_untf(const std::string& path);

}  // namespace unest
