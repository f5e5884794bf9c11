#pragma once

#include <string>

#include "hmlet/model.hpp"

namespace hmlet {

// Binary checkpoint, little-endian:
//   "HMLT"            4 magic bytes
//   format version    u32 (currently 1)
//   num_users         u32
//   num_items         u32
//   dim               u32
//   num_layers        u32
//   variant tag       u8  (0 All, 1 Front, 2 Middle, 3 End,
//                          4 forced-linear, 5 forced-nonlinear)
//   mlp hidden flag   u8  (0 single affine, 1 one hidden layer)
//   embeddings        (num_users+num_items)*dim f64, row-major
//   per gated layer, ascending: w1 row-major f64, b1 f64
//                               [hidden: then w2 row-major f64, b2 f64]
void save_checkpoint(const ModelParams& params, const std::string& path);
ModelParams load_checkpoint(const std::string& path);

} // namespace hmlet
