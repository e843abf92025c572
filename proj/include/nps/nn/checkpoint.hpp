#pragma once

#include "nps/nn/networks.hpp"
#include "nps/nn/param_store.hpp"

#include <filesystem>

namespace nps::nn {

// Parameter checkpoint: `params.bin` holds every tensor as little-endian
// float32 back to back in store order; `params.json` is the index
//   {"format": "nps-params-v1", "dtype": "float32-le",
//    "tensors": [{"name", "shape", "offset", "count"}, ...]}
// with byte offsets into params.bin.
void save_checkpoint(const ParamStore<float>& store, const std::filesystem::path& dir);

// Copies stored values into an already-constructed store. Names and shapes
// must match exactly.
void load_checkpoint(ParamStore<float>& store, const std::filesystem::path& dir);

} // namespace nps::nn
