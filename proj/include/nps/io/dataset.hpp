#pragma once

#include "nps/io/observation.hpp"

#include <filesystem>
#include <vector>

namespace nps::io {

struct LoadOptions {
    bool grayscale = false;      // channel-average after normalization
    bool inverse_gamma = false;  // for gamma-encoded sources
    std::vector<std::size_t> drop_images;  // 0-based indices, e.g. saturated frames
};

// Directory layout:
//   light_directions.txt   n rows "lx ly lz" (dataset frame, toward the light)
//   light_intensities.txt  n rows of 1 or 3 positive reals
//   filenames.txt          optional, one image file name per row, in light order
//   mask.png               optional, nonzero = object
//   *.png                  images; without filenames.txt every PNG whose name
//                          does not start with mask/normal/depth/shadow, sorted
ObservationStack load_dataset(const std::filesystem::path& dir, const LoadOptions& options = {});

// Writes the layout above with 16-bit PNG images (intensity times light
// intensity) named img_000.png, ...
void save_dataset(const std::filesystem::path& dir, const ObservationStack& stack);

} // namespace nps::io
