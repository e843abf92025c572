#pragma once

#include "nps/io/observation.hpp"

#include <cstdint>
#include <vector>

namespace nps::render {

// Early-stage shadow guidance: entry (image i, pixel p) is 0 when the
// channel-averaged intensity falls below 0.1 times the pixel's mean intensity
// over all images, else 1. Layout [image][row][col].
std::vector<std::uint8_t> shadow_guidance_mask(const io::ObservationStack& stack,
                                               double threshold = 0.1);

} // namespace nps::render
