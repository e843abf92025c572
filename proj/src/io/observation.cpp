#include "nps/io/observation.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace nps::io {

std::size_t ObservationStack::masked_count() const
{
    return static_cast<std::size_t>(std::count(mask.begin(), mask.end(), std::uint8_t{1}));
}

void ObservationStack::validate() const
{
    if (height == 0 || width == 0 || channels == 0)
        throw std::invalid_argument("observation stack has an empty dimension");
    if (images.size() != count() * image_stride())
        throw std::invalid_argument("observation stack: " + std::to_string(images.size()) +
                                    " values for " + std::to_string(count()) + " lights");
    if (mask.size() != pixels())
        throw std::invalid_argument("observation stack: mask size mismatch");
    if (!names.empty() && names.size() != count())
        throw std::invalid_argument("observation stack: name count mismatch");
    for (float v : images)
        if (!std::isfinite(v) || v < 0.0f)
            throw std::invalid_argument("observation stack: intensities must be finite and >= 0");
    for (const auto& l : lights)
        l.validate();
}

} // namespace nps::io
