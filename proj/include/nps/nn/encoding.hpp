#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace nps::nn {

struct PositionalEncoder {
    std::size_t levels = 10;
    std::size_t input_dim = 2;

    std::size_t output_dim() const { return input_dim + 2 * levels * input_dim; }
};

// Non-differentiable counterpart of ad::encode with the same layout.
std::vector<double> encode(std::span<const double> x, std::size_t levels);

// Pixel centre (col, row) mapped into (-1, 1)^2.
inline double normalize_coordinate(double pixel, std::size_t extent)
{
    return (2.0 * (pixel + 0.5)) / static_cast<double>(extent) - 1.0;
}

} // namespace nps::nn
