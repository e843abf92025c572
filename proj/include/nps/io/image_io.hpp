#pragma once

#include <filesystem>
#include <vector>

namespace nps::io {

struct Image {
    std::size_t height = 0;
    std::size_t width = 0;
    std::size_t channels = 0;
    std::vector<float> data;  // [row][col][channel], RGB order
};

// 8/16-bit integer images are mapped linearly to [0, 1]. With
// `inverse_gamma` the values are raised to 2.2 afterwards. Alpha is dropped.
Image read_image(const std::filesystem::path& path, bool inverse_gamma = false);

// Values are clamped to [0, 1] and quantized to 8 or 16 bits.
void write_png(const std::filesystem::path& path, const Image& image, int bit_depth = 8);

// Value a float in [0, 1] takes after a 16-bit PNG round trip.
float quantize16(float v);

} // namespace nps::io
