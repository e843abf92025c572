#pragma once

#include "nps/render/geometry.hpp"

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace nps::io {

// n intensity-normalized images with their lights (internal frame) and the
// object mask. Images are stored [image][row][col][channel].
struct ObservationStack {
    std::size_t height = 0;
    std::size_t width = 0;
    std::size_t channels = 0;
    std::vector<float> images;
    std::vector<render::Light> lights;
    std::vector<std::uint8_t> mask;  // [row][col], 1 = object
    std::vector<std::string> names;

    std::size_t count() const { return lights.size(); }
    std::size_t pixels() const { return height * width; }
    std::size_t image_stride() const { return height * width * channels; }

    std::span<const float> image(std::size_t i) const
    {
        return std::span<const float>(images).subspan(i * image_stride(), image_stride());
    }

    float value(std::size_t i, std::size_t row, std::size_t col, std::size_t c) const
    {
        return images[i * image_stride() + (row * width + col) * channels + c];
    }

    std::size_t masked_count() const;

    // Throws std::invalid_argument when the invariants do not hold.
    void validate() const;
};

} // namespace nps::io
