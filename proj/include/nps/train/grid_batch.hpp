#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace nps::train {

// Masked pixels on a regular sub-grid: square blocks of `block` x `block`
// pixels repeated every `stride` rows and columns from an offset. Each pixel
// links to its nearest sampled neighbours, `spacing` pixels away (1 inside
// blocks, `stride` when blocks are single pixels). Links are -1 where the
// neighbour is outside the image, the mask or the sample.
struct GridBatch {
    std::size_t stride = 1;
    std::size_t block = 1;
    std::size_t spacing = 1;
    std::size_t height = 0;
    std::size_t width = 0;
    std::vector<std::size_t> pixels;              // row * width + col
    std::vector<std::array<double, 2>> coords;    // normalized (x, y)
    std::vector<std::ptrdiff_t> left, right, up, down;

    std::size_t size() const { return pixels.size(); }
};

GridBatch make_grid_batch(std::span<const std::uint8_t> mask, std::size_t height, std::size_t width,
                          std::size_t stride = 1, std::size_t row_offset = 0, std::size_t col_offset = 0,
                          std::size_t block = 1);

// Smallest stride (at least `block`) whose zero-offset sub-grid holds at most
// `max_pixels` masked pixels.
std::size_t auto_stride(std::span<const std::uint8_t> mask, std::size_t height, std::size_t width,
                        std::size_t max_pixels, std::size_t block = 1);

} // namespace nps::train
