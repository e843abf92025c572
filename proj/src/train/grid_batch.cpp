#include "nps/train/grid_batch.hpp"

#include "nps/nn/encoding.hpp"

#include <algorithm>
#include <stdexcept>

namespace nps::train {

namespace {

bool sampled(std::size_t i, std::size_t stride, std::size_t offset, std::size_t block)
{
    return (i + stride - offset % stride) % stride < block;
}

} // namespace

GridBatch make_grid_batch(std::span<const std::uint8_t> mask, std::size_t height, std::size_t width,
                          std::size_t stride, std::size_t row_offset, std::size_t col_offset, std::size_t block)
{
    if (stride == 0 || block == 0 || block > stride)
        throw std::invalid_argument("make_grid_batch: need 0 < block <= stride");
    if (mask.size() != height * width)
        throw std::invalid_argument("make_grid_batch: mask size does not match extent");

    GridBatch batch;
    batch.stride = stride;
    batch.block = block;
    batch.spacing = block > 1 ? 1 : stride;
    batch.height = height;
    batch.width = width;
    std::vector<std::ptrdiff_t> slot(height * width, -1);
    for (std::size_t r = 0; r < height; ++r) {
        if (!sampled(r, stride, row_offset, block))
            continue;
        for (std::size_t c = 0; c < width; ++c) {
            const auto p = r * width + c;
            if (!sampled(c, stride, col_offset, block) || !mask[p])
                continue;
            slot[p] = static_cast<std::ptrdiff_t>(batch.pixels.size());
            batch.pixels.push_back(p);
            batch.coords.push_back({nn::normalize_coordinate(double(c), width),
                                    nn::normalize_coordinate(double(r), height)});
        }
    }

    const auto n = batch.pixels.size();
    const auto d = batch.spacing;
    batch.left.assign(n, -1);
    batch.right.assign(n, -1);
    batch.up.assign(n, -1);
    batch.down.assign(n, -1);
    for (std::size_t i = 0; i < n; ++i) {
        const auto r = batch.pixels[i] / width;
        const auto c = batch.pixels[i] % width;
        if (c >= d)
            batch.left[i] = slot[r * width + c - d];
        if (c + d < width)
            batch.right[i] = slot[r * width + c + d];
        if (r >= d)
            batch.up[i] = slot[(r - d) * width + c];
        if (r + d < height)
            batch.down[i] = slot[(r + d) * width + c];
    }
    return batch;
}

std::size_t auto_stride(std::span<const std::uint8_t> mask, std::size_t height, std::size_t width,
                        std::size_t max_pixels, std::size_t block)
{
    if (block == 0)
        throw std::invalid_argument("auto_stride: block must be positive");
    for (std::size_t s = block;; ++s) {
        std::size_t count = 0;
        for (std::size_t r = 0; r < height; ++r)
            for (std::size_t c = 0; c < width; ++c)
                count += sampled(r, s, 0, block) && sampled(c, s, 0, block) && mask[r * width + c] ? 1 : 0;
        if (count <= max_pixels || s >= std::max(height, width))
            return s;
    }
}

} // namespace nps::train
