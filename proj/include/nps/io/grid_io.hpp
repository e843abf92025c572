#pragma once

#include <filesystem>
#include <vector>

namespace nps::io {

// Raw float grid: `<stem>.f32` holds little-endian float32 values row-major
// ([row][col][channel]); `<stem>.json` holds {"H", "W"} plus "C" when the
// grid has more than one channel.
struct FloatGrid {
    std::size_t height = 0;
    std::size_t width = 0;
    std::size_t channels = 1;
    std::vector<float> values;
};

void write_float_grid(const std::filesystem::path& stem, const FloatGrid& grid);
FloatGrid read_float_grid(const std::filesystem::path& stem);

} // namespace nps::io
