#include "nps/io/grid_io.hpp"

#include <json.hpp>

#include <bit>
#include <cstdint>
#include <fstream>
#include <stdexcept>

namespace nps::io {

namespace {

std::filesystem::path with_ext(std::filesystem::path stem, const char* ext)
{
    return stem.replace_extension(ext);
}

} // namespace

void write_float_grid(const std::filesystem::path& stem, const FloatGrid& grid)
{
    if (grid.values.size() != grid.height * grid.width * grid.channels)
        throw std::invalid_argument("write_float_grid: value count does not match extent");
    std::ofstream bin(with_ext(stem, ".f32"), std::ios::binary);
    if (!bin)
        throw std::runtime_error("cannot write " + with_ext(stem, ".f32").string());
    std::vector<char> bytes(grid.values.size() * 4);
    for (std::size_t i = 0; i < grid.values.size(); ++i) {
        const auto bits = std::bit_cast<std::uint32_t>(grid.values[i]);
        for (int b = 0; b < 4; ++b)
            bytes[4 * i + b] = static_cast<char>((bits >> (8 * b)) & 0xff);
    }
    bin.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));

    nlohmann::json meta{{"H", grid.height}, {"W", grid.width}};
    if (grid.channels != 1)
        meta["C"] = grid.channels;
    std::ofstream js(with_ext(stem, ".json"));
    js << meta.dump() << '\n';
    if (!bin || !js)
        throw std::runtime_error("failed writing " + stem.string());
}

FloatGrid read_float_grid(const std::filesystem::path& stem)
{
    std::ifstream js(with_ext(stem, ".json"));
    if (!js)
        throw std::runtime_error("cannot read " + with_ext(stem, ".json").string());
    const auto meta = nlohmann::json::parse(js);
    FloatGrid grid;
    grid.height = meta.at("H").get<std::size_t>();
    grid.width = meta.at("W").get<std::size_t>();
    grid.channels = meta.value("C", std::size_t{1});

    std::ifstream bin(with_ext(stem, ".f32"), std::ios::binary);
    std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(bin)), std::istreambuf_iterator<char>());
    const auto n = grid.height * grid.width * grid.channels;
    if (bytes.size() != 4 * n)
        throw std::runtime_error(with_ext(stem, ".f32").string() + ": expected " + std::to_string(4 * n) +
                                 " bytes, found " + std::to_string(bytes.size()));
    grid.values.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        const std::uint32_t bits = std::uint32_t(bytes[4 * i]) | (std::uint32_t(bytes[4 * i + 1]) << 8) |
                                   (std::uint32_t(bytes[4 * i + 2]) << 16) |
                                   (std::uint32_t(bytes[4 * i + 3]) << 24);
        grid.values[i] = std::bit_cast<float>(bits);
    }
    return grid;
}

} // namespace nps::io
