#include "nps/nn/checkpoint.hpp"

#include <json.hpp>

#include <bit>
#include <cstdint>
#include <fstream>
#include <stdexcept>

namespace nps::nn {

namespace {

void put_le(std::ostream& os, float v)
{
    const auto bits = std::bit_cast<std::uint32_t>(v);
    const char bytes[4] = {static_cast<char>(bits & 0xff), static_cast<char>((bits >> 8) & 0xff),
                           static_cast<char>((bits >> 16) & 0xff),
                           static_cast<char>((bits >> 24) & 0xff)};
    os.write(bytes, 4);
}

float get_le(const unsigned char* p)
{
    const std::uint32_t bits = std::uint32_t(p[0]) | (std::uint32_t(p[1]) << 8) |
                               (std::uint32_t(p[2]) << 16) | (std::uint32_t(p[3]) << 24);
    return std::bit_cast<float>(bits);
}

} // namespace

void save_checkpoint(const ParamStore<float>& store, const std::filesystem::path& dir)
{
    std::filesystem::create_directories(dir);
    std::ofstream bin(dir / "params.bin", std::ios::binary);
    if (!bin)
        throw std::runtime_error("cannot write " + (dir / "params.bin").string());
    nlohmann::json index;
    index["format"] = "nps-params-v1";
    index["dtype"] = "float32-le";
    index["tensors"] = nlohmann::json::array();
    std::size_t offset = 0;
    for (const auto& e : store.entries()) {
        for (float v : e.tensor.data())
            put_le(bin, v);
        index["tensors"].push_back(
            {{"name", e.name}, {"shape", e.tensor.shape()}, {"offset", offset}, {"count", e.tensor.size()}});
        offset += 4 * e.tensor.size();
    }
    std::ofstream js(dir / "params.json");
    js << index.dump(2) << '\n';
    if (!bin || !js)
        throw std::runtime_error("failed writing checkpoint to " + dir.string());
}

void load_checkpoint(ParamStore<float>& store, const std::filesystem::path& dir)
{
    std::ifstream js(dir / "params.json");
    if (!js)
        throw std::runtime_error("cannot read " + (dir / "params.json").string());
    const auto index = nlohmann::json::parse(js);
    std::ifstream bin(dir / "params.bin", std::ios::binary);
    std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(bin)), std::istreambuf_iterator<char>());

    for (const auto& t : index.at("tensors")) {
        const auto name = t.at("name").get<std::string>();
        auto tensor = store.get(name);
        const auto shape = t.at("shape").get<ad::Shape>();
        const auto offset = t.at("offset").get<std::size_t>();
        const auto count = t.at("count").get<std::size_t>();
        if (shape != tensor.shape() || count != tensor.size())
            throw std::runtime_error("checkpoint: shape mismatch for '" + name + "'");
        if (offset + 4 * count > bytes.size())
            throw std::runtime_error("checkpoint: params.bin truncated at '" + name + "'");
        auto data = tensor.mutable_data();
        for (std::size_t i = 0; i < count; ++i)
            data[i] = get_le(bytes.data() + offset + 4 * i);
    }
}

} // namespace nps::nn
