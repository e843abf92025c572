#pragma once

#include <json.hpp>

#include <cstdint>
#include <filesystem>
#include <vector>

namespace nps::io {

// Fitted per-pixel maps. Normals are in the internal frame; everything
// outside the mask is zero.
struct SceneEstimate {
    std::size_t height = 0;
    std::size_t width = 0;
    std::size_t channels = 0;
    std::size_t basis_count = 0;
    std::size_t lights = 0;
    std::vector<std::uint8_t> mask;  // [pixel]
    std::vector<float> normals;      // [pixel][3]
    std::vector<float> albedo;       // [pixel][channel]
    std::vector<float> coeffs;       // [pixel][k]
    std::vector<float> depth;        // [pixel]
    std::vector<std::uint8_t> shadows;  // [light][pixel]
    std::vector<float> specular;        // [light][pixel], c . D(h, n)
    std::vector<float> rerendered;      // [light][pixel][channel]

    std::size_t pixels() const { return height * width; }
};

// Output directory layout:
//   normal.png            (n + 1) / 2 per channel in the dataset frame, 8-bit
//   normal.f32/.json      the same normals unquantized
//   depth.f32/.json       depth in pixels
//   albedo.png            diffuse albedo scaled by its masked maximum
//   specular_XX.png       specular shading per light, scaled by the global maximum
//   shadow_XX.png         cast-shadow factor per light
//   rerender_XX.png       re-rendered image per light, 16-bit
//   metrics.json          `metrics` as given
void export_maps(const SceneEstimate& estimate, const std::filesystem::path& dir,
                 const nlohmann::json& metrics);

// Reads normal.f32 (preferred) or normal.png from `dir` (or normal_gt.* when
// `ground_truth`, with Normal_gt.png accepted), returned in the internal frame
// as [pixel][3].
bool has_normal_map(const std::filesystem::path& dir, bool ground_truth);
std::vector<float> read_normal_map(const std::filesystem::path& dir, bool ground_truth,
                                   std::size_t* height = nullptr, std::size_t* width = nullptr);

} // namespace nps::io
