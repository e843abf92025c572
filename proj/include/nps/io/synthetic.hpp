#pragma once

#include "nps/io/observation.hpp"
#include "nps/render/geometry.hpp"
#include "nps/render/shadow.hpp"

#include <cstdint>
#include <filesystem>
#include <functional>
#include <vector>

// Synthetic scenes with exact ground truth. Everything here is computed
// directly from the analytic surface and is independent of the fitting code,
// so it serves as the verification oracle.

namespace nps::io {

enum class Material { Lambertian, Specular };

// Blinn-Phong style lobe: rho_s = strength * max(n.h, 0)^exponent.
struct SpecularLobe {
    double exponent = 0.0;
    double strength = 0.0;
};

struct SyntheticScene {
    std::size_t height = 0;
    std::size_t width = 0;
    std::function<double(double x, double y)> surface;  // analytic depth, pixels
    std::vector<double> depth;                          // surface at pixel centres
    std::vector<render::Vec3> normals;                  // internal frame, analytic
    std::vector<double> albedo;                         // [pixel][channel]
    SpecularLobe specular;
    std::vector<std::uint8_t> shadows;  // [light][pixel], exact ray cast
    ObservationStack observations;
};

// Dense uniform ray cast against the analytic surface (default 1024 samples
// per ray up to the image boundary). 1 = lit.
std::vector<std::uint8_t> exact_shadow_map(const render::DepthQuery& surface, const render::Vec3& light,
                                           const render::RasterDomain& domain, int samples = 1024);

// Lights spread around the viewing axis with polar angles in [min_deg, max_deg].
std::vector<render::Light> make_lights(std::size_t count, double min_polar_deg, double max_polar_deg,
                                       std::uint64_t seed);

// Hemisphere of radius ~0.42 * min(H, W) resting on a plane; mask = disk.
SyntheticScene make_sphere_scene(std::size_t height, std::size_t width, std::size_t lights,
                                 Material material, std::uint64_t seed);

// Square block of the given height (pixels, toward the camera) in the middle
// of a floor, lit by `lights` oblique lights at even azimuths.
SyntheticScene make_step_scene(std::size_t height, std::size_t width, double block_height,
                               std::size_t lights);

// Hemisphere and a ramped block on a floor, full mask, strongly oblique lights.
SyntheticScene make_composite_scene(std::size_t size, std::size_t lights, std::uint64_t seed);

// Writes the dataset layout plus ground truth: normal_gt.f32/.json and
// normal_gt.png (dataset frame), depth_gt.f32/.json, shadow_gt_XX.png.
void save_synthetic(const std::filesystem::path& dir, const SyntheticScene& scene);

} // namespace nps::io
