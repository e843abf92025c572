#pragma once

#include "nps/nn/networks.hpp"
#include "nps/render/geometry.hpp"

#include <functional>
#include <span>
#include <vector>

namespace nps::eval {

// Specular basis responses for (n.h, v.h).
using BasisFunction = std::function<std::vector<double>(double nh, double vh)>;

struct SphereImage {
    std::size_t resolution = 0;
    std::size_t channels = 0;
    std::vector<float> values;       // [row][col][channel]
    std::vector<std::uint8_t> mask;  // inscribed disk
};

// Unit sphere seen orthographically, shaded with one material under a
// directional light given in the internal frame. No cast shadows. With
// `normalize` the image is divided by its maximum.
SphereImage render_brdf_sphere(std::span<const double> albedo, std::span<const double> coeffs,
                               const BasisFunction& basis, const render::Vec3& light, std::size_t resolution,
                               bool normalize = false);

SphereImage render_brdf_sphere(std::span<const double> albedo, std::span<const double> coeffs,
                               const nn::BasisNet<float>& basis, const render::Vec3& light,
                               std::size_t resolution, bool normalize = false);

// Internal-frame normal at a sphere pixel; the zero vector outside the disk.
render::Vec3 sphere_normal(std::size_t row, std::size_t col, std::size_t resolution);

} // namespace nps::eval
