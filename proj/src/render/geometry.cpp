#include "nps/render/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace nps::render {

void Light::validate() const
{
    if (std::abs(direction.norm() - 1.0) > 1e-6)
        throw GeometryError("light direction is not unit length (norm " +
                            std::to_string(direction.norm()) + ")");
    if (intensity.empty())
        throw GeometryError("light has no intensity");
    for (double v : intensity)
        if (!(v > 0.0) || !std::isfinite(v))
            throw GeometryError("light intensity must be positive, got " + std::to_string(v));
}

Vec3 half_vector(const Vec3& l, const Vec3& v)
{
    const Vec3 sum = l + v;
    const double norm = sum.norm();
    if (norm < 1e-12)
        throw GeometryError("half_vector: light and view directions are antiparallel");
    return sum / norm;
}

std::vector<double> render_pixel(const Vec3& n, std::span<const double> albedo,
                                 std::span<const double> coeffs, std::span<const double> basis,
                                 const Light& light, int shadow)
{
    if (coeffs.size() != basis.size())
        throw GeometryError("render_pixel: " + std::to_string(coeffs.size()) + " coefficients vs " +
                            std::to_string(basis.size()) + " basis values");
    double specular = 0.0;
    for (std::size_t i = 0; i < coeffs.size(); ++i)
        specular += coeffs[i] * basis[i];
    const double shading = std::max(light.direction.dot(n), 0.0);
    std::vector<double> out(albedo.size());
    for (std::size_t c = 0; c < albedo.size(); ++c)
        out[c] = shadow * (albedo[c] + specular) * shading;
    return out;
}

} // namespace nps::render
