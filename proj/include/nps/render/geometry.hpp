#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <span>
#include <stdexcept>
#include <vector>

// Internal frame: x right, y down, z away from the camera. Depth is z, the
// camera looks along +z, so the direction toward the viewer is (0, 0, -1) and
// camera-facing normals have negative z.
//
// Dataset frame (files on disk): x right, y up, z toward the camera. The two
// frames differ by a half turn about x: (x, y, z) <-> (x, -y, -z).

namespace nps::render {

using Vec3 = Eigen::Vector3d;

inline Vec3 to_internal(const Vec3& dataset) { return {dataset.x(), -dataset.y(), -dataset.z()}; }
inline Vec3 to_dataset(const Vec3& internal) { return {internal.x(), -internal.y(), -internal.z()}; }

class GeometryError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

// Directional light; `direction` points from the surface toward the light.
struct Light {
    Vec3 direction{0.0, 0.0, -1.0};
    std::vector<double> intensity{1.0};

    void validate() const;
};

struct CameraModel {
    Vec3 view{0.0, 0.0, -1.0};  // surface toward viewer, orthographic
};

Vec3 half_vector(const Vec3& l, const Vec3& v);

// I = s * (rho_d + c . basis) * max(l . n, 0), one value per albedo channel.
// Intensities are assumed already divided by the light intensity.
std::vector<double> render_pixel(const Vec3& n, std::span<const double> albedo,
                                 std::span<const double> coeffs, std::span<const double> basis,
                                 const Light& light, int shadow);

} // namespace nps::render
