#pragma once

#include "nps/render/geometry.hpp"

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

namespace nps::render {

// Surface depth at a continuous pixel position (x = col, y = row), in pixels.
using DepthQuery = std::function<double(double x, double y)>;

struct ShadowMarchConfig {
    int samples = 32;
    double t_min = 0.5;  // pixels travelled in the image plane

    void validate() const;

    // Log-uniform marching distances from t_min to t_max, strictly increasing.
    std::vector<double> distances(double t_max) const;
};

// Image extent plus an optional object mask; samples that land outside the
// mask do not occlude.
struct RasterDomain {
    std::size_t width = 0;
    std::size_t height = 0;
    std::span<const std::uint8_t> mask;

    bool contains(double x, double y) const;

    // Distance from (x, y) along unit direction (ux, uy) to the last pixel centre
    // inside the image.
    double exit_distance(double x, double y, double ux, double uy) const;
};

// Binary cast-shadow factor for the surface point at pixel (x, y): 1 (lit)
// iff the queried depth is >= the ray depth at every marched sample.
int render_shadow(double x, double y, const Vec3& light, const DepthQuery& depth,
                  const RasterDomain& domain, const ShadowMarchConfig& cfg = {});

// Shadow factor for every pixel; pixels outside the mask are reported lit.
std::vector<std::uint8_t> render_shadow_map(const Vec3& light, const DepthQuery& depth,
                                            const RasterDomain& domain,
                                            const ShadowMarchConfig& cfg = {});

// Bilinear lookup into a row-major depth grid; positions are clamped to the grid.
// With a mask only masked corners contribute, so depth outside the object
// never leaks into lookups at its border.
class DepthGrid {
public:
    DepthGrid(std::size_t width, std::size_t height, std::vector<double> values,
              std::vector<std::uint8_t> mask = {});

    double operator()(double x, double y) const;
    double at(std::size_t col, std::size_t row) const { return values_[row * width_ + col]; }

private:
    std::size_t width_;
    std::size_t height_;
    std::vector<double> values_;
    std::vector<std::uint8_t> mask_;
};

} // namespace nps::render
