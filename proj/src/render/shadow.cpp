#include "nps/render/shadow.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

namespace nps::render {

void ShadowMarchConfig::validate() const
{
    if (samples < 2)
        throw GeometryError("shadow march needs at least 2 samples, got " + std::to_string(samples));
    if (!(t_min > 0.0))
        throw GeometryError("shadow march t_min must be positive");
}

std::vector<double> ShadowMarchConfig::distances(double t_max) const
{
    validate();
    std::vector<double> t(static_cast<std::size_t>(samples));
    const double log_lo = std::log(t_min);
    const double log_hi = std::log(t_max);
    for (int i = 0; i < samples; ++i)
        t[i] = std::exp(log_lo + (log_hi - log_lo) * i / (samples - 1));
    return t;
}

bool RasterDomain::contains(double x, double y) const
{
    const double col = std::round(x);
    const double row = std::round(y);
    if (col < 0.0 || row < 0.0 || col >= static_cast<double>(width) || row >= static_cast<double>(height))
        return false;
    if (mask.empty())
        return true;
    return mask[static_cast<std::size_t>(row) * width + static_cast<std::size_t>(col)] != 0;
}

double RasterDomain::exit_distance(double x, double y, double ux, double uy) const
{
    double d = std::numeric_limits<double>::infinity();
    const double max_x = static_cast<double>(width) - 1.0;
    const double max_y = static_cast<double>(height) - 1.0;
    if (ux > 0.0)
        d = std::min(d, (max_x - x) / ux);
    else if (ux < 0.0)
        d = std::min(d, (0.0 - x) / ux);
    if (uy > 0.0)
        d = std::min(d, (max_y - y) / uy);
    else if (uy < 0.0)
        d = std::min(d, (0.0 - y) / uy);
    return std::max(d, 0.0);
}

int render_shadow(double x, double y, const Vec3& light, const DepthQuery& depth,
                  const RasterDomain& domain, const ShadowMarchConfig& cfg)
{
    const double planar = std::hypot(light.x(), light.y());
    if (planar < 1e-12)
        return 1;
    const double ux = light.x() / planar;
    const double uy = light.y() / planar;
    const double rise = light.z() / planar;  // ray depth change per pixel travelled

    const double t_max = domain.exit_distance(x, y, ux, uy);
    if (t_max <= cfg.t_min)
        return 1;

    const double origin = depth(x, y);
    for (double t : cfg.distances(t_max)) {
        const double sx = x + t * ux;
        const double sy = y + t * uy;
        if (!domain.contains(sx, sy))
            continue;
        const double ray_depth = origin + t * rise;
        if (depth(sx, sy) - ray_depth < 0.0)
            return 0;
    }
    return 1;
}

std::vector<std::uint8_t> render_shadow_map(const Vec3& light, const DepthQuery& depth,
                                            const RasterDomain& domain, const ShadowMarchConfig& cfg)
{
    std::vector<std::uint8_t> out(domain.width * domain.height, 1);
    for (std::size_t row = 0; row < domain.height; ++row)
        for (std::size_t col = 0; col < domain.width; ++col) {
            const auto i = row * domain.width + col;
            if (!domain.mask.empty() && !domain.mask[i])
                continue;
            out[i] = static_cast<std::uint8_t>(
                render_shadow(static_cast<double>(col), static_cast<double>(row), light, depth, domain, cfg));
        }
    return out;
}

DepthGrid::DepthGrid(std::size_t width, std::size_t height, std::vector<double> values,
                     std::vector<std::uint8_t> mask)
    : width_(width), height_(height), values_(std::move(values)), mask_(std::move(mask))
{
    if (width_ == 0 || height_ == 0 || values_.size() != width_ * height_)
        throw GeometryError("DepthGrid: value count does not match extent");
    if (!mask_.empty() && mask_.size() != values_.size())
        throw GeometryError("DepthGrid: mask size does not match extent");
}

double DepthGrid::operator()(double x, double y) const
{
    x = std::clamp(x, 0.0, static_cast<double>(width_ - 1));
    y = std::clamp(y, 0.0, static_cast<double>(height_ - 1));
    const auto c0 = static_cast<std::size_t>(std::floor(x));
    const auto r0 = static_cast<std::size_t>(std::floor(y));
    const auto c1 = std::min(c0 + 1, width_ - 1);
    const auto r1 = std::min(r0 + 1, height_ - 1);
    const double fx = x - static_cast<double>(c0);
    const double fy = y - static_cast<double>(r0);
    if (!mask_.empty()) {
        const std::size_t cols[4] = {c0, c1, c0, c1};
        const std::size_t rows[4] = {r0, r0, r1, r1};
        const double weights[4] = {(1.0 - fx) * (1.0 - fy), fx * (1.0 - fy), (1.0 - fx) * fy, fx * fy};
        double sum = 0.0;
        double total = 0.0;
        for (int k = 0; k < 4; ++k) {
            if (!mask_[rows[k] * width_ + cols[k]] || weights[k] == 0.0)
                continue;
            sum += weights[k] * at(cols[k], rows[k]);
            total += weights[k];
        }
        if (total > 0.0)
            return sum / total;
    }
    const double top = (1.0 - fx) * at(c0, r0) + fx * at(c1, r0);
    const double bottom = (1.0 - fx) * at(c0, r1) + fx * at(c1, r1);
    return (1.0 - fy) * top + fy * bottom;
}

} // namespace nps::render
