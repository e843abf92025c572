#include "nps/eval/sphere.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace nps::eval {

render::Vec3 sphere_normal(std::size_t row, std::size_t col, std::size_t resolution)
{
    const double x = 2.0 * (double(col) + 0.5) / double(resolution) - 1.0;
    const double y = 2.0 * (double(row) + 0.5) / double(resolution) - 1.0;
    const double r2 = x * x + y * y;
    if (r2 > 1.0)
        return render::Vec3::Zero();
    return {x, y, -std::sqrt(1.0 - r2)};
}

SphereImage render_brdf_sphere(std::span<const double> albedo, std::span<const double> coeffs,
                               const BasisFunction& basis, const render::Vec3& light, std::size_t resolution,
                               bool normalize)
{
    if (resolution == 0 || albedo.empty())
        throw std::invalid_argument("render_brdf_sphere: empty resolution or albedo");
    const render::Vec3 view(0.0, 0.0, -1.0);
    const auto h = render::half_vector(light, view);
    const double vh = view.dot(h);
    SphereImage img;
    img.resolution = resolution;
    img.channels = albedo.size();
    img.values.assign(resolution * resolution * img.channels, 0.0f);
    img.mask.assign(resolution * resolution, 0);
    for (std::size_t r = 0; r < resolution; ++r) {
        for (std::size_t c = 0; c < resolution; ++c) {
            const auto n = sphere_normal(r, c, resolution);
            if (n.isZero())
                continue;
            const auto p = r * resolution + c;
            img.mask[p] = 1;
            const double shading = std::max(light.dot(n), 0.0);
            double spec = 0.0;
            if (!coeffs.empty()) {
                const auto d = basis(n.dot(h), vh);
                if (d.size() != coeffs.size())
                    throw std::invalid_argument("render_brdf_sphere: basis size does not match coefficients");
                for (std::size_t k = 0; k < d.size(); ++k)
                    spec += coeffs[k] * d[k];
            }
            for (std::size_t ch = 0; ch < img.channels; ++ch)
                img.values[p * img.channels + ch] = static_cast<float>((albedo[ch] + spec) * shading);
        }
    }
    if (normalize) {
        const float peak = *std::max_element(img.values.begin(), img.values.end());
        if (peak > 0.0f)
            for (auto& v : img.values)
                v /= peak;
    }
    return img;
}

SphereImage render_brdf_sphere(std::span<const double> albedo, std::span<const double> coeffs,
                               const nn::BasisNet<float>& basis, const render::Vec3& light,
                               std::size_t resolution, bool normalize)
{
    return render_brdf_sphere(
        albedo, coeffs, [&basis](double nh, double vh) { return basis.evaluate(nh, vh); }, light, resolution,
        normalize);
}

} // namespace nps::eval
