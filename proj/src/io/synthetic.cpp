#include "nps/io/synthetic.hpp"

#include "nps/io/dataset.hpp"
#include "nps/io/grid_io.hpp"
#include "nps/io/image_io.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <random>

namespace nps::io {

namespace {

using render::Vec3;

constexpr double deg = std::numbers::pi / 180.0;

struct Surface {
    std::function<double(double, double)> depth;
    std::function<Vec3(double, double)> normal;
};

// Normal of z = f(x, y) facing the camera: (f_x, f_y, -1) normalized.
Vec3 normal_from_slope(double fx, double fy) { return Vec3(fx, fy, -1.0).normalized(); }

std::vector<double> smooth_albedo(std::size_t height, std::size_t width, const std::array<double, 3>& base)
{
    std::vector<double> albedo(height * width * 3);
    for (std::size_t r = 0; r < height; ++r)
        for (std::size_t c = 0; c < width; ++c) {
            const double u = (c + 0.5) / width - 0.5;
            const double v = (r + 0.5) / height - 0.5;
            const double mod = 0.85 + 0.15 * std::cos(2.0 * std::numbers::pi * u) * std::cos(std::numbers::pi * v);
            for (std::size_t k = 0; k < 3; ++k)
                albedo[(r * width + c) * 3 + k] = base[k] * mod;
        }
    return albedo;
}

SyntheticScene build(std::size_t height, std::size_t width, const Surface& surface,
                     std::vector<std::uint8_t> mask, std::vector<double> albedo, SpecularLobe lobe,
                     std::vector<render::Light> lights)
{
    SyntheticScene scene;
    scene.height = height;
    scene.width = width;
    scene.surface = surface.depth;
    scene.specular = lobe;
    scene.albedo = std::move(albedo);
    scene.depth.resize(height * width);
    scene.normals.resize(height * width);
    for (std::size_t r = 0; r < height; ++r)
        for (std::size_t c = 0; c < width; ++c) {
            scene.depth[r * width + c] = surface.depth(double(c), double(r));
            scene.normals[r * width + c] = surface.normal(double(c), double(r));
        }

    const render::RasterDomain domain{width, height, {}};
    const Vec3 view(0.0, 0.0, -1.0);
    auto& obs = scene.observations;
    obs.height = height;
    obs.width = width;
    obs.channels = 3;
    obs.mask = std::move(mask);
    obs.images.assign(lights.size() * height * width * 3, 0.0f);
    for (std::size_t i = 0; i < lights.size(); ++i) {
        const auto& l = lights[i].direction;
        const auto shadow = exact_shadow_map(surface.depth, l, domain);
        scene.shadows.insert(scene.shadows.end(), shadow.begin(), shadow.end());
        const Vec3 h = (l + view).normalized();
        for (std::size_t p = 0; p < height * width; ++p) {
            const Vec3& n = scene.normals[p];
            const double shading = std::max(l.dot(n), 0.0);
            const double spec = lobe.strength > 0.0 ? lobe.strength * std::pow(std::max(n.dot(h), 0.0), lobe.exponent) : 0.0;
            for (std::size_t k = 0; k < 3; ++k) {
                const double v = shadow[p] * (scene.albedo[p * 3 + k] + spec) * shading;
                obs.images[(i * height * width + p) * 3 + k] = static_cast<float>(v);
            }
        }
        obs.names.push_back("img_" + std::to_string(i));
    }
    obs.lights = std::move(lights);
    return scene;
}

} // namespace

std::vector<std::uint8_t> exact_shadow_map(const render::DepthQuery& surface, const Vec3& light,
                                           const render::RasterDomain& domain, int samples)
{
    std::vector<std::uint8_t> out(domain.width * domain.height, 1);
    const double planar = std::hypot(light.x(), light.y());
    if (planar < 1e-12)
        return out;
    const double ux = light.x() / planar;
    const double uy = light.y() / planar;
    const double rise = light.z() / planar;
    for (std::size_t r = 0; r < domain.height; ++r)
        for (std::size_t c = 0; c < domain.width; ++c) {
            const double x = double(c);
            const double y = double(r);
            const double reach = domain.exit_distance(x, y, ux, uy);
            const double z0 = surface(x, y);
            for (int s = 1; s <= samples; ++s) {
                const double t = reach * s / samples;
                if (surface(x + t * ux, y + t * uy) < z0 + t * rise) {
                    out[r * domain.width + c] = 0;
                    break;
                }
            }
        }
    return out;
}

std::vector<render::Light> make_lights(std::size_t count, double min_polar_deg, double max_polar_deg,
                                       std::uint64_t seed)
{
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    const double golden = std::numbers::pi * (3.0 - std::sqrt(5.0));
    const double phase = 2.0 * std::numbers::pi * unit(rng);
    std::vector<render::Light> lights;
    for (std::size_t i = 0; i < count; ++i) {
        const double frac = count > 1 ? (i + 0.5) / count : 0.5;
        const double jitter = 0.5 * (unit(rng) - 0.5) / std::max<std::size_t>(count, 1);
        const double polar = (min_polar_deg + (max_polar_deg - min_polar_deg) * std::clamp(frac + jitter, 0.0, 1.0)) * deg;
        const double azimuth = phase + golden * i;
        render::Light l;
        l.direction = Vec3(std::sin(polar) * std::cos(azimuth), std::sin(polar) * std::sin(azimuth), -std::cos(polar));
        l.intensity = {1.0};
        lights.push_back(l);
    }
    return lights;
}

SyntheticScene make_sphere_scene(std::size_t height, std::size_t width, std::size_t lights,
                                 Material material, std::uint64_t seed)
{
    if (height < 16 || width < 16)
        throw std::invalid_argument("make_sphere_scene: image must be at least 16x16");
    if (lights < 4)
        throw std::invalid_argument("make_sphere_scene: need at least 4 lights");

    const double cx = 0.5 * width - 0.5;
    const double cy = 0.5 * height - 0.5;
    const double radius = 0.42 * static_cast<double>(std::min(height, width));
    Surface surface;
    surface.depth = [=](double x, double y) {
        const double r2 = (x - cx) * (x - cx) + (y - cy) * (y - cy);
        return r2 < radius * radius ? radius - std::sqrt(radius * radius - r2) : radius;
    };
    surface.normal = [=](double x, double y) {
        const double dx = x - cx;
        const double dy = y - cy;
        const double r2 = dx * dx + dy * dy;
        if (r2 >= radius * radius)
            return Vec3(0.0, 0.0, -1.0);
        return Vec3(dx, dy, -std::sqrt(radius * radius - r2)).normalized();
    };

    std::vector<std::uint8_t> mask(height * width, 0);
    for (std::size_t r = 0; r < height; ++r)
        for (std::size_t c = 0; c < width; ++c) {
            const double dx = c - cx;
            const double dy = r - cy;
            mask[r * width + c] = std::sqrt(dx * dx + dy * dy) < radius - 1.0 ? 1 : 0;
        }

    SpecularLobe lobe;
    std::array<double, 3> base{0.75, 0.6, 0.45};
    if (material == Material::Specular) {
        lobe = {40.0, 0.6};
        base = {0.5, 0.4, 0.3};
    }
    return build(height, width, surface, std::move(mask), smooth_albedo(height, width, base), lobe,
                 make_lights(lights, 10.0, 50.0, seed));
}

SyntheticScene make_step_scene(std::size_t height, std::size_t width, double block_height,
                               std::size_t lights)
{
    if (!(block_height > 0.0))
        throw std::invalid_argument("make_step_scene: block height must be positive");
    const double x0 = 0.25 * width - 0.5;
    const double x1 = 0.75 * width - 0.5;
    const double y0 = 0.25 * height - 0.5;
    const double y1 = 0.75 * height - 0.5;
    Surface surface;
    surface.depth = [=](double x, double y) {
        return (x >= x0 && x < x1 && y >= y0 && y < y1) ? -block_height : 0.0;
    };
    surface.normal = [](double, double) { return Vec3(0.0, 0.0, -1.0); };

    std::vector<render::Light> ls;
    for (std::size_t i = 0; i < lights; ++i) {
        const double azimuth = 2.0 * std::numbers::pi * (i + 0.25) / lights;
        const double polar = 50.0 * deg;
        render::Light l;
        l.direction = Vec3(std::sin(polar) * std::cos(azimuth), std::sin(polar) * std::sin(azimuth), -std::cos(polar));
        ls.push_back(l);
    }
    return build(height, width, surface, std::vector<std::uint8_t>(height * width, 1),
                 smooth_albedo(height, width, {0.7, 0.7, 0.7}), {}, std::move(ls));
}

SyntheticScene make_composite_scene(std::size_t size, std::size_t lights, std::uint64_t seed)
{
    const double s = static_cast<double>(size);
    const double scx = 0.3 * s;
    const double scy = 0.5 * s;
    const double radius = 0.2 * s;
    const double bcx = 0.72 * s;
    const double bcy = 0.5 * s;
    const double top = 0.08 * s;     // half-width of the flat top
    const double rise = 0.22 * s;    // block height
    const double slope = 2.0;        // depth change per pixel on the ramps

    auto sphere_depth = [=](double x, double y) {
        const double r2 = (x - scx) * (x - scx) + (y - scy) * (y - scy);
        return r2 < radius * radius ? -std::sqrt(radius * radius - r2) : 0.0;
    };
    auto block_depth = [=](double x, double y) {
        const double d = std::max(std::abs(x - bcx), std::abs(y - bcy));
        return -std::clamp(rise - (d - top) * slope, 0.0, rise);
    };
    Surface surface;
    surface.depth = [=](double x, double y) { return std::min(sphere_depth(x, y), block_depth(x, y)); };
    surface.normal = [=](double x, double y) {
        const double sd = sphere_depth(x, y);
        const double bd = block_depth(x, y);
        if (sd < bd) {
            const double dx = x - scx;
            const double dy = y - scy;
            return Vec3(dx, dy, sd).normalized();
        }
        if (bd < 0.0 && bd > -rise) {
            const double dx = x - bcx;
            const double dy = y - bcy;
            // On a ramp the depth grows with the Chebyshev distance.
            if (std::abs(dx) >= std::abs(dy))
                return normal_from_slope(slope * (dx > 0 ? 1.0 : -1.0), 0.0);
            return normal_from_slope(0.0, slope * (dy > 0 ? 1.0 : -1.0));
        }
        return Vec3(0.0, 0.0, -1.0);
    };
    return build(size, size, surface, std::vector<std::uint8_t>(size * size, 1),
                 smooth_albedo(size, size, {0.7, 0.6, 0.5}), {}, make_lights(lights, 35.0, 60.0, seed));
}

void save_synthetic(const std::filesystem::path& dir, const SyntheticScene& scene)
{
    save_dataset(dir, scene.observations);
    const auto pixels = scene.height * scene.width;

    FloatGrid normals{scene.height, scene.width, 3, {}};
    Image normal_png{scene.height, scene.width, 3, {}};
    for (std::size_t p = 0; p < pixels; ++p) {
        const auto n = render::to_dataset(scene.normals[p]);
        for (int k = 0; k < 3; ++k) {
            normals.values.push_back(static_cast<float>(n[k]));
            normal_png.data.push_back(static_cast<float>(0.5 * (n[k] + 1.0)));
        }
    }
    write_float_grid(dir / "normal_gt", normals);
    write_png(dir / "normal_gt.png", normal_png, 8);

    FloatGrid depth{scene.height, scene.width, 1, {}};
    for (double d : scene.depth)
        depth.values.push_back(static_cast<float>(d));
    write_float_grid(dir / "depth_gt", depth);

    for (std::size_t i = 0; i < scene.observations.count(); ++i) {
        Image shadow{scene.height, scene.width, 1, {}};
        for (std::size_t p = 0; p < pixels; ++p)
            shadow.data.push_back(scene.shadows[i * pixels + p]);
        char name[32];
        std::snprintf(name, sizeof(name), "shadow_gt_%02zu.png", i);
        write_png(dir / name, shadow, 8);
    }
}

} // namespace nps::io
