#include "nps/eval/metrics.hpp"
#include "nps/eval/sphere.hpp"

#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>

using namespace nps;
using render::Vec3;

namespace {

std::vector<float> random_normals(std::size_t n, std::uint64_t seed)
{
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> g;
    std::vector<float> out;
    for (std::size_t i = 0; i < n; ++i) {
        const Vec3 v = Vec3(g(rng), g(rng), g(rng)).normalized();
        out.insert(out.end(), {float(v.x()), float(v.y()), float(v.z())});
    }
    return out;
}

double angle_deg(const float* a, const float* b)
{
    const double d = double(a[0]) * b[0] + double(a[1]) * b[1] + double(a[2]) * b[2];
    const double na = std::sqrt(double(a[0]) * a[0] + double(a[1]) * a[1] + double(a[2]) * a[2]);
    const double nb = std::sqrt(double(b[0]) * b[0] + double(b[1]) * b[1] + double(b[2]) * b[2]);
    return std::acos(std::clamp(d / (na * nb), -1.0, 1.0)) * 180.0 / std::numbers::pi;
}

} // namespace

TEST_CASE("mae of identical maps is zero")
{
    const auto n = random_normals(50, 1);
    const std::vector<std::uint8_t> mask(50, 1);
    CHECK(eval::mae(n, n, mask) == doctest::Approx(0.0).epsilon(1e-9));
}

TEST_CASE("mae of orthogonal and flipped normals")
{
    const std::vector<float> z{0, 0, -1, 0, 0, -1};
    const std::vector<float> x{1, 0, 0, 0, 1, 0};
    const std::vector<float> flip{0, 0, 1, 0, 0, 1};
    const std::vector<std::uint8_t> mask{1, 1};
    CHECK(eval::mae(z, x, mask) == doctest::Approx(90.0));
    CHECK(eval::mae(z, flip, mask) == doctest::Approx(180.0));
}

TEST_CASE("mae matches a loop oracle and is symmetric")
{
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        const auto a = random_normals(40, seed);
        const auto b = random_normals(40, seed + 100);
        std::vector<std::uint8_t> mask(40);
        double sum = 0.0;
        int count = 0;
        for (std::size_t p = 0; p < 40; ++p) {
            mask[p] = (p * 7 + seed) % 3 != 0;
            if (mask[p])
                sum += angle_deg(&a[3 * p], &b[3 * p]), ++count;
        }
        CHECK(eval::mae(a, b, mask) == doctest::Approx(sum / count).epsilon(1e-9));
        CHECK(eval::mae(a, b, mask) == doctest::Approx(eval::mae(b, a, mask)).epsilon(1e-12));

        const auto map = eval::angular_error_map(a, b, mask);
        for (std::size_t p = 0; p < 40; ++p)
            CHECK(map[p] == doctest::Approx(mask[p] ? angle_deg(&a[3 * p], &b[3 * p]) : 0.0).epsilon(1e-9));
    }
}

TEST_CASE("mae rejects empty masks and mismatched sizes")
{
    const std::vector<float> n{0, 0, -1};
    CHECK_THROWS_AS(eval::mae(n, n, std::vector<std::uint8_t>{0}), std::invalid_argument);
    CHECK_THROWS_AS(eval::mae(n, std::vector<float>{0, 0, -1, 0, 0, -1}, std::vector<std::uint8_t>{1}),
                    std::invalid_argument);
}

TEST_CASE("psnr worked example")
{
    // Peak 1, every error 0.1: MSE 0.01, 20 dB.
    std::vector<float> gt{1.0f, 0.5f, 0.2f, 0.0f};
    std::vector<float> pred{0.9f, 0.6f, 0.1f, 0.1f};
    const std::vector<std::uint8_t> mask(4, 1);
    CHECK(eval::psnr(pred, gt, mask, 1) == doctest::Approx(20.0).epsilon(1e-5));
    CHECK(eval::psnr(gt, gt, mask, 1) == eval::psnr_identical);

    // Unmasked pixels do not count.
    pred[3] = 5.0f;
    CHECK(eval::psnr(pred, gt, std::vector<std::uint8_t>{1, 1, 1, 0}, 1) == doctest::Approx(20.0).epsilon(1e-5));
}

TEST_CASE("psnr falls as noise grows")
{
    std::mt19937_64 rng(2);
    std::uniform_real_distribution<float> u(0.0f, 1.0f);
    std::normal_distribution<float> g;
    const std::size_t n = 200;
    std::vector<float> gt(n * 3), noise(n * 3);
    for (auto& v : gt) v = u(rng);
    for (auto& v : noise) v = g(rng);
    const std::vector<std::uint8_t> mask(n, 1);
    double previous = eval::psnr_identical;
    for (float sigma : {0.001f, 0.01f, 0.05f, 0.2f}) {
        std::vector<float> pred(gt);
        for (std::size_t j = 0; j < pred.size(); ++j)
            pred[j] += sigma * noise[j];
        const double v = eval::psnr(pred, gt, mask, 3);
        CHECK(v < previous);
        previous = v;
    }
}

TEST_CASE("mean psnr skips infinite entries")
{
    const double inf = eval::psnr_identical;
    CHECK(eval::mean_psnr(std::vector<double>{30.0, 40.0}) == doctest::Approx(35.0));
    CHECK(eval::mean_psnr(std::vector<double>{30.0, inf, 40.0}) == doctest::Approx(35.0));
    CHECK(eval::mean_psnr(std::vector<double>{inf, inf}) == inf);
}

TEST_CASE("sphere normals cover the inscribed disk")
{
    const std::size_t res = 33;
    std::size_t inside = 0;
    for (std::size_t r = 0; r < res; ++r)
        for (std::size_t c = 0; c < res; ++c) {
            const auto n = eval::sphere_normal(r, c, res);
            if (n.isZero())
                continue;
            ++inside;
            CHECK(n.norm() == doctest::Approx(1.0));
            CHECK(n.z() <= 0.0);
        }
    const double area = std::numbers::pi * res * res / 4.0;
    CHECK(std::abs(double(inside) - area) < 0.05 * area);
    CHECK(eval::sphere_normal(0, 0, res).isZero());
    const auto centre = eval::sphere_normal(16, 16, res);
    CHECK((centre - Vec3(0, 0, -1)).norm() < 1e-9);
}

TEST_CASE("diffuse sphere matches the analytic shading")
{
    const std::vector<double> albedo{0.8, 0.5, 0.2};
    const Vec3 l = Vec3(0.3, -0.4, -0.8).normalized();
    const std::size_t res = 40;
    const auto img = eval::render_brdf_sphere(albedo, {}, [](double, double) { return std::vector<double>{}; }, l, res);
    REQUIRE(img.channels == 3);
    for (std::size_t r = 0; r < res; ++r)
        for (std::size_t c = 0; c < res; ++c) {
            const double x = 2.0 * (c + 0.5) / res - 1.0;
            const double y = 2.0 * (r + 0.5) / res - 1.0;
            const double r2 = x * x + y * y;
            const auto p = r * res + c;
            if (r2 > 1.0) {
                CHECK(img.mask[p] == 0);
                continue;
            }
            const Vec3 n(x, y, -std::sqrt(1.0 - r2));
            for (std::size_t k = 0; k < 3; ++k)
                REQUIRE(img.values[p * 3 + k] == doctest::Approx(albedo[k] * std::max(n.dot(l), 0.0)).epsilon(1e-6));
        }
}

TEST_CASE("narrow lobe peaks where the normal meets the half vector")
{
    const Vec3 l = Vec3(0.5, 0.2, -0.8).normalized();
    const Vec3 h = (l + Vec3(0, 0, -1)).normalized();
    const std::size_t res = 128;
    auto lobe = [](double nh, double) { return std::vector<double>{std::pow(std::max(nh, 0.0), 400.0)}; };
    const std::vector<double> albedo{0.0};
    const std::vector<double> coeffs{1.0};
    const auto img = eval::render_brdf_sphere(albedo, coeffs, lobe, l, res, true);

    std::size_t best = 0;
    for (std::size_t p = 0; p < img.values.size(); ++p)
        if (img.values[p] > img.values[best])
            best = p;
    CHECK(img.values[best] == doctest::Approx(1.0));
    // Pixel whose sphere normal equals h.
    const double col = (h.x() + 1.0) * res / 2.0 - 0.5;
    const double row = (h.y() + 1.0) * res / 2.0 - 0.5;
    CHECK(std::hypot(double(best % res) - col, double(best / res) - row) <= 3.0);
}

TEST_CASE("sphere rendering rejects mismatched coefficients")
{
    auto two = [](double, double) { return std::vector<double>{1.0, 1.0}; };
    const std::vector<double> albedo{0.5};
    const std::vector<double> coeffs{1.0};
    CHECK_THROWS_AS(eval::render_brdf_sphere(albedo, coeffs, two, Vec3(0, 0, -1), 8), std::invalid_argument);
}
