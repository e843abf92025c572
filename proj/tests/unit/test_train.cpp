#include "nps/autodiff/adam.hpp"
#include "nps/io/synthetic.hpp"
#include "nps/train/config.hpp"
#include "nps/train/fit.hpp"
#include "nps/train/grid_batch.hpp"
#include "nps/train/losses.hpp"

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>

using namespace nps;
using Tape = ad::Tape<double>;
using Tensor = ad::Tensor<double>;

namespace {

Tensor column(std::vector<double> v, bool grad = false)
{
    const auto n = v.size();
    return Tensor(ad::Shape{n, 1}, std::move(v), grad);
}

Tensor rows3(const std::vector<std::array<double, 3>>& v)
{
    std::vector<double> flat;
    for (const auto& r : v)
        flat.insert(flat.end(), r.begin(), r.end());
    return Tensor::matrix(v.size(), 3, std::move(flat));
}

train::GridBatch full_batch(std::size_t h, std::size_t w)
{
    return train::make_grid_batch(std::vector<std::uint8_t>(h * w, 1), h, w);
}

// Depth values of z(x, y) = f at batch pixels.
template <class F>
Tensor depth_of(const train::GridBatch& b, F f)
{
    std::vector<double> z;
    for (auto p : b.pixels)
        z.push_back(f(double(p % b.width), double(p / b.width)));
    return column(std::move(z));
}

nn::NetworkConfig tiny_network(std::size_t channels)
{
    nn::NetworkConfig net;
    net.channels = channels;
    net.basis_count = 2;
    net.coord_levels = 3;
    net.basis_levels = 2;
    net.skip_after = 1;
    net.surface_width = 24;
    net.surface_layers = 3;
    net.normal_layer = 2;
    net.depth_width = 16;
    net.depth_layers = 2;
    net.basis_width = 8;
    net.basis_layers = 2;
    net.depth_scale = 8.0;
    return net;
}

train::FitConfig tiny_config()
{
    train::FitConfig cfg;
    cfg.iterations = 60;
    cfg.batch_images = 3;
    cfg.learning_rate = 2e-3;
    cfg.basis_count = 2;
    cfg.max_batch_pixels = 128;
    cfg.shadow_refresh = 10;
    cfg.seed = 4;
    return cfg;
}

} // namespace

TEST_CASE("loss_rec worked examples")
{
    Tape tape;
    auto pred = Tensor::matrix(2, 2, {0.5, 1.0, 0.0, 2.0});
    auto obs = Tensor::matrix(2, 2, {0.0, 1.0, 1.0, 1.0});
    CHECK(train::loss_rec(tape, pred, obs, Tensor::full({2, 2}, 1.0)).item() == doctest::Approx(2.5 / 4));
    CHECK(train::loss_rec(tape, pred, obs, column({1.0, 0.0})).item() == doctest::Approx(0.25));
    CHECK(train::loss_rec(tape, pred, obs, Tensor::matrix(2, 2, {0, 0, 0, 1})).item() == doctest::Approx(1.0));
    CHECK(train::loss_rec(tape, obs, obs, Tensor::full({2, 2}, 1.0)).item() == 0.0);
}

TEST_CASE("loss_rec matches a loop oracle")
{
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    std::bernoulli_distribution keep(0.6);
    for (int trial = 0; trial < 10; ++trial) {
        const std::size_t n = 7, c = 3;
        std::vector<double> p(n * c), o(n * c), m(n);
        for (auto& v : p) v = u(rng);
        for (auto& v : o) v = u(rng);
        for (auto& v : m) v = keep(rng) ? 1.0 : 0.0;
        m[0] = 1.0;
        double sum = 0.0, active = 0.0;
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t k = 0; k < c; ++k) {
                sum += m[i] * std::abs(p[i * c + k] - o[i * c + k]);
                active += m[i];
            }
        Tape tape;
        const auto got = train::loss_rec(tape, Tensor::matrix(n, c, p), Tensor::matrix(n, c, o), column(m));
        CHECK(got.item() == doctest::Approx(sum / active).epsilon(1e-12));
    }
}

TEST_CASE("loss_rec rejects empty masks and bad shapes")
{
    Tape tape;
    auto a = Tensor::full({2, 3}, 1.0);
    CHECK_THROWS_AS(train::loss_rec(tape, a, a, column({0.0, 0.0})), std::invalid_argument);
    CHECK_THROWS_AS(train::loss_rec(tape, a, Tensor::full({3, 3}, 1.0), column({1.0, 1.0})), ad::ShapeError);
    CHECK_THROWS_AS(train::loss_rec(tape, a, a, Tensor::full({2, 2}, 1.0)), ad::ShapeError);
}

TEST_CASE("depth normals of planes")
{
    const auto b = full_batch(5, 6);
    Tape tape;
    const auto flat = train::depth_normals(tape, depth_of(b, [](double, double) { return 3.0; }), b);
    REQUIRE(flat.valid.size() == b.size());
    for (std::size_t i = 0; i < flat.valid.size(); ++i) {
        CHECK(flat.normals.at(i, 0) == 0.0);
        CHECK(flat.normals.at(i, 1) == 0.0);
        CHECK(flat.normals.at(i, 2) == doctest::Approx(-1.0));
    }
    const auto tilted = train::depth_normals(tape, depth_of(b, [](double x, double y) { return 0.2 * x - 0.5 * y; }), b);
    const auto expect = render::Vec3(0.2, -0.5, -1.0).normalized();
    for (std::size_t i = 0; i < tilted.valid.size(); ++i)
        for (int k = 0; k < 3; ++k)
            CHECK(tilted.normals.at(i, k) == doctest::Approx(expect[k]).epsilon(1e-12));
}

TEST_CASE("loss_geo values")
{
    const auto b = full_batch(4, 4);
    const auto n = b.size();
    Tape tape;
    auto facing = rows3(std::vector<std::array<double, 3>>(n, {0.0, 0.0, -1.0}));
    auto sideways = rows3(std::vector<std::array<double, 3>>(n, {1.0, 0.0, 0.0}));
    auto constant = depth_of(b, [](double, double) { return 2.0; });
    CHECK(train::loss_geo(tape, facing, constant, b).item() == doctest::Approx(0.0));
    CHECK(train::loss_geo(tape, sideways, constant, b).item() == doctest::Approx(1.0));

    const auto g = render::Vec3(0.2, 0.0, -1.0).normalized();
    auto matching = rows3(std::vector<std::array<double, 3>>(n, {g.x(), g.y(), g.z()}));
    auto ramp = depth_of(b, [](double x, double) { return 0.2 * x; });
    CHECK(train::loss_geo(tape, matching, ramp, b).item() == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(train::loss_geo(tape, facing, ramp, b).item() == doctest::Approx(1.0 - (-g.z())).epsilon(1e-12));

    // A single pixel has no neighbours for a derivative.
    const auto lone = full_batch(1, 1);
    CHECK(train::loss_geo(tape, rows3({{0, 0, -1}}), column({0.0}), lone).item() == 0.0);
}

TEST_CASE("loss_geo gradient moves the depth toward the normals")
{
    const auto b = full_batch(6, 6);
    const auto g = render::Vec3(0.3, -0.1, -1.0).normalized();
    auto normals = rows3(std::vector<std::array<double, 3>>(b.size(), {g.x(), g.y(), g.z()}));
    std::vector<Tensor> params{column(std::vector<double>(b.size(), 0.0), true)};
    params[0].set_name("z");
    ad::AdamState adam;
    adam.learning_rate = 0.01;
    double first = 0.0, last = 0.0;
    for (int step = 0; step < 300; ++step) {
        Tape tape;
        auto loss = train::loss_geo(tape, normals, params[0], b);
        if (step == 0)
            first = loss.item();
        last = loss.item();
        ad::backward(tape, loss);
        ad::adam_step(params, adam);
    }
    CHECK(first > 0.04);
    CHECK(last < 0.01 * first);
}

TEST_CASE("loss_tv values")
{
    Tape tape;
    const auto pair = full_batch(1, 2);
    auto albedo = Tensor::matrix(2, 1, {0.0, 1.0});
    auto coeffs = Tensor::matrix(2, 1, {0.0, 0.0});
    auto normals = rows3({{0, 0, -1}, {0, 0, -1}});
    CHECK(train::loss_tv(tape, albedo, coeffs, normals, pair).item() == doctest::Approx(1.0));

    const auto b = full_batch(3, 3);
    auto flat = Tensor::full({9, 2}, 0.4);
    auto up = rows3(std::vector<std::array<double, 3>>(9, {0, 0, -1}));
    CHECK(train::loss_tv(tape, flat, flat, up, b).item() == 0.0);
    CHECK(train::loss_tv(tape, flat, flat, up, full_batch(1, 1)).item() == 0.0);
}

TEST_CASE("loss_tv matches a loop oracle")
{
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    const std::size_t h = 4, w = 5, n = h * w;
    std::vector<std::uint8_t> mask(n, 1);
    mask[7] = 0;
    mask[13] = 0;
    const auto b = train::make_grid_batch(mask, h, w);
    const auto m = b.size();
    std::vector<double> a(m * 3), c(m * 2), nv(m * 3);
    for (auto& v : a) v = u(rng);
    for (auto& v : c) v = u(rng);
    for (auto& v : nv) v = u(rng);

    std::vector<std::ptrdiff_t> slot(n, -1);
    for (std::size_t i = 0; i < m; ++i)
        slot[b.pixels[i]] = static_cast<std::ptrdiff_t>(i);
    double total = 0.0;
    std::size_t pairs = 0;
    auto add = [&](std::ptrdiff_t i, std::ptrdiff_t j) {
        if (i < 0 || j < 0)
            return;
        for (int k = 0; k < 3; ++k)
            total += std::abs(a[i * 3 + k] - a[j * 3 + k]) + std::pow(nv[i * 3 + k] - nv[j * 3 + k], 2);
        for (int k = 0; k < 2; ++k)
            total += std::abs(c[i * 2 + k] - c[j * 2 + k]);
        ++pairs;
    };
    for (std::size_t r = 0; r < h; ++r)
        for (std::size_t col = 0; col < w; ++col) {
            if (col + 1 < w)
                add(slot[r * w + col], slot[r * w + col + 1]);
            if (r + 1 < h)
                add(slot[r * w + col], slot[(r + 1) * w + col]);
        }
    Tape tape;
    const auto got = train::loss_tv(tape, Tensor::matrix(m, 3, a), Tensor::matrix(m, 2, c), Tensor::matrix(m, 3, nv), b);
    CHECK(got.item() == doctest::Approx(total / pairs).epsilon(1e-12));
}

TEST_CASE("grid batches")
{
    const std::size_t h = 8, w = 10;
    std::vector<std::uint8_t> mask(h * w, 1);
    mask[0] = 0;

    const auto all = train::make_grid_batch(mask, h, w);
    CHECK(all.size() == h * w - 1);
    CHECK(all.spacing == 1);

    const auto sparse = train::make_grid_batch(mask, h, w, 3, 1, 2);
    for (auto p : sparse.pixels) {
        CHECK((p / w) % 3 == 1);
        CHECK((p % w) % 3 == 2);
    }
    CHECK(sparse.spacing == 3);
    for (std::size_t i = 0; i < sparse.size(); ++i)
        if (sparse.right[i] >= 0)
            CHECK(sparse.pixels[sparse.right[i]] == sparse.pixels[i] + 3);

    const auto blocks = train::make_grid_batch(mask, h, w, 4, 1, 1, 2);
    CHECK(blocks.spacing == 1);
    for (auto p : blocks.pixels) {
        CHECK(((p / w) + 3) % 4 < 2);
        CHECK(((p % w) + 3) % 4 < 2);
    }
    for (std::size_t i = 0; i < blocks.size(); ++i) {
        if (blocks.down[i] >= 0)
            CHECK(blocks.pixels[blocks.down[i]] == blocks.pixels[i] + w);
        if (blocks.left[i] >= 0)
            CHECK(blocks.pixels[blocks.left[i]] + 1 == blocks.pixels[i]);
    }

    CHECK(all.left[all.size() - 1] >= 0);
    CHECK(all.left[0] == -1);  // pixel (0, 1): left neighbour is masked out

    CHECK_THROWS_AS(train::make_grid_batch(mask, h, w, 2, 0, 0, 3), std::invalid_argument);
    CHECK_THROWS_AS(train::make_grid_batch(mask, h, w + 1), std::invalid_argument);
}

TEST_CASE("offsets tile every pixel exactly once")
{
    const std::size_t h = 9, w = 7, stride = 3;
    std::vector<std::uint8_t> mask(h * w, 1);
    std::vector<int> hits(h * w, 0);
    for (std::size_t ro = 0; ro < stride; ++ro)
        for (std::size_t co = 0; co < stride; ++co)
            for (auto p : train::make_grid_batch(mask, h, w, stride, ro, co).pixels)
                ++hits[p];
    CHECK(std::all_of(hits.begin(), hits.end(), [](int v) { return v == 1; }));
}

TEST_CASE("auto stride respects the pixel budget")
{
    const std::size_t h = 64, w = 64;
    std::vector<std::uint8_t> mask(h * w, 1);
    for (std::size_t block : {1, 2}) {
        for (std::size_t budget : {100, 500, 4096}) {
            const auto s = train::auto_stride(mask, h, w, budget, block);
            CHECK(s >= block);
            CHECK(train::make_grid_batch(mask, h, w, s, 0, 0, block).size() <= budget);
            if (s > block)
                CHECK(train::make_grid_batch(mask, h, w, s - 1, 0, 0, block).size() > budget);
        }
    }
    CHECK(train::auto_stride(mask, h, w, 4096) == 1);
}

TEST_CASE("config parse, echo and validation")
{
    const auto cfg = train::parse_config("iterations = 100  # short\n"
                                         "beta=0.5\n"
                                         "use_tv = false\n"
                                         "drop_images = 0-2, 7\n"
                                         "k = 4\n");
    CHECK(cfg.iterations == 100);
    CHECK(cfg.beta == 0.5);
    CHECK_FALSE(cfg.use_tv);
    CHECK(cfg.basis_count == 4);
    CHECK(cfg.drop_images == std::vector<std::size_t>{0, 1, 2, 7});

    const auto echoed = train::parse_config(train::to_text(cfg));
    CHECK(train::to_text(echoed) == train::to_text(cfg));

    CHECK_THROWS_WITH_AS(train::parse_config("speed = 3\n"), doctest::Contains("speed"), std::invalid_argument);
    CHECK_THROWS_WITH_AS(train::parse_config("iterations = 0\n"), doctest::Contains("iterations"),
                         std::invalid_argument);
    CHECK_THROWS_WITH_AS(train::parse_config("guidance_end = 1.5\n"), doctest::Contains("guidance_end"),
                         std::invalid_argument);
    CHECK_THROWS_WITH_AS(train::parse_config("use_tv = maybe\n"), doctest::Contains("use_tv"),
                         std::invalid_argument);
    CHECK_THROWS_AS(train::parse_config("learning_rate = fast\n"), std::invalid_argument);
    CHECK_THROWS_AS(train::parse_config("just words\n"), std::invalid_argument);
    CHECK_THROWS_AS(train::parse_config("pixel_stride = 1\npixel_block = 2\n"), std::invalid_argument);
}

TEST_CASE("schedule switches at the ceiling of the guidance fraction")
{
    train::FitConfig cfg;
    cfg.iterations = 7;
    cfg.guidance_end = 0.5;
    CHECK(cfg.switch_iteration() == 4);
    for (std::size_t it = 0; it < 7; ++it) {
        CHECK(cfg.guidance_phase(it) == (it < 4));
        CHECK(cfg.beta_at(it) == (it < 4 ? cfg.beta : 0.0));
    }
    cfg.use_tv = false;
    CHECK(cfg.beta_at(0) == 0.0);
    cfg.guidance_end = 1.0;
    CHECK(cfg.switch_iteration() == 7);
    CHECK(cfg.guidance_phase(6));
}

TEST_CASE("color statistics")
{
    io::ObservationStack stack;
    stack.height = 1;
    stack.width = 3;
    stack.channels = 2;
    stack.mask = {1, 1, 0};
    stack.lights.resize(2);
    stack.images = {1, 10, 3, 10, 99, 99,
                    5, 10, 7, 10, 99, 99};
    const auto s = train::color_statistics(stack);
    REQUIRE(s.size() == 4);
    CHECK(s[0] == doctest::Approx(4.0));
    CHECK(s[1] == doctest::Approx(10.0));
    CHECK(s[2] == doctest::Approx(std::sqrt(5.0)));
    CHECK(s[3] == doctest::Approx(0.0));
}

TEST_CASE("small fit is reproducible and lowers the reconstruction loss")
{
    const auto scene = io::make_sphere_scene(20, 20, 6, io::Material::Lambertian, 3);
    const auto cfg = tiny_config();
    const auto net = tiny_network(3);

    std::size_t phases[2] = {0, 0};
    train::FitHooks hooks;
    hooks.on_iteration = [&](const train::LossReport& r) { ++phases[r.rendered_shadows ? 1 : 0]; };
    const auto a = train::fit(scene.observations, cfg, net, hooks);
    const auto b = train::fit(scene.observations, cfg, net);

    REQUIRE(a.history.size() == cfg.iterations);
    CHECK(phases[0] == cfg.switch_iteration());
    CHECK(phases[1] == cfg.iterations - cfg.switch_iteration());
    for (std::size_t i = 0; i < a.history.size(); ++i) {
        CHECK(a.history[i].total == b.history[i].total);
        CHECK(a.history[i].beta == cfg.beta_at(i));
    }
    CHECK(a.estimate.normals == b.estimate.normals);

    auto median_rec = [&](std::size_t from, std::size_t to) {
        std::vector<double> v;
        for (std::size_t i = from; i < to; ++i)
            v.push_back(a.history[i].rec);
        std::nth_element(v.begin(), v.begin() + v.size() / 2, v.end());
        return v[v.size() / 2];
    };
    CHECK(median_rec(50, 60) < median_rec(0, 10));

    const auto& est = a.estimate;
    CHECK(est.height == 20);
    CHECK(est.lights == 6);
    CHECK(est.shadows.size() == 6 * 400);
    CHECK(est.rerendered.size() == 6 * 400 * 3);
    for (std::size_t p = 0; p < est.pixels(); ++p) {
        if (!est.mask[p])
            continue;
        const render::Vec3 n(est.normals[3 * p], est.normals[3 * p + 1], est.normals[3 * p + 2]);
        CHECK(n.norm() == doctest::Approx(1.0).epsilon(1e-5));
    }
}

TEST_CASE("a different seed gives a different fit")
{
    const auto scene = io::make_sphere_scene(16, 16, 4, io::Material::Lambertian, 3);
    auto cfg = tiny_config();
    cfg.iterations = 5;
    const auto a = train::fit(scene.observations, cfg, tiny_network(3));
    cfg.seed = 5;
    const auto b = train::fit(scene.observations, cfg, tiny_network(3));
    CHECK(a.history.back().total != b.history.back().total);
}

TEST_CASE("disabled shadows report all pixels lit")
{
    const auto scene = io::make_step_scene(16, 16, 4.0, 4);
    auto cfg = tiny_config();
    cfg.iterations = 4;
    cfg.use_shadow = false;
    const auto r = train::fit(scene.observations, cfg, tiny_network(3));
    CHECK(std::all_of(r.estimate.shadows.begin(), r.estimate.shadows.end(), [](auto s) { return s == 1; }));
    for (const auto& h : r.history)
        CHECK_FALSE(h.rendered_shadows);
}

TEST_CASE("divergence is reported with its iteration")
{
    const auto scene = io::make_sphere_scene(16, 16, 4, io::Material::Lambertian, 3);
    auto cfg = tiny_config();
    cfg.learning_rate = 1e30;
    cfg.iterations = 50;
    try {
        train::fit(scene.observations, cfg, tiny_network(3));
        FAIL("expected a numeric failure");
    } catch (const train::FitError& e) {
        CHECK(e.iteration() < 50);
        CHECK(std::string(e.what()).find("iteration") != std::string::npos);
    }
}
