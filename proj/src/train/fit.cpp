#include "nps/train/fit.hpp"

#include "nps/autodiff/adam.hpp"
#include "nps/render/guidance.hpp"
#include "nps/train/grid_batch.hpp"
#include "nps/train/losses.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>

namespace nps::train {

namespace {

using Tensor = ad::Tensor<float>;
using Tape = ad::Tape<float>;

constexpr std::size_t eval_chunk = 4096;

const render::Vec3 view_direction(0.0, 0.0, -1.0);

std::vector<std::array<double, 2>> pixel_coords(std::span<const std::size_t> pixels, std::size_t height,
                                                std::size_t width)
{
    std::vector<std::array<double, 2>> coords;
    coords.reserve(pixels.size());
    for (auto p : pixels)
        coords.push_back({nn::normalize_coordinate(double(p % width), width),
                          nn::normalize_coordinate(double(p / width), height)});
    return coords;
}

std::vector<std::size_t> masked_pixels(const io::ObservationStack& stack)
{
    std::vector<std::size_t> out;
    for (std::size_t p = 0; p < stack.pixels(); ++p)
        if (stack.mask[p])
            out.push_back(p);
    return out;
}

// Everything the renderer needs for one (pixel, light) row that does not
// depend on network weights.
struct RenderRows {
    Tensor light;    // [R, 3]
    Tensor half;     // [R, 3]
    Tensor view_half;  // [R, 1]
    Tensor shadow;   // [R, 1]
    Tensor observed; // [R, C]
    Tensor weight;   // [R, 1]
    std::vector<std::size_t> source;  // batch index of each row
};

RenderRows make_rows(const io::ObservationStack& stack, const GridBatch& batch,
                     std::span<const std::size_t> images, std::span<const std::uint8_t> shadow_maps,
                     std::span<const std::uint8_t> guidance)
{
    const auto b = batch.size();
    const auto rows = b * images.size();
    const auto channels = stack.channels;
    const auto pixels = stack.pixels();
    std::vector<float> light(rows * 3), half(rows * 3), vh(rows), shadow(rows, 1.0f), obs(rows * channels),
        weight(rows, 1.0f);
    RenderRows out;
    out.source.resize(rows);
    for (std::size_t j = 0; j < images.size(); ++j) {
        const auto img = images[j];
        const auto& l = stack.lights[img].direction;
        const auto h = render::half_vector(l, view_direction);
        const auto src = stack.image(img);
        for (std::size_t i = 0; i < b; ++i) {
            const auto r = j * b + i;
            const auto p = batch.pixels[i];
            out.source[r] = i;
            for (int k = 0; k < 3; ++k) {
                light[3 * r + k] = static_cast<float>(l[k]);
                half[3 * r + k] = static_cast<float>(h[k]);
            }
            vh[r] = static_cast<float>(view_direction.dot(h));
            for (std::size_t c = 0; c < channels; ++c)
                obs[r * channels + c] = src[p * channels + c];
            if (!shadow_maps.empty())
                shadow[r] = shadow_maps[img * pixels + p];
            if (!guidance.empty())
                weight[r] = guidance[img * pixels + p];
        }
    }
    out.light = Tensor(ad::Shape{rows, 3}, std::move(light));
    out.half = Tensor(ad::Shape{rows, 3}, std::move(half));
    out.view_half = Tensor(ad::Shape{rows, 1}, std::move(vh));
    out.shadow = Tensor(ad::Shape{rows, 1}, std::move(shadow));
    out.observed = Tensor(ad::Shape{rows, channels}, std::move(obs));
    out.weight = Tensor(ad::Shape{rows, 1}, std::move(weight));
    return out;
}

// Differentiable image formation for every row: s * (rho_d + c . D) * max(l . n, 0).
Tensor render_rows(Tape& tape, const nn::Model<float>& model, const nn::SurfaceOutputs<float>& surface,
                   const RenderRows& rows, bool use_specular)
{
    auto normal = ad::gather_rows(tape, surface.normal, rows.source);
    auto shading = ad::max_zero(tape, ad::dot(tape, normal, rows.light));
    Tensor brdf = ad::gather_rows(tape, surface.albedo, rows.source);
    if (use_specular) {
        auto nh = ad::dot(tape, normal, rows.half);
        auto basis = model.basis.forward(tape, ad::concat(tape, {nh, rows.view_half}));
        auto coeffs = ad::gather_rows(tape, surface.coeffs, rows.source);
        brdf = ad::add(tape, brdf, ad::dot(tape, coeffs, basis));
    }
    return ad::mul(tape, brdf, ad::mul(tape, shading, rows.shadow));
}

GridBatch sample_batch(const io::ObservationStack& stack, std::size_t stride, std::size_t block,
                       std::mt19937_64& rng)
{
    std::uniform_int_distribution<std::size_t> pick(0, stride - 1);
    const auto row0 = pick(rng);
    const auto col0 = pick(rng);
    for (std::size_t k = 0; k < stride * stride; ++k) {
        const auto r = (row0 + k / stride) % stride;
        const auto c = (col0 + k % stride) % stride;
        auto batch = make_grid_batch(stack.mask, stack.height, stack.width, stride, r, c, block);
        if (batch.size() > 0)
            return batch;
    }
    return make_grid_batch(stack.mask, stack.height, stack.width, block, 0, 0, block);
}

std::vector<std::size_t> sample_images(std::size_t total, std::size_t count, std::mt19937_64& rng)
{
    std::vector<std::size_t> idx(total);
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    for (std::size_t j = 0; j < count; ++j) {
        std::uniform_int_distribution<std::size_t> pick(j, total - 1);
        std::swap(idx[j], idx[pick(rng)]);
    }
    idx.resize(count);
    return idx;
}

std::string describe(const LossReport& r)
{
    std::ostringstream os;
    os << "rec=" << r.rec << " geo=" << r.geo << " tv=" << r.tv << " total=" << r.total;
    return os.str();
}

} // namespace

std::vector<double> color_statistics(const io::ObservationStack& stack)
{
    const auto channels = stack.channels;
    std::vector<double> sum(channels, 0.0), sq(channels, 0.0);
    double count = 0.0;
    for (std::size_t i = 0; i < stack.count(); ++i) {
        const auto img = stack.image(i);
        for (std::size_t p = 0; p < stack.pixels(); ++p) {
            if (!stack.mask[p])
                continue;
            count += 1.0;
            for (std::size_t c = 0; c < channels; ++c) {
                const double v = img[p * channels + c];
                sum[c] += v;
                sq[c] += v * v;
            }
        }
    }
    std::vector<double> stats(2 * channels, 0.0);
    if (count == 0.0)
        return stats;
    for (std::size_t c = 0; c < channels; ++c) {
        const double mean = sum[c] / count;
        stats[c] = mean;
        stats[channels + c] = std::sqrt(std::max(sq[c] / count - mean * mean, 0.0));
    }
    return stats;
}

nn::NetworkConfig network_config_for(const io::ObservationStack& stack, const FitConfig& cfg)
{
    nn::NetworkConfig net;
    net.channels = stack.channels;
    net.basis_count = cfg.basis_count;
    net.depth_scale = 0.5 * static_cast<double>(std::max(stack.height, stack.width));
    return net;
}

std::vector<double> depth_field(const nn::Model<float>& model, std::size_t height, std::size_t width)
{
    std::vector<double> depth(height * width);
    std::vector<std::size_t> all(height * width);
    std::iota(all.begin(), all.end(), std::size_t{0});
    Tape tape(false);
    for (std::size_t start = 0; start < all.size(); start += eval_chunk) {
        const auto count = std::min(eval_chunk, all.size() - start);
        const auto coords = pixel_coords(std::span(all).subspan(start, count), height, width);
        const auto z = model.depth.forward(tape, nn::coordinate_rows<float>(coords));
        for (std::size_t i = 0; i < count; ++i)
            depth[start + i] = z[i];
    }
    return depth;
}

std::vector<std::uint8_t> rendered_shadows(const nn::Model<float>& model, const io::ObservationStack& stack,
                                           const render::ShadowMarchConfig& march)
{
    const render::DepthGrid grid(stack.width, stack.height, depth_field(model, stack.height, stack.width),
                                 stack.mask);
    const render::RasterDomain domain{stack.width, stack.height, stack.mask};
    const render::DepthQuery query = [&grid](double x, double y) { return grid(x, y); };
    std::vector<std::uint8_t> out;
    out.reserve(stack.count() * stack.pixels());
    for (const auto& light : stack.lights) {
        const auto map = render::render_shadow_map(light.direction, query, domain, march);
        out.insert(out.end(), map.begin(), map.end());
    }
    return out;
}

io::SceneEstimate evaluate_scene(const nn::Model<float>& model, const io::ObservationStack& stack,
                                 std::span<const double> color_stats, const FitConfig& cfg)
{
    const auto& net = model.config;
    io::SceneEstimate est;
    est.height = stack.height;
    est.width = stack.width;
    est.channels = stack.channels;
    est.basis_count = net.basis_count;
    est.lights = stack.count();
    est.mask = stack.mask;
    const auto pixels = stack.pixels();
    est.normals.assign(pixels * 3, 0.0f);
    est.albedo.assign(pixels * est.channels, 0.0f);
    est.coeffs.assign(pixels * est.basis_count, 0.0f);

    const auto masked = masked_pixels(stack);
    Tape tape(false);
    for (std::size_t start = 0; start < masked.size(); start += eval_chunk) {
        const auto count = std::min(eval_chunk, masked.size() - start);
        const auto chunk = std::span(masked).subspan(start, count);
        const auto coords = pixel_coords(chunk, stack.height, stack.width);
        const auto out = model.surface.forward(tape, nn::surface_input<float>(coords, net.coord_levels, color_stats));
        for (std::size_t i = 0; i < count; ++i) {
            const auto p = chunk[i];
            for (int k = 0; k < 3; ++k)
                est.normals[3 * p + k] = out.normal.at(i, k);
            for (std::size_t c = 0; c < est.channels; ++c)
                est.albedo[p * est.channels + c] = out.albedo.at(i, c);
            for (std::size_t k = 0; k < est.basis_count; ++k)
                est.coeffs[p * est.basis_count + k] = out.coeffs.at(i, k);
        }
    }

    const auto depth = depth_field(model, stack.height, stack.width);
    est.depth.assign(depth.begin(), depth.end());

    if (cfg.use_shadow) {
        render::ShadowMarchConfig march;
        march.samples = cfg.shadow_samples;
        est.shadows = rendered_shadows(model, stack, march);
    } else {
        est.shadows.assign(stack.count() * pixels, 1);
    }

    est.specular.assign(stack.count() * pixels, 0.0f);
    est.rerendered.assign(stack.count() * pixels * est.channels, 0.0f);
    for (std::size_t i = 0; i < stack.count(); ++i) {
        const auto& l = stack.lights[i].direction;
        const auto h = render::half_vector(l, view_direction);
        const double vh = view_direction.dot(h);
        for (std::size_t start = 0; start < masked.size(); start += eval_chunk) {
            const auto count = std::min(eval_chunk, masked.size() - start);
            const auto chunk = std::span(masked).subspan(start, count);
            std::vector<float> cosines(2 * count);
            for (std::size_t j = 0; j < count; ++j) {
                const auto p = chunk[j];
                const render::Vec3 n(est.normals[3 * p], est.normals[3 * p + 1], est.normals[3 * p + 2]);
                cosines[2 * j] = static_cast<float>(n.dot(h));
                cosines[2 * j + 1] = static_cast<float>(vh);
            }
            Tensor basis;
            if (cfg.use_specular)
                basis = model.basis.forward(tape, Tensor(ad::Shape{count, 2}, std::move(cosines)));
            for (std::size_t j = 0; j < count; ++j) {
                const auto p = chunk[j];
                const render::Vec3 n(est.normals[3 * p], est.normals[3 * p + 1], est.normals[3 * p + 2]);
                double spec = 0.0;
                if (cfg.use_specular)
                    for (std::size_t k = 0; k < est.basis_count; ++k)
                        spec += double(est.coeffs[p * est.basis_count + k]) * basis.at(j, k);
                const double s = est.shadows[i * pixels + p];
                const double shading = std::max(l.dot(n), 0.0);
                est.specular[i * pixels + p] = static_cast<float>(s * spec * shading);
                for (std::size_t c = 0; c < est.channels; ++c)
                    est.rerendered[(i * pixels + p) * est.channels + c] =
                        static_cast<float>(s * (est.albedo[p * est.channels + c] + spec) * shading);
            }
        }
    }
    return est;
}

FitResult fit(const io::ObservationStack& stack, const FitConfig& cfg, const FitHooks& hooks)
{
    return fit(stack, cfg, network_config_for(stack, cfg), hooks);
}

FitResult fit(const io::ObservationStack& stack, const FitConfig& cfg, const nn::NetworkConfig& network,
              const FitHooks& hooks)
{
    cfg.validate();
    stack.validate();
    if (cfg.batch_images > stack.count())
        throw std::invalid_argument("fit: batch of " + std::to_string(cfg.batch_images) + " images but only " +
                                    std::to_string(stack.count()) + " observations");
    if (stack.masked_count() == 0)
        throw std::invalid_argument("fit: mask is empty");
    if (network.channels != stack.channels)
        throw std::invalid_argument("fit: network channel count does not match the images");

    const auto started = std::chrono::steady_clock::now();
    FitResult result;
    result.model = nn::init_model<float>(network, cfg.seed);
    result.color_stats = color_statistics(stack);
    auto& model = result.model;

    const auto guidance = cfg.use_shadow ? render::shadow_guidance_mask(stack) : std::vector<std::uint8_t>{};
    const auto stride = cfg.pixel_stride > 0
                            ? cfg.pixel_stride
                            : auto_stride(stack.mask, stack.height, stack.width, cfg.max_batch_pixels,
                                          cfg.pixel_block);
    render::ShadowMarchConfig march;
    march.samples = cfg.shadow_samples;

    std::mt19937_64 rng(cfg.seed ^ 0x5eed5eed5eed5eedULL);
    ad::AdamState adam;
    adam.learning_rate = cfg.learning_rate;
    auto params = model.store.tensors("surface/");
    for (auto& t : model.store.tensors("depth/"))
        params.push_back(t);
    if (cfg.use_specular)
        for (auto& t : model.store.tensors("basis/"))
            params.push_back(t);

    std::vector<std::uint8_t> shadow_cache;
    const auto switch_at = cfg.switch_iteration();
    result.history.reserve(cfg.iterations);

    for (std::size_t it = 0; it < cfg.iterations; ++it) {
        LossReport report;
        report.iteration = it;
        report.beta = cfg.beta_at(it);
        const bool guided = cfg.guidance_phase(it);
        report.rendered_shadows = cfg.use_shadow && !guided;
        if (report.rendered_shadows && (shadow_cache.empty() || (it - switch_at) % cfg.shadow_refresh == 0))
            shadow_cache = rendered_shadows(model, stack, march);

        const auto images = sample_images(stack.count(), cfg.batch_images, rng);
        const auto batch = sample_batch(stack, stride, cfg.pixel_block, rng);
        const auto rows = make_rows(stack, batch, images,
                                    report.rendered_shadows ? std::span<const std::uint8_t>(shadow_cache)
                                                            : std::span<const std::uint8_t>{},
                                    cfg.use_shadow && guided ? std::span<const std::uint8_t>(guidance)
                                                             : std::span<const std::uint8_t>{});

        try {
            Tape tape;
            const auto surface = model.surface.forward(
                tape, nn::surface_input<float>(batch.coords, network.coord_levels, result.color_stats));
            const auto depth = model.depth.forward(tape, nn::coordinate_rows<float>(batch.coords));
            const auto rendered = render_rows(tape, model, surface, rows, cfg.use_specular);

            auto rec = loss_rec(tape, rendered, rows.observed, rows.weight);
            // The depth net follows the normals; normals are driven by the images.
            auto geo = loss_geo(tape, ad::detach(surface.normal), depth, batch);
            auto tv = loss_tv(tape, surface.albedo, surface.coeffs, surface.normal, batch);
            auto total = ad::add(tape, rec, geo);
            if (report.beta > 0.0)
                total = ad::add(tape, total, ad::scale(tape, tv, static_cast<float>(report.beta)));

            report.rec = rec.item();
            report.geo = geo.item();
            report.tv = tv.item();
            report.total = total.item();
            if (!std::isfinite(report.total))
                throw ad::NumericError("non-finite total loss");

            ad::backward(tape, total);
            ad::adam_step(params, adam);
        } catch (const ad::NumericError& e) {
            throw FitError(it, "fit: numeric failure at iteration " + std::to_string(it) + " (" + e.what() +
                                   "; " + describe(report) + ")");
        }

        result.history.push_back(report);
        if (hooks.on_iteration)
            hooks.on_iteration(report);
    }

    result.estimate = evaluate_scene(model, stack, result.color_stats, cfg);
    result.runtime_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
    return result;
}

void write_loss_history(const std::filesystem::path& path, const std::vector<LossReport>& history)
{
    std::ofstream out(path);
    if (!out)
        throw std::runtime_error("cannot write " + path.string());
    out.precision(9);
    out << "iteration,rec,geo,tv,total\n";
    for (const auto& r : history)
        out << r.iteration << ',' << r.rec << ',' << r.geo << ',' << r.tv << ',' << r.total << '\n';
}

} // namespace nps::train
