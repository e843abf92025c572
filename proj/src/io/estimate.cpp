#include "nps/io/estimate.hpp"

#include "nps/io/grid_io.hpp"
#include "nps/io/image_io.hpp"
#include "nps/render/geometry.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <stdexcept>

namespace nps::io {

namespace fs = std::filesystem;

namespace {

std::string indexed(const char* prefix, std::size_t i)
{
    char name[64];
    std::snprintf(name, sizeof(name), "%s_%02zu.png", prefix, i);
    return name;
}

} // namespace

void export_maps(const SceneEstimate& est, const fs::path& dir, const nlohmann::json& metrics)
{
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec || !fs::is_directory(dir))
        throw std::runtime_error("cannot create output directory " + dir.string());
    const auto pixels = est.pixels();

    Image normal_png{est.height, est.width, 3, std::vector<float>(pixels * 3, 0.0f)};
    FloatGrid normal_grid{est.height, est.width, 3, std::vector<float>(pixels * 3, 0.0f)};
    for (std::size_t p = 0; p < pixels; ++p) {
        if (!est.mask[p])
            continue;
        const auto n = render::to_dataset({est.normals[3 * p], est.normals[3 * p + 1], est.normals[3 * p + 2]});
        for (int k = 0; k < 3; ++k) {
            normal_grid.values[3 * p + k] = static_cast<float>(n[k]);
            normal_png.data[3 * p + k] = static_cast<float>(0.5 * (n[k] + 1.0));
        }
    }
    write_png(dir / "normal.png", normal_png, 8);
    write_float_grid(dir / "normal", normal_grid);
    write_float_grid(dir / "depth", FloatGrid{est.height, est.width, 1, est.depth});

    float albedo_peak = 0.0f;
    for (std::size_t p = 0; p < pixels; ++p)
        if (est.mask[p])
            for (std::size_t c = 0; c < est.channels; ++c)
                albedo_peak = std::max(albedo_peak, est.albedo[p * est.channels + c]);
    Image albedo{est.height, est.width, est.channels, est.albedo};
    if (albedo_peak > 0.0f)
        for (auto& v : albedo.data)
            v /= albedo_peak;
    write_png(dir / "albedo.png", albedo, 8);

    float spec_peak = 0.0f;
    for (float v : est.specular)
        spec_peak = std::max(spec_peak, v);
    for (std::size_t i = 0; i < est.lights; ++i) {
        Image spec{est.height, est.width, 1, std::vector<float>(pixels, 0.0f)};
        Image shadow{est.height, est.width, 1, std::vector<float>(pixels, 0.0f)};
        for (std::size_t p = 0; p < pixels; ++p) {
            if (spec_peak > 0.0f)
                spec.data[p] = est.specular[i * pixels + p] / spec_peak;
            shadow.data[p] = est.shadows[i * pixels + p];
        }
        write_png(dir / indexed("specular", i), spec, 8);
        write_png(dir / indexed("shadow", i), shadow, 8);
        Image rerender{est.height, est.width, est.channels, {}};
        const auto stride = pixels * est.channels;
        rerender.data.assign(est.rerendered.begin() + i * stride, est.rerendered.begin() + (i + 1) * stride);
        write_png(dir / indexed("rerender", i), rerender, 16);
    }

    std::ofstream js(dir / "metrics.json");
    js << metrics.dump(2) << '\n';
    if (!js)
        throw std::runtime_error("cannot write " + (dir / "metrics.json").string());
}

namespace {

// DiLiGenT folders name their ground truth Normal_gt.png.
fs::path normal_png(const fs::path& dir, bool ground_truth)
{
    if (!ground_truth)
        return dir / "normal.png";
    if (!fs::exists(dir / "normal_gt.png") && fs::exists(dir / "Normal_gt.png"))
        return dir / "Normal_gt.png";
    return dir / "normal_gt.png";
}

} // namespace

bool has_normal_map(const fs::path& dir, bool ground_truth)
{
    const std::string stem = ground_truth ? "normal_gt" : "normal";
    return fs::exists(dir / (stem + ".f32")) || fs::exists(normal_png(dir, ground_truth));
}

std::vector<float> read_normal_map(const fs::path& dir, bool ground_truth, std::size_t* height,
                                   std::size_t* width)
{
    const std::string stem = ground_truth ? "normal_gt" : "normal";
    const auto png = normal_png(dir, ground_truth);
    std::vector<float> dataset;
    std::size_t h = 0;
    std::size_t w = 0;
    if (fs::exists(dir / (stem + ".f32"))) {
        auto grid = read_float_grid(dir / stem);
        if (grid.channels != 3)
            throw std::runtime_error(stem + ".f32: expected 3 channels");
        h = grid.height, w = grid.width;
        dataset = std::move(grid.values);
    } else if (fs::exists(png)) {
        auto img = read_image(png);
        if (img.channels != 3)
            throw std::runtime_error(png.filename().string() + ": expected an RGB image");
        h = img.height, w = img.width;
        dataset.resize(img.data.size());
        for (std::size_t i = 0; i < img.data.size(); ++i)
            dataset[i] = 2.0f * img.data[i] - 1.0f;
    } else {
        throw std::runtime_error("no " + stem + " map in " + dir.string());
    }
    std::vector<float> out(dataset.size());
    for (std::size_t p = 0; p < h * w; ++p) {
        render::Vec3 n(dataset[3 * p], dataset[3 * p + 1], dataset[3 * p + 2]);
        if (n.norm() > 0.0)
            n.normalize();
        const auto internal = render::to_internal(n);
        for (int k = 0; k < 3; ++k)
            out[3 * p + k] = static_cast<float>(internal[k]);
    }
    if (height)
        *height = h;
    if (width)
        *width = w;
    return out;
}

} // namespace nps::io
