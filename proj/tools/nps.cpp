#include "nps/eval/metrics.hpp"
#include "nps/eval/sphere.hpp"
#include "nps/io/dataset.hpp"
#include "nps/io/estimate.hpp"
#include "nps/io/image_io.hpp"
#include "nps/io/synthetic.hpp"
#include "nps/nn/checkpoint.hpp"
#include "nps/train/fit.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <cmath>
#if defined(__GLIBC__)
#include <malloc.h>
#endif
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

namespace fs = std::filesystem;
using nlohmann::json;
using namespace nps;

namespace {

// Malformed input from the command line or data files; exit code 2.
struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

json config_json(const train::FitConfig& c)
{
    return {{"iterations", c.iterations},
            {"batch_images", c.batch_images},
            {"learning_rate", c.learning_rate},
            {"beta", c.beta},
            {"guidance_end", c.guidance_end},
            {"seed", c.seed},
            {"use_shadow", c.use_shadow},
            {"use_specular", c.use_specular},
            {"use_tv", c.use_tv},
            {"k", c.basis_count},
            {"drop_images", c.drop_images},
            {"grayscale", c.grayscale},
            {"inverse_gamma", c.inverse_gamma},
            {"pixel_stride", c.pixel_stride},
            {"pixel_block", c.pixel_block},
            {"max_batch_pixels", c.max_batch_pixels},
            {"shadow_refresh", c.shadow_refresh},
            {"shadow_samples", c.shadow_samples}};
}

json network_json(const nn::NetworkConfig& n)
{
    return {{"channels", n.channels},           {"basis_count", n.basis_count},
            {"coord_levels", n.coord_levels},   {"basis_levels", n.basis_levels},
            {"skip_after", n.skip_after},       {"surface_width", n.surface_width},
            {"surface_layers", n.surface_layers}, {"normal_layer", n.normal_layer},
            {"depth_width", n.depth_width},     {"depth_layers", n.depth_layers},
            {"basis_width", n.basis_width},     {"basis_layers", n.basis_layers},
            {"depth_scale", n.depth_scale}};
}

nn::NetworkConfig network_from_json(const json& j)
{
    nn::NetworkConfig n;
    n.channels = j.at("channels");
    n.basis_count = j.at("basis_count");
    n.coord_levels = j.at("coord_levels");
    n.basis_levels = j.at("basis_levels");
    n.skip_after = j.at("skip_after");
    n.surface_width = j.at("surface_width");
    n.surface_layers = j.at("surface_layers");
    n.normal_layer = j.at("normal_layer");
    n.depth_width = j.at("depth_width");
    n.depth_layers = j.at("depth_layers");
    n.basis_width = j.at("basis_width");
    n.basis_layers = j.at("basis_layers");
    n.depth_scale = j.at("depth_scale");
    return n;
}

// NaN and infinities are not valid JSON numbers.
json number_or_string(double v)
{
    if (std::isfinite(v))
        return v;
    return std::isnan(v) ? "nan" : (v > 0 ? "inf" : "-inf");
}

void write_json(const fs::path& path, const json& j)
{
    std::ofstream out(path);
    if (!out)
        throw std::runtime_error("cannot write " + path.string());
    out << j.dump(2) << '\n';
}

std::vector<double> psnr_per_image(const io::SceneEstimate& est, const io::ObservationStack& stack)
{
    std::vector<double> out;
    const auto stride = stack.image_stride();
    for (std::size_t i = 0; i < stack.count(); ++i) {
        const std::span<const float> pred(est.rerendered.data() + i * stride, stride);
        out.push_back(eval::psnr(pred, stack.image(i), stack.mask, stack.channels));
    }
    return out;
}

json psnr_json(const std::vector<double>& values)
{
    json per = json::array();
    for (double v : values)
        per.push_back(number_or_string(v));
    return {{"per_image", per}, {"mean", number_or_string(eval::mean_psnr(values))}};
}

std::array<double, 3> parse_triple(const std::string& text, const char* what)
{
    std::array<double, 3> v{};
    std::istringstream is(text);
    char sep = 0;
    if (!(is >> v[0] >> sep >> v[1] >> sep >> v[2]) || !is.eof())
        throw UsageError(std::string(what) + " expects three comma-separated numbers, got '" + text + "'");
    return v;
}

int run_fit(const fs::path& data_dir, const std::string& config_path, fs::path out_dir,
            const std::vector<std::string>& ablate, std::optional<std::uint64_t> seed,
            std::optional<std::size_t> iterations, bool quiet)
{
    train::FitConfig cfg;
    if (!config_path.empty())
        cfg = train::load_config(config_path, cfg);
    for (const auto& a : ablate) {
        if (a == "shadow")
            cfg.use_shadow = false;
        else if (a == "tv")
            cfg.use_tv = false;
        else if (a == "specular")
            cfg.use_specular = false;
        else
            throw UsageError("--ablate expects shadow, tv or specular, got '" + a + "'");
    }
    if (seed)
        cfg.seed = *seed;
    if (iterations)
        cfg.iterations = *iterations;
    cfg.validate();
    if (out_dir.empty())
        out_dir = data_dir / "fit";

    io::LoadOptions load;
    load.grayscale = cfg.grayscale;
    load.inverse_gamma = cfg.inverse_gamma;
    load.drop_images = cfg.drop_images;
    const auto stack = io::load_dataset(data_dir, load);

    train::FitHooks hooks;
    const auto report_every = std::max<std::size_t>(cfg.iterations / 20, 1);
    if (!quiet)
        hooks.on_iteration = [&](const train::LossReport& r) {
            if (r.iteration % report_every == 0 || r.iteration + 1 == cfg.iterations)
                std::fprintf(stderr, "iter %5zu  rec %.5f  geo %.5f  tv %.5f  total %.5f\n", r.iteration, r.rec,
                             r.geo, r.tv, r.total);
        };
    auto result = train::fit(stack, cfg, hooks);

    json metrics;
    if (io::has_normal_map(data_dir, true)) {
        std::size_t h = 0, w = 0;
        const auto gt = io::read_normal_map(data_dir, true, &h, &w);
        if (h != stack.height || w != stack.width)
            throw UsageError("normal_gt size does not match the images");
        metrics["mae_deg"] = eval::mae(result.estimate.normals, gt, stack.mask);
    } else {
        metrics["mae_deg"] = nullptr;
    }
    metrics["psnr_db"] = psnr_json(psnr_per_image(result.estimate, stack));
    metrics["runtime_s"] = result.runtime_s;
    metrics["config_echo"] = config_json(cfg);

    fs::create_directories(out_dir);
    io::export_maps(result.estimate, out_dir, metrics);
    train::write_loss_history(out_dir / "loss_history.csv", result.history);
    nn::save_checkpoint(result.model.store, out_dir);
    write_json(out_dir / "model.json", {{"network", network_json(result.model.config)},
                                        {"color_stats", result.color_stats},
                                        {"height", stack.height},
                                        {"width", stack.width},
                                        {"config", config_json(cfg)}});
    std::cout << metrics.dump(2) << '\n';
    return 0;
}

int run_synth(const std::string& kind, std::size_t size, std::size_t lights, const std::string& material,
              fs::path out_dir, std::uint64_t seed, double block_height)
{
    if (size < 8)
        throw UsageError("--size must be at least 8");
    if (lights == 0)
        throw UsageError("--lights must be positive");
    io::Material mat;
    if (material == "lambertian")
        mat = io::Material::Lambertian;
    else if (material == "specular")
        mat = io::Material::Specular;
    else
        throw UsageError("--material expects lambertian or specular, got '" + material + "'");
    if (out_dir.empty())
        out_dir = kind;

    io::SyntheticScene scene;
    if (kind == "sphere")
        scene = io::make_sphere_scene(size, size, lights, mat, seed);
    else if (kind == "step")
        scene = io::make_step_scene(size, size, block_height > 0 ? block_height : size / 4.0, lights);
    else if (kind == "composite")
        scene = io::make_composite_scene(size, lights, seed);
    else
        throw UsageError("synth expects sphere, step or composite, got '" + kind + "'");
    io::save_synthetic(out_dir, scene);
    std::cout << out_dir.string() << '\n';
    return 0;
}

int run_eval(const fs::path& est_dir, const fs::path& gt_dir)
{
    std::size_t h = 0, w = 0, gh = 0, gw = 0;
    const auto est = io::read_normal_map(est_dir, false, &h, &w);
    const auto gt = io::read_normal_map(gt_dir, true, &gh, &gw);
    if (h != gh || w != gw)
        throw UsageError("estimate is " + std::to_string(w) + "x" + std::to_string(h) + " but ground truth is " +
                         std::to_string(gw) + "x" + std::to_string(gh));
    std::vector<std::uint8_t> mask(h * w, 1);
    if (fs::exists(gt_dir / "mask.png")) {
        const auto m = io::read_image(gt_dir / "mask.png");
        if (m.height != h || m.width != w)
            throw UsageError("mask size does not match the normal maps");
        for (std::size_t p = 0; p < mask.size(); ++p)
            mask[p] = m.data[p * m.channels] > 0.0f;
    }
    json metrics;
    metrics["mae_deg"] = eval::mae(est, gt, mask);

    // Re-render fidelity when the estimate carries re-rendered images for the
    // ground-truth observations.
    if (fs::exists(gt_dir / "light_directions.txt") && fs::exists(est_dir / "rerender_00.png")) {
        const auto stack = io::load_dataset(gt_dir);
        std::vector<double> values;
        for (std::size_t i = 0; i < stack.count(); ++i) {
            char name[32];
            std::snprintf(name, sizeof name, "rerender_%02zu.png", i);
            if (!fs::exists(est_dir / name))
                break;
            const auto img = io::read_image(est_dir / name);
            if (img.channels != stack.channels || img.height != stack.height || img.width != stack.width)
                break;
            values.push_back(eval::psnr(img.data, stack.image(i), stack.mask, stack.channels));
        }
        if (values.size() == stack.count())
            metrics["psnr_db"] = psnr_json(values);
    }
    std::cout << metrics.dump(2) << '\n';
    return 0;
}

int run_sphere(const fs::path& est_dir, const std::string& pixel, const std::string& light_text,
               std::size_t resolution, fs::path out, bool normalize)
{
    std::ifstream in(est_dir / "model.json");
    if (!in)
        throw UsageError("no model.json in " + est_dir.string());
    const auto meta = json::parse(in);
    const auto net = network_from_json(meta.at("network"));
    const std::vector<double> stats = meta.at("color_stats");
    const std::size_t height = meta.at("height"), width = meta.at("width");

    int px = 0, py = 0;
    char sep = 0;
    std::istringstream is(pixel);
    if (!(is >> px >> sep >> py) || sep != ',' || !is.eof())
        throw UsageError("--pixel expects X,Y, got '" + pixel + "'");
    if (px < 0 || py < 0 || std::size_t(px) >= width || std::size_t(py) >= height)
        throw UsageError("--pixel " + pixel + " is outside the " + std::to_string(width) + "x" +
                         std::to_string(height) + " image");
    const auto l = parse_triple(light_text, "--light");
    render::Vec3 light = render::to_internal({l[0], l[1], l[2]});
    if (light.norm() == 0.0)
        throw UsageError("--light must be nonzero");
    light.normalize();

    auto model = nn::init_model<float>(net, 0);
    nn::load_checkpoint(model.store, est_dir);
    ad::Tape<float> tape(false);
    const std::array<double, 2> xy{nn::normalize_coordinate(px, width), nn::normalize_coordinate(py, height)};
    const auto surface = model.surface.forward(
        tape, nn::surface_input<float>(std::span(&xy, 1), net.coord_levels, stats));
    const std::vector<double> albedo(surface.albedo.data().begin(), surface.albedo.data().end());
    const std::vector<double> coeffs(surface.coeffs.data().begin(), surface.coeffs.data().end());

    const auto img = eval::render_brdf_sphere(albedo, coeffs, model.basis, light, resolution, normalize);
    if (out.empty())
        out = est_dir / ("sphere_" + std::to_string(px) + "_" + std::to_string(py) + ".png");
    io::Image png{img.resolution, img.resolution, img.channels, img.values};
    io::write_png(out, png, 16);
    json info{{"pixel", {px, py}}, {"albedo", albedo}, {"coeffs", coeffs}, {"image", out.string()}};
    std::cout << info.dump(2) << '\n';
    return 0;
}

} // namespace

int main(int argc, char** argv)
{
#if defined(__GLIBC__)
    // Every iteration allocates and frees the same large activation buffers;
    // keep them in the heap instead of round-tripping through mmap.
    mallopt(M_MMAP_THRESHOLD, 1 << 30);
    mallopt(M_TRIM_THRESHOLD, 1 << 30);
#endif
    CLI::App app{"Neural inverse rendering for photometric stereo"};
    app.require_subcommand(1);

    auto* fit = app.add_subcommand("fit", "fit the networks to a dataset directory");
    std::string fit_dir, fit_config, fit_out;
    std::vector<std::string> ablate;
    std::optional<std::uint64_t> fit_seed;
    std::optional<std::size_t> fit_iterations;
    bool quiet = false;
    fit->add_option("dataset_dir", fit_dir)->required();
    fit->add_option("--config", fit_config, "key = value config file");
    fit->add_option("--out", fit_out, "output directory (default <dataset_dir>/fit)");
    fit->add_option("--ablate", ablate, "disable shadow, tv or specular");
    fit->add_option("--seed", fit_seed);
    fit->add_option("--iterations", fit_iterations);
    fit->add_flag("--quiet", quiet, "no progress on stderr");

    auto* synth = app.add_subcommand("synth", "write a synthetic dataset with ground truth");
    std::string synth_kind, material = "lambertian", synth_out;
    std::size_t size = 64, lights = 16;
    std::uint64_t synth_seed = 0;
    double block_height = 0.0;
    synth->add_option("kind", synth_kind, "sphere, step or composite")->required();
    synth->add_option("--size", size);
    synth->add_option("--lights", lights);
    synth->add_option("--material", material, "lambertian or specular");
    synth->add_option("--out", synth_out);
    synth->add_option("--seed", synth_seed);
    synth->add_option("--block-height", block_height, "step scene block height in pixels");

    auto* ev = app.add_subcommand("eval", "compare an estimate with ground truth");
    std::string est_dir, gt_dir;
    ev->add_option("est_dir", est_dir)->required();
    ev->add_option("gt_dir", gt_dir)->required();

    auto* sphere = app.add_subcommand("sphere", "render the material at one pixel on a sphere");
    std::string sphere_dir, pixel, light, sphere_out;
    std::size_t resolution = 128;
    bool normalize = false;
    sphere->add_option("est_dir", sphere_dir)->required();
    sphere->add_option("--pixel", pixel, "X,Y")->required();
    sphere->add_option("--light", light, "LX,LY,LZ in the dataset frame")->required();
    sphere->add_option("--resolution", resolution);
    sphere->add_option("--out", sphere_out);
    sphere->add_flag("--normalize", normalize, "divide by the maximum");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        std::cerr << "nps: " << e.what() << '\n';
        return 2;
    }

    try {
        if (*fit)
            return run_fit(fit_dir, fit_config, fit_out, ablate, fit_seed, fit_iterations, quiet);
        if (*synth)
            return run_synth(synth_kind, size, lights, material, synth_out, synth_seed, block_height);
        if (*ev)
            return run_eval(est_dir, gt_dir);
        if (*sphere)
            return run_sphere(sphere_dir, pixel, light, resolution, sphere_out, normalize);
    } catch (const train::FitError& e) {
        std::cerr << "nps: " << e.what() << '\n';
        return 1;
    } catch (const ad::NumericError& e) {
        std::cerr << "nps: " << e.what() << '\n';
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "nps: " << e.what() << '\n';
        return 2;
    }
    return 2;
}
