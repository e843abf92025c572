#pragma once

#include "nps/io/estimate.hpp"
#include "nps/io/observation.hpp"
#include "nps/nn/networks.hpp"
#include "nps/render/shadow.hpp"
#include "nps/train/config.hpp"

#include <filesystem>
#include <functional>
#include <stdexcept>
#include <vector>

namespace nps::train {

struct LossReport {
    std::size_t iteration = 0;
    double rec = 0.0;
    double geo = 0.0;
    double tv = 0.0;
    double total = 0.0;
    double beta = 0.0;
    bool rendered_shadows = false;  // false: guidance mask (or shadows disabled)
};

class FitError : public std::runtime_error {
public:
    FitError(std::size_t iteration, const std::string& what)
        : std::runtime_error(what), iteration_(iteration)
    {
    }
    std::size_t iteration() const { return iteration_; }

private:
    std::size_t iteration_;
};

struct FitHooks {
    std::function<void(const LossReport&)> on_iteration;
};

struct FitResult {
    io::SceneEstimate estimate;
    std::vector<LossReport> history;
    nn::Model<float> model;
    std::vector<double> color_stats;
    double runtime_s = 0.0;
};

// Per-channel mean followed by per-channel standard deviation of the masked
// pixels over all images.
std::vector<double> color_statistics(const io::ObservationStack& stack);

// Default architecture for a stack: channel count and k from the data and
// config, depth output scaled to half the larger image side.
nn::NetworkConfig network_config_for(const io::ObservationStack& stack, const FitConfig& cfg);

// Depth net evaluated at every pixel centre, row-major, in pixels.
std::vector<double> depth_field(const nn::Model<float>& model, std::size_t height, std::size_t width);

// Cast shadows for every light from the depth net, [light][pixel].
std::vector<std::uint8_t> rendered_shadows(const nn::Model<float>& model, const io::ObservationStack& stack,
                                           const render::ShadowMarchConfig& march);

// Final maps: normals, albedo, coefficients over the mask; depth everywhere;
// shadows (all lit when `use_shadow` is off), specular terms and re-renders per light.
io::SceneEstimate evaluate_scene(const nn::Model<float>& model, const io::ObservationStack& stack,
                                 std::span<const double> color_stats, const FitConfig& cfg);

FitResult fit(const io::ObservationStack& stack, const FitConfig& cfg, const FitHooks& hooks = {});
FitResult fit(const io::ObservationStack& stack, const FitConfig& cfg, const nn::NetworkConfig& network,
              const FitHooks& hooks = {});

// CSV with header "iteration,rec,geo,tv,total".
void write_loss_history(const std::filesystem::path& path, const std::vector<LossReport>& history);

} // namespace nps::train
