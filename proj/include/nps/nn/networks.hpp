#pragma once

#include "nps/autodiff/ops.hpp"
#include "nps/nn/encoding.hpp"
#include "nps/nn/mlp.hpp"
#include "nps/nn/param_store.hpp"

#include <array>
#include <cstdint>
#include <random>
#include <span>
#include <vector>

namespace nps::nn {

struct NetworkConfig {
    std::size_t channels = 3;
    std::size_t basis_count = 9;
    std::size_t coord_levels = 10;
    std::size_t basis_levels = 3;
    std::size_t skip_after = 4;

    std::size_t surface_width = 256;
    std::size_t surface_layers = 12;
    std::size_t normal_layer = 8;

    std::size_t depth_width = 256;
    std::size_t depth_layers = 8;

    std::size_t basis_width = 64;
    std::size_t basis_layers = 3;

    // Raw depth output is multiplied by this to give pixel units.
    double depth_scale = 1.0;

    std::size_t color_stat_dim() const { return 2 * channels; }
    std::size_t surface_input_dim() const { return 2 * (1 + 2 * coord_levels) + color_stat_dim(); }
    std::size_t depth_input_dim() const { return 2 * (1 + 2 * coord_levels); }
    std::size_t basis_input_dim() const { return 2 * (1 + 2 * basis_levels); }
};

template <class T>
struct SurfaceOutputs {
    ad::Tensor<T> normal;  // [N, 3], unit rows
    ad::Tensor<T> albedo;  // [N, channels], >= 0
    ad::Tensor<T> coeffs;  // [N, k], >= 0
};

// Per-pixel network: encoded coordinate plus color statistics in, normal,
// albedo and basis weights out. The normal head branches off layer
// `normal_layer`; the trunk carries on from the same features.
template <class T>
class SurfaceNet {
public:
    SurfaceNet() = default;

    SurfaceNet(const NetworkConfig& cfg, ParamStore<T>& store, std::mt19937_64& rng)
        : channels_(cfg.channels), basis_count_(cfg.basis_count)
    {
        MlpSpec spec;
        spec.input_dim = cfg.surface_input_dim();
        spec.widths.assign(cfg.surface_layers, cfg.surface_width);
        spec.skip_after = cfg.skip_after;
        std::vector<double> brdf_bias(cfg.channels, 0.5);
        brdf_bias.resize(cfg.channels + cfg.basis_count, 0.05);
        spec.heads = {
            HeadSpec{"normal", cfg.normal_layer, 3, 0.1, {0.0, 0.0, -1.0}},
            HeadSpec{"brdf", cfg.surface_layers, cfg.channels + cfg.basis_count, 0.1, brdf_bias},
        };
        mlp_ = Mlp<T>("surface", std::move(spec), store, rng);
    }

    SurfaceOutputs<T> forward(ad::Tape<T>& tape, const ad::Tensor<T>& input) const
    {
        auto heads = mlp_.forward(tape, input);
        auto brdf = ad::relu(tape, heads[1]);
        return {ad::l2_normalize(tape, heads[0]), ad::slice_cols(tape, brdf, 0, channels_),
                ad::slice_cols(tape, brdf, channels_, basis_count_)};
    }

    const Mlp<T>& mlp() const { return mlp_; }

private:
    std::size_t channels_ = 3;
    std::size_t basis_count_ = 9;
    Mlp<T> mlp_;
};

// Specular basis: (n.h, v.h) in, k nonnegative lobe responses out.
template <class T>
class BasisNet {
public:
    BasisNet() = default;

    BasisNet(const NetworkConfig& cfg, ParamStore<T>& store, std::mt19937_64& rng)
        : levels_(cfg.basis_levels)
    {
        MlpSpec spec;
        spec.input_dim = cfg.basis_input_dim();
        spec.widths.assign(cfg.basis_layers, cfg.basis_width);
        // Small positive responses at init keep every relu output alive.
        spec.heads = {HeadSpec{"basis", cfg.basis_layers, cfg.basis_count, 0.02, {0.1}}};
        mlp_ = Mlp<T>("basis", std::move(spec), store, rng);
    }

    // `cosines` is [N, 2] holding (n.h, v.h).
    ad::Tensor<T> forward(ad::Tape<T>& tape, const ad::Tensor<T>& cosines) const
    {
        auto encoded = ad::encode(tape, cosines, levels_);
        return ad::relu(tape, mlp_.forward(tape, encoded)[0]);
    }

    // Single query outside any recording tape.
    std::vector<double> evaluate(double nh, double vh) const
    {
        ad::Tape<T> tape(false);
        auto out = forward(tape, ad::Tensor<T>::matrix(1, 2, {static_cast<T>(nh), static_cast<T>(vh)}));
        return {out.data().begin(), out.data().end()};
    }

    const Mlp<T>& mlp() const { return mlp_; }

private:
    std::size_t levels_ = 3;
    Mlp<T> mlp_;
};

// Depth field over normalized image coordinates; output in pixel units.
template <class T>
class DepthNet {
public:
    DepthNet() = default;

    DepthNet(const NetworkConfig& cfg, ParamStore<T>& store, std::mt19937_64& rng)
        : levels_(cfg.coord_levels), scale_(cfg.depth_scale)
    {
        MlpSpec spec;
        spec.input_dim = cfg.depth_input_dim();
        spec.widths.assign(cfg.depth_layers, cfg.depth_width);
        spec.skip_after = cfg.skip_after;
        spec.heads = {HeadSpec{"depth", cfg.depth_layers, 1, 0.01, {}}};
        mlp_ = Mlp<T>("depth", std::move(spec), store, rng);
    }

    // `coords` is [N, 2] in (-1, 1)^2.
    ad::Tensor<T> forward(ad::Tape<T>& tape, const ad::Tensor<T>& coords) const
    {
        auto encoded = ad::encode(tape, coords, levels_);
        return ad::scale(tape, mlp_.forward(tape, encoded)[0], static_cast<T>(scale_));
    }

    double scale() const { return scale_; }
    const Mlp<T>& mlp() const { return mlp_; }

private:
    std::size_t levels_ = 10;
    double scale_ = 1.0;
    Mlp<T> mlp_;
};

// The three networks and the store that owns their parameters. Tensors are
// shared handles, so the model is move-only to avoid accidental aliasing.
template <class T>
struct Model {
    NetworkConfig config;
    ParamStore<T> store;
    SurfaceNet<T> surface;
    BasisNet<T> basis;
    DepthNet<T> depth;

    Model() = default;
    Model(const Model&) = delete;
    Model& operator=(const Model&) = delete;
    Model(Model&&) noexcept = default;
    Model& operator=(Model&&) noexcept = default;
};

template <class T>
Model<T> init_model(const NetworkConfig& cfg, std::uint64_t seed)
{
    Model<T> model;
    model.config = cfg;
    std::mt19937_64 rng(seed);
    model.surface = SurfaceNet<T>(cfg, model.store, rng);
    model.basis = BasisNet<T>(cfg, model.store, rng);
    model.depth = DepthNet<T>(cfg, model.store, rng);
    return model;
}

// Constant network input rows: encoded (x, y) followed by the color statistics.
template <class T>
ad::Tensor<T> surface_input(std::span<const std::array<double, 2>> coords, std::size_t levels,
                            std::span<const double> color_stats)
{
    const auto width = 2 * (1 + 2 * levels) + color_stats.size();
    std::vector<T> data;
    data.reserve(coords.size() * width);
    for (const auto& xy : coords) {
        for (double v : encode(xy, levels))
            data.push_back(static_cast<T>(v));
        for (double v : color_stats)
            data.push_back(static_cast<T>(v));
    }
    return ad::Tensor<T>(ad::Shape{coords.size(), width}, std::move(data));
}

template <class T>
ad::Tensor<T> coordinate_rows(std::span<const std::array<double, 2>> coords)
{
    std::vector<T> data;
    data.reserve(coords.size() * 2);
    for (const auto& xy : coords) {
        data.push_back(static_cast<T>(xy[0]));
        data.push_back(static_cast<T>(xy[1]));
    }
    return ad::Tensor<T>(ad::Shape{coords.size(), 2}, std::move(data));
}

} // namespace nps::nn
