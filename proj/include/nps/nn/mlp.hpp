#pragma once

#include "nps/autodiff/ops.hpp"
#include "nps/nn/param_store.hpp"

#include <cmath>
#include <optional>
#include <random>
#include <string>
#include <vector>

namespace nps::nn {

// Linear readout taken from the output of hidden layer `from_layer` (1-based).
struct HeadSpec {
    std::string name;
    std::size_t from_layer = 0;
    std::size_t dim = 0;
    double weight_gain = 1.0;
    std::vector<double> bias;  // empty: zeros; one value: broadcast
};

struct MlpSpec {
    std::size_t input_dim = 0;
    std::vector<std::size_t> widths;
    std::optional<std::size_t> skip_after;  // encoded input re-enters after this layer
    std::vector<HeadSpec> heads;
};

template <class T>
class Mlp {
public:
    Mlp() = default;

    Mlp(const std::string& name, MlpSpec spec, ParamStore<T>& store, std::mt19937_64& rng)
        : spec_(std::move(spec))
    {
        if (spec_.widths.empty())
            throw std::invalid_argument("Mlp '" + name + "': no hidden layers");
        for (std::size_t i = 0; i < spec_.widths.size(); ++i) {
            const auto fan_in = layer_input_dim(i);
            const double bound = std::sqrt(6.0 / static_cast<double>(fan_in));
            layers_.push_back(make_linear(store, name + "/layer" + std::to_string(i + 1), fan_in,
                                          spec_.widths[i], bound, {}, rng));
        }
        for (const auto& head : spec_.heads) {
            if (head.from_layer < 1 || head.from_layer > spec_.widths.size())
                throw std::invalid_argument("Mlp '" + name + "': head '" + head.name +
                                            "' reads a layer that does not exist");
            const auto fan_in = spec_.widths[head.from_layer - 1];
            const double bound = head.weight_gain * std::sqrt(6.0 / static_cast<double>(fan_in));
            heads_.push_back(make_linear(store, name + "/" + head.name, fan_in, head.dim, bound,
                                         head.bias, rng));
        }
    }

    const MlpSpec& spec() const { return spec_; }

    // Raw (pre-activation) head outputs in declaration order.
    std::vector<ad::Tensor<T>> forward(ad::Tape<T>& tape, const ad::Tensor<T>& input) const
    {
        if (input.cols() != spec_.input_dim)
            throw ad::ShapeError("Mlp: expected input width " + std::to_string(spec_.input_dim) +
                                 ", got " + ad::shape_str(input.shape()));
        std::vector<ad::Tensor<T>> outputs(heads_.size());
        ad::Tensor<T> h = input;
        for (std::size_t i = 0; i < layers_.size(); ++i) {
            if (spec_.skip_after && i == *spec_.skip_after)
                h = ad::concat(tape, {h, input});
            h = ad::relu(tape, affine(tape, h, layers_[i]));
            for (std::size_t k = 0; k < heads_.size(); ++k)
                if (spec_.heads[k].from_layer == i + 1)
                    outputs[k] = affine(tape, h, heads_[k]);
        }
        return outputs;
    }

private:
    struct Linear {
        ad::Tensor<T> weight;  // [in, out]
        ad::Tensor<T> bias;    // [1, out]
    };

    std::size_t layer_input_dim(std::size_t i) const
    {
        if (i == 0)
            return spec_.input_dim;
        if (spec_.skip_after && i == *spec_.skip_after)
            return spec_.widths[i - 1] + spec_.input_dim;
        return spec_.widths[i - 1];
    }

    static Linear make_linear(ParamStore<T>& store, const std::string& prefix, std::size_t in,
                              std::size_t out, double bound, const std::vector<double>& bias,
                              std::mt19937_64& rng)
    {
        std::uniform_real_distribution<double> dist(-bound, bound);
        std::vector<T> w(in * out);
        for (auto& v : w)
            v = static_cast<T>(dist(rng));
        std::vector<T> b(out, T(0));
        for (std::size_t j = 0; j < out && !bias.empty(); ++j)
            b[j] = static_cast<T>(bias.size() == 1 ? bias[0] : bias.at(j));
        Linear lin;
        lin.weight = store.add(prefix + ".weight", ad::Tensor<T>(ad::Shape{in, out}, std::move(w)));
        lin.bias = store.add(prefix + ".bias", ad::Tensor<T>(ad::Shape{1, out}, std::move(b)));
        return lin;
    }

    static ad::Tensor<T> affine(ad::Tape<T>& tape, const ad::Tensor<T>& x, const Linear& lin)
    {
        return ad::add(tape, ad::matmul(tape, x, lin.weight), lin.bias);
    }

    MlpSpec spec_;
    std::vector<Linear> layers_;
    std::vector<Linear> heads_;
};

} // namespace nps::nn
