#pragma once

#include "nps/autodiff/tensor.hpp"

#include <cmath>
#include <cstdint>
#include <vector>

namespace nps::ad {

struct AdamState {
    double learning_rate = 5e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
    std::int64_t step = 0;
    std::vector<std::vector<double>> first_moment;
    std::vector<std::vector<double>> second_moment;
};

// Bias-corrected Adam update. The parameter list must be the same (same order,
// same shapes) on every call that shares a state. Gradients are zeroed after.
template <class T>
void adam_step(std::vector<Tensor<T>>& params, AdamState& state)
{
    for (const auto& p : params) {
        if (!p.has_grad())
            throw GradError("adam_step: parameter '" + p.name() + "' has no gradient");
    }
    if (state.first_moment.empty()) {
        for (const auto& p : params) {
            state.first_moment.emplace_back(p.size(), 0.0);
            state.second_moment.emplace_back(p.size(), 0.0);
        }
    }
    if (state.first_moment.size() != params.size())
        throw GradError("adam_step: parameter list changed between steps");
    for (std::size_t i = 0; i < params.size(); ++i)
        if (state.first_moment[i].size() != params[i].size())
            throw GradError("adam_step: moment buffer shape mismatch for '" + params[i].name() + "'");

    ++state.step;
    const double t = static_cast<double>(state.step);
    const double correction1 = 1.0 - std::pow(state.beta1, t);
    const double correction2 = 1.0 - std::pow(state.beta2, t);

    for (std::size_t i = 0; i < params.size(); ++i) {
        auto& p = params[i];
        auto data = p.mutable_data();
        auto grad = p.grad_buffer();
        auto& m = state.first_moment[i];
        auto& v = state.second_moment[i];
        for (std::size_t j = 0; j < data.size(); ++j) {
            const double g = grad[j];
            m[j] = state.beta1 * m[j] + (1.0 - state.beta1) * g;
            v[j] = state.beta2 * v[j] + (1.0 - state.beta2) * g * g;
            const double m_hat = m[j] / correction1;
            const double v_hat = v[j] / correction2;
            data[j] = static_cast<T>(data[j] - state.learning_rate * m_hat / (std::sqrt(v_hat) + state.epsilon));
        }
        p.zero_grad();
    }
}

} // namespace nps::ad
