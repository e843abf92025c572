#include "nps/nn/encoding.hpp"

#include <cmath>
#include <numbers>

namespace nps::nn {

std::vector<double> encode(std::span<const double> x, std::size_t levels)
{
    std::vector<double> out(x.begin(), x.end());
    out.reserve(x.size() * (1 + 2 * levels));
    for (double v : x) {
        for (std::size_t j = 0; j < levels; ++j) {
            const double freq = std::ldexp(std::numbers::pi, static_cast<int>(j));
            out.push_back(std::sin(freq * v));
            out.push_back(std::cos(freq * v));
        }
    }
    return out;
}

} // namespace nps::nn
