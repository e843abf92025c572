#include "nps/render/guidance.hpp"

namespace nps::render {

std::vector<std::uint8_t> shadow_guidance_mask(const io::ObservationStack& stack, double threshold)
{
    const auto n = stack.count();
    const auto pixels = stack.pixels();
    const auto channels = stack.channels;

    std::vector<double> level(n * pixels);
    std::vector<double> mean(pixels, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        const auto img = stack.image(i);
        for (std::size_t p = 0; p < pixels; ++p) {
            double s = 0.0;
            for (std::size_t c = 0; c < channels; ++c)
                s += img[p * channels + c];
            level[i * pixels + p] = s / static_cast<double>(channels);
            mean[p] += level[i * pixels + p] / static_cast<double>(n);
        }
    }

    std::vector<std::uint8_t> out(n * pixels, 1);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t p = 0; p < pixels; ++p)
            if (level[i * pixels + p] < threshold * mean[p])
                out[i * pixels + p] = 0;
    return out;
}

} // namespace nps::render
