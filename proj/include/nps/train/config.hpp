#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace nps::train {

struct FitConfig {
    std::size_t iterations = 6000;
    std::size_t batch_images = 8;
    double learning_rate = 5e-4;
    double beta = 0.01;           // TV weight during the guidance phase
    double guidance_end = 0.5;    // fraction of iterations using shadow guidance
    std::uint64_t seed = 0;
    bool use_shadow = true;
    bool use_specular = true;
    bool use_tv = true;
    std::size_t basis_count = 9;  // k

    std::vector<std::size_t> drop_images;
    bool grayscale = false;
    bool inverse_gamma = false;

    // Pixel sub-grid per iteration: `pixel_block` x `pixel_block` blocks
    // every `pixel_stride` rows and columns from a random offset. 0 picks the
    // smallest stride whose masked sub-grid holds at most `max_batch_pixels`
    // pixels. Blocks wider than one pixel keep depth derivatives and
    // smoothness terms at one-pixel spacing.
    std::size_t pixel_stride = 0;
    std::size_t pixel_block = 2;
    std::size_t max_batch_pixels = 768;

    // Rendered shadows are recomputed from the depth net every this many
    // iterations during the second phase.
    std::size_t shadow_refresh = 100;
    int shadow_samples = 32;

    // Throws std::invalid_argument naming the offending field.
    void validate() const;

    std::size_t switch_iteration() const;
    double beta_at(std::size_t iteration) const;
    bool guidance_phase(std::size_t iteration) const { return iteration < switch_iteration(); }
};

// Plain-text "key = value" lines; '#' starts a comment. Unknown keys are errors.
FitConfig parse_config(const std::string& text, FitConfig base = {});
FitConfig load_config(const std::string& path, FitConfig base = {});
std::string to_text(const FitConfig& cfg);

} // namespace nps::train
