#pragma once

#include <cstdint>
#include <limits>
#include <span>
#include <vector>

namespace nps::eval {

struct Metrics {
    double mae_deg = 0.0;
    std::vector<double> psnr_db;  // per image
    double psnr_mean_db = 0.0;
    double runtime_s = 0.0;
};

// Returned by psnr() when the masked error is exactly zero.
inline constexpr double psnr_identical = std::numeric_limits<double>::infinity();

// Mean angle in degrees between unit normals ([pixel][3]) over the mask.
// Throws std::invalid_argument on an empty mask or mismatched sizes.
double mae(std::span<const float> pred, std::span<const float> gt, std::span<const std::uint8_t> mask);

// Angle per pixel in degrees; zero outside the mask.
std::vector<double> angular_error_map(std::span<const float> pred, std::span<const float> gt,
                                      std::span<const std::uint8_t> mask);

// 10 log10(peak^2 / MSE) over masked pixels of [pixel][channel] images, with
// peak the largest masked ground-truth value.
double psnr(std::span<const float> pred, std::span<const float> gt, std::span<const std::uint8_t> mask,
            std::size_t channels);

// Mean over finite entries; +inf when every entry is +inf.
double mean_psnr(std::span<const double> values);

} // namespace nps::eval
