#include "nps/eval/metrics.hpp"

#include <Eigen/Core>
#include <Eigen/Geometry>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>

namespace nps::eval {

namespace {

// atan2 of the cross and dot products stays accurate for tiny angles, where
// acos of a float-rounded dot product does not.
double angle_deg(const float* a, const float* b)
{
    const Eigen::Vector3d u(a[0], a[1], a[2]);
    const Eigen::Vector3d v(b[0], b[1], b[2]);
    return std::atan2(u.cross(v).norm(), u.dot(v)) * 180.0 / std::numbers::pi;
}

void check_normals(std::span<const float> pred, std::span<const float> gt, std::span<const std::uint8_t> mask)
{
    if (pred.size() != gt.size() || pred.size() != 3 * mask.size())
        throw std::invalid_argument("mae: normal maps of " + std::to_string(pred.size() / 3) + " and " +
                                    std::to_string(gt.size() / 3) + " pixels with a mask of " +
                                    std::to_string(mask.size()));
}

} // namespace

double mae(std::span<const float> pred, std::span<const float> gt, std::span<const std::uint8_t> mask)
{
    check_normals(pred, gt, mask);
    double total = 0.0;
    std::size_t count = 0;
    for (std::size_t p = 0; p < mask.size(); ++p) {
        if (!mask[p])
            continue;
        total += angle_deg(&pred[3 * p], &gt[3 * p]);
        ++count;
    }
    if (count == 0)
        throw std::invalid_argument("mae: mask is empty");
    return total / static_cast<double>(count);
}

std::vector<double> angular_error_map(std::span<const float> pred, std::span<const float> gt,
                                      std::span<const std::uint8_t> mask)
{
    check_normals(pred, gt, mask);
    std::vector<double> out(mask.size(), 0.0);
    for (std::size_t p = 0; p < mask.size(); ++p)
        if (mask[p])
            out[p] = angle_deg(&pred[3 * p], &gt[3 * p]);
    return out;
}

double psnr(std::span<const float> pred, std::span<const float> gt, std::span<const std::uint8_t> mask,
            std::size_t channels)
{
    if (channels == 0 || pred.size() != gt.size() || pred.size() != mask.size() * channels)
        throw std::invalid_argument("psnr: image sizes do not match");
    double peak = 0.0, sq = 0.0;
    std::size_t count = 0;
    for (std::size_t p = 0; p < mask.size(); ++p) {
        if (!mask[p])
            continue;
        for (std::size_t c = 0; c < channels; ++c) {
            const double g = gt[p * channels + c];
            const double e = double(pred[p * channels + c]) - g;
            peak = std::max(peak, g);
            sq += e * e;
            ++count;
        }
    }
    if (count == 0)
        throw std::invalid_argument("psnr: mask is empty");
    if (sq == 0.0)
        return psnr_identical;
    if (peak <= 0.0)
        throw std::invalid_argument("psnr: ground truth has no positive value under the mask");
    return 10.0 * std::log10(peak * peak / (sq / static_cast<double>(count)));
}

double mean_psnr(std::span<const double> values)
{
    double total = 0.0;
    std::size_t count = 0;
    for (double v : values) {
        if (std::isfinite(v)) {
            total += v;
            ++count;
        }
    }
    return count == 0 ? psnr_identical : total / static_cast<double>(count);
}

} // namespace nps::eval
