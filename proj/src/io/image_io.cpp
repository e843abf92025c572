#include "nps/io/image_io.hpp"

#include <opencv2/core.hpp>
#include <opencv2/imgcodecs.hpp>

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace nps::io {

Image read_image(const std::filesystem::path& path, bool inverse_gamma)
{
    const cv::Mat mat = cv::imread(path.string(), cv::IMREAD_UNCHANGED);
    if (mat.empty())
        throw std::runtime_error("cannot read image " + path.string());

    double scale = 0.0;
    switch (mat.depth()) {
    case CV_8U: scale = 1.0 / 255.0; break;
    case CV_16U: scale = 1.0 / 65535.0; break;
    default: throw std::runtime_error("unsupported bit depth in " + path.string());
    }

    const int src_channels = mat.channels();
    Image img;
    img.height = static_cast<std::size_t>(mat.rows);
    img.width = static_cast<std::size_t>(mat.cols);
    img.channels = src_channels >= 3 ? 3 : 1;
    img.data.resize(img.height * img.width * img.channels);

    for (int r = 0; r < mat.rows; ++r) {
        for (int c = 0; c < mat.cols; ++c) {
            for (std::size_t k = 0; k < img.channels; ++k) {
                // OpenCV stores BGR(A); flip to RGB.
                const int src = img.channels == 3 ? 2 - static_cast<int>(k) : 0;
                double v = mat.depth() == CV_8U
                               ? mat.ptr<std::uint8_t>(r)[c * src_channels + src] * scale
                               : mat.ptr<std::uint16_t>(r)[c * src_channels + src] * scale;
                if (inverse_gamma)
                    v = std::pow(v, 2.2);
                img.data[(static_cast<std::size_t>(r) * img.width + c) * img.channels + k] =
                    static_cast<float>(v);
            }
        }
    }
    return img;
}

void write_png(const std::filesystem::path& path, const Image& image, int bit_depth)
{
    if (image.channels != 1 && image.channels != 3)
        throw std::invalid_argument("write_png: only 1 or 3 channels are supported");
    if (bit_depth != 8 && bit_depth != 16)
        throw std::invalid_argument("write_png: bit depth must be 8 or 16");
    const int type = bit_depth == 8 ? CV_MAKETYPE(CV_8U, static_cast<int>(image.channels))
                                    : CV_MAKETYPE(CV_16U, static_cast<int>(image.channels));
    cv::Mat mat(static_cast<int>(image.height), static_cast<int>(image.width), type);
    const double peak = bit_depth == 8 ? 255.0 : 65535.0;
    for (std::size_t r = 0; r < image.height; ++r) {
        for (std::size_t c = 0; c < image.width; ++c) {
            for (std::size_t k = 0; k < image.channels; ++k) {
                const auto dst = image.channels == 3 ? 2 - k : 0;
                const double v = std::clamp<double>(image.data[(r * image.width + c) * image.channels + k], 0.0, 1.0);
                const auto q = std::lround(v * peak);
                if (bit_depth == 8)
                    mat.ptr<std::uint8_t>(static_cast<int>(r))[c * image.channels + dst] = static_cast<std::uint8_t>(q);
                else
                    mat.ptr<std::uint16_t>(static_cast<int>(r))[c * image.channels + dst] = static_cast<std::uint16_t>(q);
            }
        }
    }
    if (!cv::imwrite(path.string(), mat))
        throw std::runtime_error("cannot write image " + path.string());
}

float quantize16(float v)
{
    const double q = static_cast<double>(std::lround(std::clamp<double>(v, 0.0, 1.0) * 65535.0));
    return static_cast<float>(q * (1.0 / 65535.0));
}

} // namespace nps::io
