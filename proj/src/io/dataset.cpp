#include "nps/io/dataset.hpp"

#include "nps/io/image_io.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <set>
#include <sstream>
#include <stdexcept>

namespace nps::io {

namespace fs = std::filesystem;

namespace {

std::vector<std::vector<double>> read_rows(const fs::path& path)
{
    std::ifstream in(path);
    if (!in)
        throw std::runtime_error("dataset: missing " + path.string());
    std::vector<std::vector<double>> rows;
    std::string line;
    while (std::getline(in, line)) {
        std::istringstream ls(line);
        std::vector<double> row;
        double v = 0.0;
        while (ls >> v)
            row.push_back(v);
        if (!row.empty())
            rows.push_back(std::move(row));
    }
    return rows;
}

bool is_auxiliary(const std::string& name)
{
    for (const char* prefix : {"mask", "normal", "depth", "shadow"})
        if (name.starts_with(prefix))
            return true;
    return false;
}

std::vector<std::string> image_names(const fs::path& dir)
{
    std::vector<std::string> names;
    if (fs::exists(dir / "filenames.txt")) {
        std::ifstream in(dir / "filenames.txt");
        std::string line;
        while (std::getline(in, line)) {
            line.erase(line.find_last_not_of(" \t\r\n") + 1);
            if (!line.empty())
                names.push_back(line);
        }
        return names;
    }
    for (const auto& entry : fs::directory_iterator(dir)) {
        const auto name = entry.path().filename().string();
        if (entry.path().extension() == ".png" && !is_auxiliary(name))
            names.push_back(name);
    }
    std::sort(names.begin(), names.end());
    return names;
}

} // namespace

ObservationStack load_dataset(const fs::path& dir, const LoadOptions& options)
{
    const auto names = image_names(dir);
    const auto directions = read_rows(dir / "light_directions.txt");
    const auto intensities = read_rows(dir / "light_intensities.txt");
    if (names.size() != directions.size())
        throw std::runtime_error("dataset: " + std::to_string(names.size()) + " images but " +
                                 std::to_string(directions.size()) + " light directions");
    if (intensities.size() != directions.size())
        throw std::runtime_error("dataset: " + std::to_string(intensities.size()) +
                                 " light intensity rows but " + std::to_string(directions.size()) +
                                 " light directions");
    if (names.empty())
        throw std::runtime_error("dataset: no images in " + dir.string());

    ObservationStack stack;
    for (std::size_t i = 0; i < names.size(); ++i) {
        const auto& d = directions[i];
        if (d.size() != 3)
            throw std::runtime_error("dataset: light direction row " + std::to_string(i + 1) +
                                     " does not have 3 values");
        render::Vec3 dir_vec(d[0], d[1], d[2]);
        const double norm = dir_vec.norm();
        if (!(norm > 0.0))
            throw std::runtime_error("dataset: zero light direction on row " + std::to_string(i + 1));
        if (std::abs(norm - 1.0) > 1e-3)
            std::cerr << "warning: light direction row " << i + 1 << " has norm " << norm
                      << "; normalizing\n";
        render::Light light;
        light.direction = render::to_internal(dir_vec / norm);
        light.intensity = intensities[i];
        if (light.intensity.size() != 1 && light.intensity.size() != 3)
            throw std::runtime_error("dataset: light intensity row " + std::to_string(i + 1) +
                                     " must have 1 or 3 values");
        light.validate();

        const auto img = read_image(dir / names[i], options.inverse_gamma);
        if (i == 0) {
            stack.height = img.height;
            stack.width = img.width;
            stack.channels = img.channels;
        } else if (img.height != stack.height || img.width != stack.width || img.channels != stack.channels) {
            throw std::runtime_error("dataset: image " + names[i] + " differs in size or channels");
        }
        for (std::size_t p = 0; p < img.height * img.width; ++p)
            for (std::size_t c = 0; c < img.channels; ++c) {
                const double li = light.intensity.size() == 1 ? light.intensity[0]
                                                               : light.intensity[std::min<std::size_t>(c, 2)];
                stack.images.push_back(static_cast<float>(img.data[p * img.channels + c] / li));
            }
        stack.lights.push_back(std::move(light));
        stack.names.push_back(names[i]);
    }

    if (fs::exists(dir / "mask.png")) {
        const auto m = read_image(dir / "mask.png");
        if (m.height != stack.height || m.width != stack.width)
            throw std::runtime_error("dataset: mask size differs from images");
        stack.mask.resize(stack.pixels());
        for (std::size_t p = 0; p < stack.pixels(); ++p) {
            float v = 0.0f;
            for (std::size_t c = 0; c < m.channels; ++c)
                v = std::max(v, m.data[p * m.channels + c]);
            stack.mask[p] = v > 0.5f ? 1 : 0;
        }
    } else {
        stack.mask.assign(stack.pixels(), 1);
    }

    if (!options.drop_images.empty()) {
        const std::set<std::size_t> drop(options.drop_images.begin(), options.drop_images.end());
        ObservationStack kept = stack;
        kept.images.clear();
        kept.lights.clear();
        kept.names.clear();
        for (std::size_t i = 0; i < stack.count(); ++i) {
            if (drop.count(i))
                continue;
            const auto img = stack.image(i);
            kept.images.insert(kept.images.end(), img.begin(), img.end());
            kept.lights.push_back(stack.lights[i]);
            kept.names.push_back(stack.names[i]);
        }
        stack = std::move(kept);
    }

    if (options.grayscale && stack.channels > 1) {
        std::vector<float> gray(stack.count() * stack.pixels());
        for (std::size_t j = 0; j < gray.size(); ++j) {
            double s = 0.0;
            for (std::size_t c = 0; c < stack.channels; ++c)
                s += stack.images[j * stack.channels + c];
            gray[j] = static_cast<float>(s / static_cast<double>(stack.channels));
        }
        stack.images = std::move(gray);
        stack.channels = 1;
    }

    stack.validate();
    return stack;
}

void save_dataset(const fs::path& dir, const ObservationStack& stack)
{
    stack.validate();
    fs::create_directories(dir);
    std::ofstream names(dir / "filenames.txt");
    std::ofstream directions(dir / "light_directions.txt");
    std::ofstream intensities(dir / "light_intensities.txt");
    directions << std::setprecision(17);
    intensities << std::setprecision(17);

    for (std::size_t i = 0; i < stack.count(); ++i) {
        char name[32];
        std::snprintf(name, sizeof(name), "img_%03zu.png", i);
        names << name << '\n';

        const auto& light = stack.lights[i];
        const auto d = render::to_dataset(light.direction);
        directions << d.x() << ' ' << d.y() << ' ' << d.z() << '\n';
        for (std::size_t k = 0; k < light.intensity.size(); ++k)
            intensities << (k ? " " : "") << light.intensity[k];
        intensities << '\n';

        Image img{stack.height, stack.width, stack.channels, {}};
        const auto src = stack.image(i);
        img.data.resize(src.size());
        for (std::size_t j = 0; j < src.size(); ++j) {
            const auto c = j % stack.channels;
            const double li = light.intensity.size() == 1 ? light.intensity[0]
                                                           : light.intensity[std::min<std::size_t>(c, 2)];
            img.data[j] = static_cast<float>(src[j] * li);
        }
        write_png(dir / name, img, 16);
    }

    Image mask{stack.height, stack.width, 1, {}};
    mask.data.assign(stack.mask.begin(), stack.mask.end());
    write_png(dir / "mask.png", mask, 8);
    if (!names || !directions || !intensities)
        throw std::runtime_error("failed writing dataset to " + dir.string());
}

} // namespace nps::io
