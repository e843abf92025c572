#include "nps/train/config.hpp"

#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace nps::train {

void FitConfig::validate() const
{
    auto fail = [](const std::string& msg) { throw std::invalid_argument("config: " + msg); };
    if (iterations == 0)
        fail("iterations must be positive");
    if (batch_images == 0)
        fail("batch_images must be positive");
    if (!(learning_rate > 0.0))
        fail("learning_rate must be positive");
    if (!(beta >= 0.0))
        fail("beta must be nonnegative");
    if (!(guidance_end > 0.0 && guidance_end <= 1.0))
        fail("guidance_end must lie in (0, 1]");
    if (basis_count == 0)
        fail("k must be positive");
    if (pixel_block == 0)
        fail("pixel_block must be positive");
    if (pixel_stride != 0 && pixel_stride < pixel_block)
        fail("pixel_stride must be at least pixel_block");
    if (max_batch_pixels == 0)
        fail("max_batch_pixels must be positive");
    if (shadow_refresh == 0)
        fail("shadow_refresh must be positive");
    if (shadow_samples < 2)
        fail("shadow_samples must be at least 2");
}

std::size_t FitConfig::switch_iteration() const
{
    return static_cast<std::size_t>(std::ceil(guidance_end * static_cast<double>(iterations)));
}

double FitConfig::beta_at(std::size_t iteration) const
{
    return use_tv && guidance_phase(iteration) ? beta : 0.0;
}

namespace {

bool parse_bool(const std::string& key, const std::string& v)
{
    if (v == "true" || v == "1" || v == "yes")
        return true;
    if (v == "false" || v == "0" || v == "no")
        return false;
    throw std::invalid_argument("config: " + key + " expects a boolean, got '" + v + "'");
}

std::vector<std::size_t> parse_list(const std::string& v)
{
    std::vector<std::size_t> out;
    std::istringstream is(v);
    std::string item;
    while (std::getline(is, item, ',')) {
        if (item.find_first_not_of(" \t") == std::string::npos)
            continue;
        // drop_images accepts ranges like 0-19.
        const auto dash = item.find('-');
        if (dash != std::string::npos) {
            const auto lo = std::stoul(item.substr(0, dash));
            const auto hi = std::stoul(item.substr(dash + 1));
            for (auto i = lo; i <= hi; ++i)
                out.push_back(i);
        } else {
            out.push_back(std::stoul(item));
        }
    }
    return out;
}

std::string trim(const std::string& s)
{
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos)
        return {};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

} // namespace

FitConfig parse_config(const std::string& text, FitConfig cfg)
{
    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (const auto hash = line.find('#'); hash != std::string::npos)
            line.erase(hash);
        line = trim(line);
        if (line.empty())
            continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw std::invalid_argument("config line " + std::to_string(lineno) + ": expected key = value");
        const auto key = trim(line.substr(0, eq));
        const auto value = trim(line.substr(eq + 1));
        try {
            if (key == "iterations") cfg.iterations = std::stoul(value);
            else if (key == "batch_images") cfg.batch_images = std::stoul(value);
            else if (key == "learning_rate") cfg.learning_rate = std::stod(value);
            else if (key == "beta") cfg.beta = std::stod(value);
            else if (key == "guidance_end") cfg.guidance_end = std::stod(value);
            else if (key == "seed") cfg.seed = std::stoull(value);
            else if (key == "use_shadow") cfg.use_shadow = parse_bool(key, value);
            else if (key == "use_specular") cfg.use_specular = parse_bool(key, value);
            else if (key == "use_tv") cfg.use_tv = parse_bool(key, value);
            else if (key == "k") cfg.basis_count = std::stoul(value);
            else if (key == "drop_images") cfg.drop_images = parse_list(value);
            else if (key == "grayscale") cfg.grayscale = parse_bool(key, value);
            else if (key == "inverse_gamma") cfg.inverse_gamma = parse_bool(key, value);
            else if (key == "pixel_stride") cfg.pixel_stride = std::stoul(value);
            else if (key == "pixel_block") cfg.pixel_block = std::stoul(value);
            else if (key == "max_batch_pixels") cfg.max_batch_pixels = std::stoul(value);
            else if (key == "shadow_refresh") cfg.shadow_refresh = std::stoul(value);
            else if (key == "shadow_samples") cfg.shadow_samples = std::stoi(value);
            else throw std::invalid_argument("config line " + std::to_string(lineno) + ": unknown key '" + key + "'");
        } catch (const std::logic_error& e) {
            if (dynamic_cast<const std::invalid_argument*>(&e) && std::string(e.what()).starts_with("config"))
                throw;
            throw std::invalid_argument("config line " + std::to_string(lineno) + ": bad value for " + key);
        }
    }
    cfg.validate();
    return cfg;
}

FitConfig load_config(const std::string& path, FitConfig base)
{
    std::ifstream in(path);
    if (!in)
        throw std::invalid_argument("config: cannot read " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_config(ss.str(), std::move(base));
}

std::string to_text(const FitConfig& cfg)
{
    std::ostringstream os;
    os.precision(17);
    auto b = [](bool v) { return v ? "true" : "false"; };
    os << "iterations = " << cfg.iterations << '\n'
       << "batch_images = " << cfg.batch_images << '\n'
       << "learning_rate = " << cfg.learning_rate << '\n'
       << "beta = " << cfg.beta << '\n'
       << "guidance_end = " << cfg.guidance_end << '\n'
       << "seed = " << cfg.seed << '\n'
       << "use_shadow = " << b(cfg.use_shadow) << '\n'
       << "use_specular = " << b(cfg.use_specular) << '\n'
       << "use_tv = " << b(cfg.use_tv) << '\n'
       << "k = " << cfg.basis_count << '\n'
       << "drop_images = ";
    for (std::size_t i = 0; i < cfg.drop_images.size(); ++i)
        os << (i ? "," : "") << cfg.drop_images[i];
    os << '\n'
       << "grayscale = " << b(cfg.grayscale) << '\n'
       << "inverse_gamma = " << b(cfg.inverse_gamma) << '\n'
       << "pixel_stride = " << cfg.pixel_stride << '\n'
       << "pixel_block = " << cfg.pixel_block << '\n'
       << "max_batch_pixels = " << cfg.max_batch_pixels << '\n'
       << "shadow_refresh = " << cfg.shadow_refresh << '\n'
       << "shadow_samples = " << cfg.shadow_samples << '\n';
    return os.str();
}

} // namespace nps::train
