#include "hypermae/spectral_stats.hpp"

#include "hypermae/errors.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>

namespace hypermae {

std::optional<double> lag_correlation(std::span<const float> image, std::size_t height, std::size_t width,
                                      std::size_t dx, std::size_t dy) {
    if (dx >= width || dy >= height) return std::nullopt;
    const std::size_t h = height - dy;
    const std::size_t w = width - dx;
    const double n = static_cast<double>(h * w);
    double sa = 0.0, sb = 0.0;
    for (std::size_t y = 0; y < h; ++y)
        for (std::size_t x = 0; x < w; ++x) {
            sa += image[y * width + x];
            sb += image[(y + dy) * width + x + dx];
        }
    const double ma = sa / n, mb = sb / n;
    double vaa = 0.0, vbb = 0.0, vab = 0.0;
    for (std::size_t y = 0; y < h; ++y)
        for (std::size_t x = 0; x < w; ++x) {
            const double a = image[y * width + x] - ma;
            const double b = image[(y + dy) * width + x + dx] - mb;
            vaa += a * a;
            vbb += b * b;
            vab += a * b;
        }
    if (vaa <= 0.0 || vbb <= 0.0) return std::nullopt;
    return std::clamp(vab / std::sqrt(vaa * vbb), -1.0, 1.0);
}

ChannelStats compute_channel_stats(const Dataset& ds) {
    ds.validate();
    if (ds.empty()) throw ShapeError("channel statistics need at least one tile");
    const auto shape = ds.shape();
    ChannelStats stats(shape.channels);
    const double count = static_cast<double>(shape.plane() * ds.tiles.size());

    for (std::size_t c = 0; c < shape.channels; ++c) {
        auto& d = stats[c];
        double lo = std::numeric_limits<double>::infinity();
        double hi = -lo;
        double sum = 0.0;
        for (const auto& t : ds.tiles)
            for (float v : t.band(c)) {
                lo = std::min(lo, static_cast<double>(v));
                hi = std::max(hi, static_cast<double>(v));
                sum += v;
            }
        d.min = lo;
        d.max = hi;
        d.mean = sum / count;
        double ss = 0.0;
        for (const auto& t : ds.tiles)
            for (float v : t.band(c)) ss += (v - d.mean) * (v - d.mean);
        d.std = std::sqrt(ss / count);
        d.dynamic_range = hi - lo;
        d.coeff_variation = std::abs(d.mean) < kSpectralEpsilon ? 0.0 : d.std / d.mean;

        double corr = 0.0;
        for (const auto& t : ds.tiles) {
            const auto band = t.band(c);
            const auto cx = lag_correlation(band, shape.height, shape.width, 1, 0);
            const auto cy = lag_correlation(band, shape.height, shape.width, 0, 1);
            if (!cx || !cy) d.degenerate = true;
            corr += 0.5 * (cx.value_or(0.0) + cy.value_or(0.0));
        }
        d.self_correlation = corr / static_cast<double>(ds.tiles.size());
    }
    return stats;
}

MeanReflectanceStack mean_reflectance(const Dataset& ds) {
    ds.validate();
    if (ds.empty()) throw ShapeError("mean reflectance needs at least one tile");
    const auto shape = ds.shape();
    MeanReflectanceStack stack;
    stack.bands.assign(shape.channels, Image{shape.height, shape.width, std::vector<double>(shape.plane(), 0.0)});
    for (const auto& t : ds.tiles)
        for (std::size_t c = 0; c < shape.channels; ++c) {
            auto& acc = stack.bands[c].values;
            const auto band = t.band(c);
            for (std::size_t i = 0; i < acc.size(); ++i) acc[i] += band[i];
        }
    const double n = static_cast<double>(ds.tiles.size());
    for (auto& b : stack.bands)
        for (auto& v : b.values) v /= n;
    return stack;
}

Image sci_map(const Image& a, const Image& b, double epsilon) {
    if (a.height != b.height || a.width != b.width || a.values.size() != b.values.size())
        throw ShapeError("sci_map inputs differ in shape");
    Image out{a.height, a.width, std::vector<double>(a.values.size())};
    for (std::size_t i = 0; i < a.values.size(); ++i) {
        const double x = a.values[i], y = b.values[i];
        out.values[i] = 1.0 - std::abs(x - y) / (x + y + epsilon);
    }
    return out;
}

double sci_prod(const Image& map) {
    if (map.values.empty()) throw ShapeError("sci_prod of an empty map");
    const double n = static_cast<double>(map.values.size());
    double sum = 0.0;
    for (double v : map.values) sum += v;
    const double mean = sum / n;
    double ss = 0.0;
    for (double v : map.values) ss += (v - mean) * (v - mean);
    const double sigma = std::sqrt(ss / n);
    return mean * (1.0 - sigma);
}

SciMatrix sci_matrix(const MeanReflectanceStack& stack, double epsilon) {
    if (stack.bands.empty()) throw ShapeError("sci_matrix needs at least one band");
    const std::size_t C = stack.bands.size();
    SciMatrix m{C, std::vector<double>(C * C, 0.0), epsilon};
    for (std::size_t i = 0; i < C; ++i)
        for (std::size_t j = i; j < C; ++j) {
            const double s = sci_prod(sci_map(stack.bands[i], stack.bands[j], epsilon));
            m.values[i * C + j] = s;
            m.values[j * C + i] = s;
        }
    return m;
}

void write_sci_csv(const SciMatrix& m, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write " + path.string());
    char buf[64];
    for (std::size_t i = 0; i < m.size; ++i) {
        for (std::size_t j = 0; j < m.size; ++j) {
            std::snprintf(buf, sizeof buf, "%.9g", m(i, j));
            out << (j ? "," : "") << buf;
        }
        out << '\n';
    }
}

} // namespace hypermae
