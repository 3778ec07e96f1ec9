#include "hypermae/synthetic.hpp"

#include "hypermae/errors.hpp"
#include "hypermae/rng.hpp"

#include <algorithm>
#include <cmath>

namespace hypermae {

namespace {

// Stream tags for derive_seed; fixed so regenerated data matches.
constexpr std::uint64_t kBaseStream = 1;
constexpr std::uint64_t kTileStream = 2;
constexpr std::uint64_t kNoiseStream = 3;
constexpr std::uint64_t kCommonStream = 4;

std::vector<double> smooth_field(std::uint64_t seed, std::size_t size, std::size_t radius) {
    rng::Xoshiro256 gen(seed);
    std::vector<double> f(size * size);
    for (auto& v : f) v = gen.uniform();
    box_blur(f, size, size, radius);
    const auto [lo, hi] = std::minmax_element(f.begin(), f.end());
    const double l = *lo;
    const double span = *hi - *lo;
    for (auto& v : f) v = span > 0.0 ? (v - l) / span : 0.5;
    return f;
}

} // namespace

void SyntheticSpec::validate() const {
    if (planted_groups < 2) throw ConfigError("/planted_groups", "at least two planted groups are required");
    if (channels < planted_groups) throw ConfigError("/channels", "channels must be >= planted groups");
    if (truth.size() != channels) throw ConfigError("/truth", "truth must assign every band");
    std::vector<bool> used(planted_groups, false);
    for (auto g : truth) {
        if (g >= planted_groups) throw ConfigError("/truth", "truth refers to an unknown group");
        used[g] = true;
    }
    if (std::find(used.begin(), used.end(), false) != used.end())
        throw ConfigError("/truth", "every planted group needs at least one band");
    if (profiles.size() != planted_groups) throw ConfigError("/profiles", "one profile per planted group is required");
    for (const auto& p : profiles) {
        if (p.size() != channels) throw ConfigError("/profiles", "profile length must equal the channel count");
        for (double v : p)
            if (!(v >= 0.0)) throw ConfigError("/profiles", "profiles must be nonnegative");
    }
    if (!(noise_sigma >= 0.0)) throw ConfigError("/noise_sigma", "noise_sigma must be >= 0");
    if (!field_exponents.empty() && field_exponents.size() != planted_groups)
        throw ConfigError("/field_exponents", "one exponent per planted group is required");
    for (double e : field_exponents)
        if (!(e > 0.0)) throw ConfigError("/field_exponents", "exponents must be positive");
    if (!(shared_fraction >= 0.0 && shared_fraction <= 1.0))
        throw ConfigError("/shared_fraction", "shared_fraction must lie in [0, 1]");
    if (!(common_fraction >= 0.0 && common_fraction <= 1.0))
        throw ConfigError("/common_fraction", "common_fraction must lie in [0, 1]");
    if (wavelengths && wavelengths->size() != channels)
        throw ConfigError("/wavelengths", "wavelength count must equal the channel count");
}

SyntheticSpec make_planted_spec(std::size_t channels, std::size_t groups, std::size_t smoothness, double noise_sigma,
                                double leak, double common_fraction) {
    SyntheticSpec spec;
    spec.common_fraction = common_fraction;
    spec.planted_groups = groups;
    spec.channels = channels;
    spec.field_smoothness = smoothness;
    spec.noise_sigma = noise_sigma;
    spec.truth.resize(channels);
    for (std::size_t b = 0; b < channels; ++b) spec.truth[b] = groups ? b * groups / channels : 0;

    spec.profiles.assign(groups, std::vector<double>(channels, 0.0));
    for (std::size_t g = 0; g < groups; ++g) {
        for (std::size_t b = 0; b < channels; ++b) {
            if (spec.truth[b] == g) {
                spec.profiles[g][b] = 1.0;
                continue;
            }
            double nearest = static_cast<double>(channels);
            for (std::size_t o = 0; o < channels; ++o)
                if (spec.truth[o] == g)
                    nearest = std::min(nearest, std::abs(static_cast<double>(o) - static_cast<double>(b)));
            spec.profiles[g][b] = leak * std::exp(-0.5 * nearest * nearest);
        }
    }

    spec.field_exponents.resize(groups);
    for (std::size_t g = 0; g < groups; ++g)
        spec.field_exponents[g] =
            groups > 1 ? 0.5 * std::pow(6.4, static_cast<double>(g) / static_cast<double>(groups - 1)) : 1.0;

    std::vector<float> wl(channels);
    for (std::size_t b = 0; b < channels; ++b)
        wl[b] = channels > 1 ? static_cast<float>(420.0 + 2030.0 * static_cast<double>(b) / static_cast<double>(channels - 1))
                             : 420.0f;
    spec.wavelengths = std::move(wl);
    return spec;
}

void box_blur(std::vector<double>& image, std::size_t height, std::size_t width, std::size_t radius, int passes) {
    if (radius == 0) return;
    const auto r = static_cast<std::ptrdiff_t>(radius);
    const double norm = 1.0 / static_cast<double>(2 * radius + 1);
    std::vector<double> tmp(image.size());
    auto clamp = [](std::ptrdiff_t i, std::size_t n) {
        return static_cast<std::size_t>(std::clamp<std::ptrdiff_t>(i, 0, static_cast<std::ptrdiff_t>(n) - 1));
    };
    for (int p = 0; p < passes; ++p) {
        for (std::size_t y = 0; y < height; ++y)
            for (std::size_t x = 0; x < width; ++x) {
                double s = 0.0;
                for (std::ptrdiff_t d = -r; d <= r; ++d)
                    s += image[y * width + clamp(static_cast<std::ptrdiff_t>(x) + d, width)];
                tmp[y * width + x] = s * norm;
            }
        for (std::size_t y = 0; y < height; ++y)
            for (std::size_t x = 0; x < width; ++x) {
                double s = 0.0;
                for (std::ptrdiff_t d = -r; d <= r; ++d)
                    s += tmp[clamp(static_cast<std::ptrdiff_t>(y) + d, height) * width + x];
                image[y * width + x] = s * norm;
            }
    }
}

SyntheticData generate_synthetic(const SyntheticSpec& spec, std::size_t tiles, std::size_t size, std::uint64_t seed,
                                 std::size_t val_tiles) {
    spec.validate();
    if (tiles == 0) throw ConfigError("/tiles", "at least one train tile is required");
    if (size == 0) throw ConfigError("/size", "tile size must be positive");

    const std::size_t K = spec.planted_groups;
    const std::size_t plane = size * size;
    std::vector<std::vector<double>> base(K);
    if (!spec.constant_fields)
        for (std::size_t g = 0; g < K; ++g)
            base[g] = smooth_field(rng::derive_seed(seed, {kBaseStream, g}), size, spec.field_smoothness);

    auto make_tile = [&](std::size_t t) {
        std::vector<std::vector<double>> weight(K, std::vector<double>(plane, 1.0));
        if (!spec.constant_fields) {
            std::vector<double> common(plane, 0.0);
            if (spec.common_fraction > 0.0)
                common = smooth_field(rng::derive_seed(seed, {kCommonStream, t}), size, spec.field_smoothness);
            const double k = spec.common_fraction;
            for (std::size_t g = 0; g < K; ++g) {
                const auto own = smooth_field(rng::derive_seed(seed, {kTileStream, t, g}), size, spec.field_smoothness);
                const double e = spec.field_exponents.empty() ? 1.0 : spec.field_exponents[g];
                for (std::size_t i = 0; i < plane; ++i) {
                    const double field = spec.shared_fraction * base[g][i] + (1.0 - spec.shared_fraction) * own[i];
                    weight[g][i] = std::pow((1.0 - k) * field + k * common[i], e);
                }
            }
        }
        rng::Xoshiro256 noise(rng::derive_seed(seed, {kNoiseStream, t}));
        HyperCube cube(CubeShape{size, size, spec.channels});
        cube.wavelengths = spec.wavelengths;
        for (std::size_t c = 0; c < spec.channels; ++c) {
            float* band = cube.data.data() + c * plane;
            for (std::size_t i = 0; i < plane; ++i) {
                double v = 0.0;
                for (std::size_t g = 0; g < K; ++g) v += weight[g][i] * spec.profiles[g][c];
                if (spec.noise_sigma > 0.0) v += spec.noise_sigma * noise.normal();
                band[i] = static_cast<float>(v);
            }
        }
        return cube;
    };

    SyntheticData out;
    out.truth = spec.truth;
    Dataset train;
    train.split = Split::Train;
    for (std::size_t t = 0; t < tiles; ++t) train.tiles.push_back(make_tile(t));
    Dataset val;
    val.split = Split::Val;
    for (std::size_t t = 0; t < val_tiles; ++t) val.tiles.push_back(make_tile(tiles + t));

    if (spec.normalize) {
        out.train = normalize_dataset(train);
        out.val = apply_normalization(val, out.train.normalization);
    } else {
        out.train = std::move(train);
        out.val = std::move(val);
    }
    return out;
}

} // namespace hypermae
