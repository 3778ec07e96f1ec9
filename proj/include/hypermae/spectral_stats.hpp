#pragma once

#include "hypermae/dataset.hpp"

#include <cstddef>
#include <filesystem>
#include <optional>
#include <span>
#include <vector>

namespace hypermae {

/// Stabilizer used by the SCI ratio and spectral normalizations.
inline constexpr double kSpectralEpsilon = 1e-8;

/// Descriptors of one channel pooled over the train split.
struct ChannelDescriptor {
    double min = 0.0;
    double max = 0.0;
    double mean = 0.0;
    double std = 0.0;  ///< population
    double dynamic_range = 0.0;
    double coeff_variation = 0.0;   ///< std / mean, 0 when |mean| < epsilon
    double self_correlation = 0.0;  ///< mean of lag-1 x and y Pearson correlations
    bool degenerate = false;        ///< some tile had an undefined lag correlation
};

using ChannelStats = std::vector<ChannelDescriptor>;

ChannelStats compute_channel_stats(const Dataset& ds);

/// Pearson correlation between an image and itself shifted by (dx, dy) over the
/// overlap. Returns nullopt when either side has zero variance.
std::optional<double> lag_correlation(std::span<const float> image, std::size_t height, std::size_t width,
                                      std::size_t dx, std::size_t dy);

/// A single-channel image, row-major.
struct Image {
    std::size_t height = 0;
    std::size_t width = 0;
    std::vector<double> values;
};

/// Per channel, the pixelwise mean over every tile of the dataset.
struct MeanReflectanceStack {
    std::vector<Image> bands;
};

MeanReflectanceStack mean_reflectance(const Dataset& ds);

/// Per-pixel 1 - |a-b| / (a+b+eps).
Image sci_map(const Image& a, const Image& b, double epsilon = kSpectralEpsilon);

/// mean(map) * (1 - std(map)), population std.
double sci_prod(const Image& map);

/// Symmetric C x C matrix of pairwise sci_prod scores, row-major.
struct SciMatrix {
    std::size_t size = 0;
    std::vector<double> values;
    double epsilon = kSpectralEpsilon;

    double operator()(std::size_t i, std::size_t j) const { return values[i * size + j]; }
};

SciMatrix sci_matrix(const MeanReflectanceStack& stack, double epsilon = kSpectralEpsilon);

/// C rows of C comma-separated values with 9 significant digits.
void write_sci_csv(const SciMatrix& m, const std::filesystem::path& path);

} // namespace hypermae
