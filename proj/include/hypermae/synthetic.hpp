#pragma once

#include "hypermae/dataset.hpp"

#include <cstdint>
#include <optional>
#include <vector>

namespace hypermae {

/// Recipe for synthetic cubes with a planted band-to-group structure.
///
/// Every pixel spectrum is a nonnegative mixture of `planted_groups` spectral
/// profiles weighted by smooth spatial fields, plus Gaussian noise. Bands of
/// group g take their signal mostly from profile g, so the group structure is
/// recoverable from the data.
struct SyntheticSpec {
    std::size_t planted_groups = 5;
    std::size_t channels = 12;
    std::vector<std::vector<double>> profiles;  ///< planted_groups x channels, nonnegative
    std::vector<std::size_t> truth;             ///< band -> planted group
    std::size_t field_smoothness = 4;           ///< box-blur radius in pixels
    double noise_sigma = 0.005;

    /// Per-group exponent applied to the spatial field; distinct exponents give
    /// groups distinct value distributions. Empty means 1 for every group.
    std::vector<double> field_exponents;
    /// Weight of a per-group field shared by all tiles (vs. drawn per tile).
    double shared_fraction = 0.5;
    /// Weight of a per-tile field common to every group (cross-band correlation).
    double common_fraction = 0.0;
    /// Replace every spatial field by the constant 1.
    bool constant_fields = false;
    /// Min-max normalize the output with the train-split ranges.
    bool normalize = true;
    std::optional<std::vector<float>> wavelengths;

    /// Throws ConfigError when a field is out of range.
    void validate() const;
};

/// Contiguous planted groups (band b -> floor(b*K/C)), unit profiles on their own
/// bands with a Gaussian fall-off of height `leak` elsewhere, geometrically
/// spaced field exponents, a per-tile field shared by all groups with weight
/// `common_fraction`, and wavelengths spread over 420-2450 nm.
SyntheticSpec make_planted_spec(std::size_t channels, std::size_t groups, std::size_t smoothness = 4,
                                double noise_sigma = 0.005, double leak = 0.1, double common_fraction = 0.8);

struct SyntheticData {
    Dataset train;
    Dataset val;
    std::vector<std::size_t> truth;
};

/// Deterministic for a given seed. Val tiles use tile indices after the train tiles.
SyntheticData generate_synthetic(const SyntheticSpec& spec, std::size_t tiles, std::size_t size, std::uint64_t seed,
                                 std::size_t val_tiles = 0);

/// `passes` box blurs of radius `radius` with clamp-to-edge borders, in place.
void box_blur(std::vector<double>& image, std::size_t height, std::size_t width, std::size_t radius,
              int passes = 3);

} // namespace hypermae
