#pragma once

#include "hypermae/spectral_stats.hpp"

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace hypermae {

enum class Strategy { Sci, KMeans, Hac, VnirSwir, SoilReflectance };

std::string_view to_string(Strategy s) noexcept;
/// Accepts the canonical names (SCI, KMEANS, HAC, VNIR_SWIR, SOIL_REFLECTANCE), case-insensitively.
Strategy strategy_from_string(std::string_view s);

/// A total partition of C bands into G nonempty groups.
///
/// Groups are labelled canonically: group 0 holds band 0, and labels increase
/// with the lowest band index of each group.
struct GroupingResult {
    std::vector<std::size_t> assignment;
    std::size_t num_groups = 0;
    Strategy strategy = Strategy::Sci;
    std::vector<std::size_t> group_sizes;
    /// Set when a static strategy produced fewer groups than requested.
    bool warning = false;

    std::size_t channels() const noexcept { return assignment.size(); }
    /// Band indices of group g in ascending order.
    std::vector<std::size_t> members(std::size_t g) const;
    /// Throws ShapeError if the partition invariants do not hold.
    void validate() const;

    friend bool operator==(const GroupingResult&, const GroupingResult&) = default;
};

/// Relabels an arbitrary labelling into canonical form and fills group sizes.
GroupingResult make_grouping(std::span<const std::size_t> labels, Strategy strategy);

/// Row-major matrix of per-band features.
struct FeatureMatrix {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> values;
    /// Columns that were constant before standardization (left as all zeros).
    std::vector<bool> constant_columns;

    double operator()(std::size_t r, std::size_t c) const { return values[r * cols + c]; }
    std::span<const double> row(std::size_t r) const { return {values.data() + r * cols, cols}; }
};

/// z-scored (mean, std, dynamic_range, coeff_variation, self_correlation) per band.
FeatureMatrix feature_matrix(const ChannelStats& stats);

/// Average-linkage agglomeration of n items under a symmetric row-major distance
/// matrix, cut at g clusters. Equal distances merge the lexicographically
/// smallest pair of clusters (by lowest member) first.
std::vector<std::size_t> average_linkage(std::span<const double> distances, std::size_t n, std::size_t g);

GroupingResult group_sci(const SciMatrix& m, std::size_t g);
GroupingResult group_hac(const FeatureMatrix& f, std::size_t g);

struct KMeansFit {
    std::vector<std::size_t> assignment;  ///< canonical labels
    double wcss = 0.0;
};

/// Lloyd's algorithm with k-means++ seeding, best of `restarts` by within-cluster sum of squares.
KMeansFit kmeans(const FeatureMatrix& f, std::size_t g, std::uint64_t seed, std::size_t restarts = 10);
GroupingResult group_kmeans(const FeatureMatrix& f, std::size_t g, std::uint64_t seed, std::size_t restarts = 10);

inline constexpr double kVnirSwirBoundaryNm = 1000.0;
inline constexpr std::array<double, 4> kSoilBoundariesNm = {550.0, 700.0, 1000.0, 1800.0};

GroupingResult group_vnir_swir(std::span<const float> wavelengths, double boundary_nm = kVnirSwirBoundaryNm);
GroupingResult group_soil_reflectance(std::span<const float> wavelengths,
                                      std::span<const double> boundaries_nm = kSoilBoundariesNm);

/// Mean silhouette over bands; singleton bands score 0. Throws UndefinedScore for G < 2.
double silhouette_score(const FeatureMatrix& f, const GroupingResult& r);

/// Adjusted Rand Index between two labellings of the same items.
double adjusted_rand_index(std::span<const std::size_t> a, std::span<const std::size_t> b);

} // namespace hypermae
