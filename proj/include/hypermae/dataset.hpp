#pragma once

#include "hypermae/hypercube.hpp"

#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace hypermae {

enum class Split { Train, Val, Test };

std::string_view to_string(Split s) noexcept;
Split split_from_string(std::string_view s);

/// Per-channel (min, max) used for min-max scaling.
struct ChannelRange {
    double min = 0.0;
    double max = 1.0;
    friend bool operator==(const ChannelRange&, const ChannelRange&) = default;
};

/// An ordered set of dimensionally identical tiles from one split.
struct Dataset {
    std::vector<HyperCube> tiles;
    Split split = Split::Train;
    std::vector<ChannelRange> normalization;  ///< empty until normalized

    bool empty() const noexcept { return tiles.empty(); }
    CubeShape shape() const;
    const std::optional<std::vector<float>>& wavelengths() const;
    /// Throws ShapeError if tiles disagree in shape or wavelengths.
    void validate() const;
};

/// Per-channel min/max over every pixel of every tile.
std::vector<ChannelRange> channel_ranges(const Dataset& ds);

/// Min-max scales `train` to [0, 1] using its own per-channel ranges.
/// Throws DegenerateChannel for a channel that is constant across the split.
Dataset normalize_dataset(const Dataset& train);

/// Scales any split with ranges recorded from the train split.
Dataset apply_normalization(const Dataset& ds, std::span<const ChannelRange> ranges);

/// Tile paths per split plus the normalization that produced them.
struct Manifest {
    CubeShape tile_shape;
    std::optional<std::vector<float>> wavelengths;
    std::map<std::string, std::vector<std::string>> splits;  ///< paths relative to the manifest
    std::vector<ChannelRange> normalization;
};

void write_manifest(const Manifest& m, const std::filesystem::path& path);
Manifest read_manifest(const std::filesystem::path& path);

/// Loads one split listed in a manifest; paths resolve against the manifest directory.
Dataset load_split(const Manifest& m, const std::filesystem::path& manifest_path, Split split);

/// Writes every tile of `ds` as `<dir>/<prefix>_NNNN.hsc` and returns the file names.
std::vector<std::string> write_tiles(const Dataset& ds, const std::filesystem::path& dir, std::string_view prefix);

} // namespace hypermae
