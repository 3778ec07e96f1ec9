#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <span>
#include <vector>

namespace hypermae {

/// Dimensions of a band-sequential cube: `channels` planes of height x width, row-major.
struct CubeShape {
    std::size_t height = 0;
    std::size_t width = 0;
    std::size_t channels = 0;

    std::size_t plane() const noexcept { return height * width; }
    std::size_t size() const noexcept { return height * width * channels; }
    std::size_t index(std::size_t c, std::size_t y, std::size_t x) const noexcept {
        return (c * height + y) * width + x;
    }
    friend bool operator==(const CubeShape&, const CubeShape&) = default;
};

/// A reflectance tile as stored on disk (32-bit floats).
struct HyperCube {
    CubeShape shape;
    std::vector<float> data;
    std::optional<std::vector<float>> wavelengths;

    HyperCube() = default;
    /// Zero-filled cube; throws ShapeError on a zero dimension.
    explicit HyperCube(CubeShape s);
    HyperCube(CubeShape s, std::vector<float> values, std::optional<std::vector<float>> wl = std::nullopt);

    float at(std::size_t c, std::size_t y, std::size_t x) const { return data[shape.index(c, y, x)]; }
    float& at(std::size_t c, std::size_t y, std::size_t x) { return data[shape.index(c, y, x)]; }
    std::span<const float> band(std::size_t c) const {
        return {data.data() + c * shape.plane(), shape.plane()};
    }

    /// Throws ShapeError / FormatError if a cube invariant is violated.
    void validate() const;

    friend bool operator==(const HyperCube&, const HyperCube&) = default;
};

/// Double-precision working copy of a cube, same layout as HyperCube.
struct Volume {
    CubeShape shape;
    std::vector<double> values;

    Volume() = default;
    explicit Volume(CubeShape s) : shape(s), values(s.size(), 0.0) {}
    Volume(CubeShape s, std::vector<double> v);

    double at(std::size_t c, std::size_t y, std::size_t x) const { return values[shape.index(c, y, x)]; }
    double& at(std::size_t c, std::size_t y, std::size_t x) { return values[shape.index(c, y, x)]; }

    friend bool operator==(const Volume&, const Volume&) = default;
};

Volume to_volume(const HyperCube& cube);

/// Reads an HSC1 tile. Throws FormatError, UnsupportedDtype or IoError.
HyperCube read_hsc(const std::filesystem::path& path);

/// Writes an HSC1 tile, byte-exact little-endian. Throws IoError.
void write_hsc(const HyperCube& cube, const std::filesystem::path& path);

/// Encodes a cube into its HSC1 byte image.
std::vector<unsigned char> encode_hsc(const HyperCube& cube);
HyperCube decode_hsc(std::span<const unsigned char> bytes);

/// Removes channels whose every value equals `sentinel`. Throws EmptyCube if none remain.
HyperCube drop_sentinel_channels(const HyperCube& cube, float sentinel = -32768.0f);

/// Non-overlapping `tile` x `tile` crops in row-major scan order; partial edge tiles are dropped.
std::vector<HyperCube> tile_scene(const HyperCube& scene, std::size_t tile);

} // namespace hypermae
