#include "hypermae/hypercube.hpp"

#include "hypermae/errors.hpp"

#include <algorithm>
#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iterator>
#include <string>

namespace hypermae {

namespace {

constexpr char kMagic[4] = {'H', 'S', 'C', '1'};
constexpr std::uint32_t kDtypeF32 = 0;

void put_u32(std::vector<unsigned char>& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<unsigned char>(v >> (8 * i)));
}

void put_f32(std::vector<unsigned char>& out, float v) { put_u32(out, std::bit_cast<std::uint32_t>(v)); }

class Reader {
public:
    explicit Reader(std::span<const unsigned char> bytes) : bytes_(bytes) {}

    std::uint32_t u32(const char* what) {
        need(4, what);
        std::uint32_t v = 0;
        for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(bytes_[pos_ + i]) << (8 * i);
        pos_ += 4;
        return v;
    }
    float f32(const char* what) { return std::bit_cast<float>(u32(what)); }
    void need(std::size_t n, const char* what) const {
        if (bytes_.size() - pos_ < n) throw FormatError(std::string("truncated HSC payload while reading ") + what);
    }
    std::size_t remaining() const { return bytes_.size() - pos_; }

private:
    std::span<const unsigned char> bytes_;
    std::size_t pos_ = 0;
};

} // namespace

HyperCube::HyperCube(CubeShape s) : shape(s), data(s.size(), 0.0f) { validate(); }

HyperCube::HyperCube(CubeShape s, std::vector<float> values, std::optional<std::vector<float>> wl)
    : shape(s), data(std::move(values)), wavelengths(std::move(wl)) {
    validate();
}

void HyperCube::validate() const {
    if (shape.height == 0 || shape.width == 0 || shape.channels == 0)
        throw ShapeError("cube dimensions must be positive");
    if (data.size() != shape.size())
        throw ShapeError("cube data length " + std::to_string(data.size()) + " != H*W*C " +
                         std::to_string(shape.size()));
    if (wavelengths) {
        if (wavelengths->size() != shape.channels) throw ShapeError("wavelength count != channel count");
        for (std::size_t i = 0; i < wavelengths->size(); ++i) {
            if (!((*wavelengths)[i] > 0.0f)) throw FormatError("wavelengths must be positive");
            if (i > 0 && !((*wavelengths)[i] > (*wavelengths)[i - 1]))
                throw FormatError("wavelengths must be strictly increasing");
        }
    }
}

Volume::Volume(CubeShape s, std::vector<double> v) : shape(s), values(std::move(v)) {
    if (values.size() != shape.size()) throw ShapeError("volume data length does not match its shape");
}

Volume to_volume(const HyperCube& cube) {
    return Volume(cube.shape, std::vector<double>(cube.data.begin(), cube.data.end()));
}

std::vector<unsigned char> encode_hsc(const HyperCube& cube) {
    cube.validate();
    std::vector<unsigned char> out;
    out.reserve(24 + 4 * (cube.data.size() + (cube.wavelengths ? cube.shape.channels : 0)));
    out.insert(out.end(), std::begin(kMagic), std::end(kMagic));
    put_u32(out, static_cast<std::uint32_t>(cube.shape.height));
    put_u32(out, static_cast<std::uint32_t>(cube.shape.width));
    put_u32(out, static_cast<std::uint32_t>(cube.shape.channels));
    put_u32(out, kDtypeF32);
    put_u32(out, cube.wavelengths ? 1u : 0u);
    if (cube.wavelengths)
        for (float w : *cube.wavelengths) put_f32(out, w);
    for (float v : cube.data) put_f32(out, v);
    return out;
}

HyperCube decode_hsc(std::span<const unsigned char> bytes) {
    if (bytes.size() < 4 || !std::equal(std::begin(kMagic), std::end(kMagic), bytes.begin()))
        throw FormatError("bad HSC magic");
    Reader in(bytes.subspan(4));
    CubeShape shape;
    shape.height = in.u32("height");
    shape.width = in.u32("width");
    shape.channels = in.u32("channels");
    const std::uint32_t dtype = in.u32("dtype");
    if (dtype != kDtypeF32) throw UnsupportedDtype("HSC dtype code " + std::to_string(dtype) + " is not supported");
    const std::uint32_t flag = in.u32("wavelength flag");
    if (flag > 1) throw FormatError("HSC wavelength flag must be 0 or 1");
    if (shape.height == 0 || shape.width == 0 || shape.channels == 0)
        throw FormatError("HSC dimensions must be positive");

    std::optional<std::vector<float>> wl;
    if (flag == 1) {
        in.need(4 * shape.channels, "wavelengths");
        wl.emplace(shape.channels);
        for (auto& w : *wl) w = in.f32("wavelengths");
    }
    in.need(4 * shape.size(), "reflectance data");
    std::vector<float> data(shape.size());
    for (auto& v : data) v = in.f32("reflectance data");
    if (in.remaining() != 0) throw FormatError("trailing bytes after HSC payload");
    return HyperCube(shape, std::move(data), std::move(wl));
}

HyperCube read_hsc(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path.string());
    std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return decode_hsc(bytes);
}

void write_hsc(const HyperCube& cube, const std::filesystem::path& path) {
    const auto bytes = encode_hsc(cube);
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + path.string());
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw IoError("short write to " + path.string());
}

HyperCube drop_sentinel_channels(const HyperCube& cube, float sentinel) {
    std::vector<std::size_t> keep;
    for (std::size_t c = 0; c < cube.shape.channels; ++c) {
        const auto band = cube.band(c);
        if (!std::all_of(band.begin(), band.end(), [&](float v) { return v == sentinel; })) keep.push_back(c);
    }
    if (keep.empty()) throw EmptyCube("every channel holds the sentinel value");
    if (keep.size() == cube.shape.channels) return cube;

    CubeShape shape = cube.shape;
    shape.channels = keep.size();
    std::vector<float> data;
    data.reserve(shape.size());
    std::optional<std::vector<float>> wl;
    if (cube.wavelengths) wl.emplace();
    for (std::size_t c : keep) {
        const auto band = cube.band(c);
        data.insert(data.end(), band.begin(), band.end());
        if (wl) wl->push_back((*cube.wavelengths)[c]);
    }
    return HyperCube(shape, std::move(data), std::move(wl));
}

std::vector<HyperCube> tile_scene(const HyperCube& scene, std::size_t tile) {
    if (tile == 0) throw NoTiles("tile size must be at least 1");
    const auto& s = scene.shape;
    if (tile > std::min(s.height, s.width))
        throw NoTiles("tile size " + std::to_string(tile) + " exceeds the scene extent");
    const std::size_t rows = s.height / tile;
    const std::size_t cols = s.width / tile;
    std::vector<HyperCube> tiles;
    tiles.reserve(rows * cols);
    const CubeShape ts{tile, tile, s.channels};
    for (std::size_t r = 0; r < rows; ++r) {
        for (std::size_t q = 0; q < cols; ++q) {
            HyperCube t(ts);
            t.wavelengths = scene.wavelengths;
            for (std::size_t c = 0; c < s.channels; ++c)
                for (std::size_t y = 0; y < tile; ++y)
                    for (std::size_t x = 0; x < tile; ++x) t.at(c, y, x) = scene.at(c, r * tile + y, q * tile + x);
            tiles.push_back(std::move(t));
        }
    }
    return tiles;
}

} // namespace hypermae
