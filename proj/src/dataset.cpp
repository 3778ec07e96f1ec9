#include "hypermae/dataset.hpp"

#include "hypermae/errors.hpp"

#include <json.hpp>

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <limits>

namespace hypermae {

using nlohmann::json;

std::string_view to_string(Split s) noexcept {
    switch (s) {
    case Split::Train: return "train";
    case Split::Val: return "val";
    case Split::Test: return "test";
    }
    return "train";
}

Split split_from_string(std::string_view s) {
    if (s == "train") return Split::Train;
    if (s == "val") return Split::Val;
    if (s == "test") return Split::Test;
    throw ConfigError("", "unknown split '" + std::string(s) + "'");
}

CubeShape Dataset::shape() const {
    if (tiles.empty()) throw ShapeError("dataset has no tiles");
    return tiles.front().shape;
}

const std::optional<std::vector<float>>& Dataset::wavelengths() const {
    if (tiles.empty()) throw ShapeError("dataset has no tiles");
    return tiles.front().wavelengths;
}

void Dataset::validate() const {
    if (tiles.empty()) return;
    const auto& first = tiles.front();
    for (const auto& t : tiles) {
        t.validate();
        if (t.shape != first.shape) throw ShapeError("dataset tiles differ in shape");
        if (t.wavelengths != first.wavelengths) throw ShapeError("dataset tiles differ in wavelengths");
    }
    if (!normalization.empty() && normalization.size() != first.shape.channels)
        throw ShapeError("normalization table does not match the channel count");
}

std::vector<ChannelRange> channel_ranges(const Dataset& ds) {
    ds.validate();
    const auto shape = ds.shape();
    std::vector<ChannelRange> ranges(shape.channels, {std::numeric_limits<double>::infinity(),
                                                      -std::numeric_limits<double>::infinity()});
    for (const auto& t : ds.tiles) {
        for (std::size_t c = 0; c < shape.channels; ++c) {
            const auto [lo, hi] = std::minmax_element(t.band(c).begin(), t.band(c).end());
            ranges[c].min = std::min(ranges[c].min, static_cast<double>(*lo));
            ranges[c].max = std::max(ranges[c].max, static_cast<double>(*hi));
        }
    }
    return ranges;
}

Dataset normalize_dataset(const Dataset& train) {
    if (train.empty()) throw ShapeError("cannot normalize an empty dataset");
    const auto ranges = channel_ranges(train);
    for (std::size_t c = 0; c < ranges.size(); ++c)
        if (!(ranges[c].max > ranges[c].min)) throw DegenerateChannel(c);
    return apply_normalization(train, ranges);
}

Dataset apply_normalization(const Dataset& ds, std::span<const ChannelRange> ranges) {
    ds.validate();
    Dataset out;
    out.split = ds.split;
    out.normalization.assign(ranges.begin(), ranges.end());
    if (ds.empty()) return out;
    const auto shape = ds.shape();
    if (ranges.size() != shape.channels) throw ShapeError("normalization table does not match the channel count");
    out.tiles.reserve(ds.tiles.size());
    for (const auto& t : ds.tiles) {
        HyperCube n = t;
        for (std::size_t c = 0; c < shape.channels; ++c) {
            const double lo = ranges[c].min;
            const double span = ranges[c].max - ranges[c].min;
            if (!(span > 0.0)) throw DegenerateChannel(c);
            float* band = n.data.data() + c * shape.plane();
            for (std::size_t i = 0; i < shape.plane(); ++i)
                band[i] = static_cast<float>(std::clamp((static_cast<double>(band[i]) - lo) / span, 0.0, 1.0));
        }
        out.tiles.push_back(std::move(n));
    }
    return out;
}

void write_manifest(const Manifest& m, const std::filesystem::path& path) {
    json j;
    j["tile_shape"] = {{"height", m.tile_shape.height}, {"width", m.tile_shape.width},
                       {"channels", m.tile_shape.channels}};
    j["wavelengths"] = m.wavelengths ? json(*m.wavelengths) : json(nullptr);
    j["splits"] = m.splits;
    json norm = json::array();
    for (const auto& r : m.normalization) norm.push_back({r.min, r.max});
    j["normalization"] = norm;
    std::ofstream out(path);
    if (!out) throw IoError("cannot write manifest " + path.string());
    out << j.dump(2) << '\n';
}

Manifest read_manifest(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open manifest " + path.string());
    Manifest m;
    try {
        const json j = json::parse(in);
        const auto& s = j.at("tile_shape");
        m.tile_shape = {s.at("height").get<std::size_t>(), s.at("width").get<std::size_t>(),
                        s.at("channels").get<std::size_t>()};
        if (!j.at("wavelengths").is_null()) m.wavelengths = j.at("wavelengths").get<std::vector<float>>();
        m.splits = j.at("splits").get<std::map<std::string, std::vector<std::string>>>();
        for (const auto& r : j.at("normalization")) m.normalization.push_back({r.at(0).get<double>(), r.at(1).get<double>()});
    } catch (const json::exception& e) {
        throw FormatError("malformed manifest " + path.string() + ": " + e.what());
    }
    return m;
}

Dataset load_split(const Manifest& m, const std::filesystem::path& manifest_path, Split split) {
    Dataset ds;
    ds.split = split;
    ds.normalization = m.normalization;
    const auto base = manifest_path.parent_path();
    const auto it = m.splits.find(std::string(to_string(split)));
    if (it == m.splits.end()) return ds;
    for (const auto& rel : it->second) {
        auto tile = read_hsc(base / rel);
        if (tile.shape != m.tile_shape) throw FormatError("tile " + rel + " does not match the manifest shape");
        ds.tiles.push_back(std::move(tile));
    }
    ds.validate();
    return ds;
}

std::vector<std::string> write_tiles(const Dataset& ds, const std::filesystem::path& dir, std::string_view prefix) {
    std::filesystem::create_directories(dir);
    std::vector<std::string> names;
    names.reserve(ds.tiles.size());
    for (std::size_t i = 0; i < ds.tiles.size(); ++i) {
        char buf[32];
        std::snprintf(buf, sizeof buf, "_%04zu.hsc", i);
        std::string name = std::string(prefix) + buf;
        write_hsc(ds.tiles[i], dir / name);
        names.push_back(std::move(name));
    }
    return names;
}

} // namespace hypermae
