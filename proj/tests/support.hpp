#pragma once

#include "hypermae/grouping.hpp"
#include "hypermae/hypercube.hpp"
#include "hypermae/rng.hpp"

#include <filesystem>
#include <string>

namespace testing {

inline hypermae::HyperCube random_cube(hypermae::CubeShape s, std::uint64_t seed, double lo = 0.0, double hi = 1.0) {
    hypermae::rng::Xoshiro256 gen(seed);
    hypermae::HyperCube c(s);
    for (auto& v : c.data) v = static_cast<float>(gen.uniform(lo, hi));
    return c;
}

inline hypermae::Volume random_volume(hypermae::CubeShape s, std::uint64_t seed, double lo = 0.0, double hi = 1.0) {
    hypermae::rng::Xoshiro256 gen(seed);
    hypermae::Volume v(s);
    for (auto& x : v.values) x = gen.uniform(lo, hi);
    return v;
}

/// Fresh empty directory under the system temp dir.
inline std::filesystem::path scratch_dir(const std::string& name) {
    auto dir = std::filesystem::temp_directory_path() / ("hypermae_test_" + name);
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    return dir;
}

inline double relative_error(double a, double b) {
    const double scale = std::max({std::abs(a), std::abs(b), 1e-8});
    return std::abs(a - b) / scale;
}

} // namespace testing
