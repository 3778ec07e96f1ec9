#include "support.hpp"

#include "hypermae/dataset.hpp"
#include "hypermae/errors.hpp"
#include "hypermae/synthetic.hpp"

#include <doctest.h>

#include <cmath>

using namespace hypermae;

namespace {

double pearson(std::span<const float> a, std::span<const float> b) {
    double ma = 0, mb = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        ma += a[i];
        mb += b[i];
    }
    ma /= static_cast<double>(a.size());
    mb /= static_cast<double>(b.size());
    double sab = 0, saa = 0, sbb = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        sab += (a[i] - ma) * (b[i] - mb);
        saa += (a[i] - ma) * (a[i] - ma);
        sbb += (b[i] - mb) * (b[i] - mb);
    }
    return sab / std::sqrt(saa * sbb);
}

} // namespace

TEST_CASE("identical seeds give identical datasets") {
    const auto spec = make_planted_spec(12, 5);
    const auto a = generate_synthetic(spec, 6, 16, 7, 2);
    const auto b = generate_synthetic(spec, 6, 16, 7, 2);
    CHECK(a.train.tiles == b.train.tiles);
    CHECK(a.val.tiles == b.val.tiles);
    CHECK(a.truth == b.truth);
    const auto c = generate_synthetic(spec, 6, 16, 8, 2);
    CHECK(c.train.tiles != a.train.tiles);
}

TEST_CASE("planted data have a dominant within-group factor") {
    SyntheticSpec spec;
    spec.planted_groups = 2;
    spec.channels = 6;
    spec.truth = {0, 0, 0, 1, 1, 1};
    spec.profiles = {{1, 1, 1, 0, 0, 0}, {0, 0, 0, 1, 1, 1}};
    spec.noise_sigma = 0.0;
    spec.normalize = false;
    const auto d = generate_synthetic(spec, 1, 16, 3);
    const auto& t = d.train.tiles[0];
    for (std::size_t i = 0; i < 6; ++i)
        for (std::size_t j = i + 1; j < 6; ++j) {
            const double r = pearson(t.band(i), t.band(j));
            if (spec.truth[i] == spec.truth[j]) {
                CHECK(r > 0.999);
            } else {
                CHECK(r < 0.99);
            }
        }
}

TEST_CASE("constant fields without noise give spatially constant bands") {
    auto spec = make_planted_spec(6, 3);
    spec.noise_sigma = 0.0;
    spec.constant_fields = true;
    spec.normalize = false;
    const auto d = generate_synthetic(spec, 3, 8, 1);
    for (const auto& t : d.train.tiles)
        for (std::size_t c = 0; c < 6; ++c) {
            const auto band = t.band(c);
            for (float v : band) CHECK(v == band[0]);
        }
}

TEST_CASE("planted spec shape and truth") {
    const auto spec = make_planted_spec(12, 5);
    CHECK(spec.truth.size() == 12);
    CHECK(spec.profiles.size() == 5);
    CHECK(spec.wavelengths->size() == 12);
    CHECK(spec.truth.front() == 0);
    CHECK(spec.truth.back() == 4);
    auto bad = spec;
    bad.noise_sigma = -1;
    CHECK_THROWS_AS(bad.validate(), ConfigError);
}

TEST_CASE("normalized synthetic train split spans the unit range") {
    const auto d = generate_synthetic(make_planted_spec(12, 5), 10, 16, 7, 2);
    const auto ranges = channel_ranges(d.train);
    for (const auto& r : ranges) {
        CHECK(r.min == doctest::Approx(0.0).epsilon(1e-6));
        CHECK(r.max == doctest::Approx(1.0).epsilon(1e-6));
    }
    CHECK(d.train.normalization.size() == 12);
}
