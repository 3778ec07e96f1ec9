#include "support.hpp"

#include "hypermae/dataset.hpp"
#include "hypermae/spectral_stats.hpp"

#include <doctest.h>

#include <cmath>

using namespace hypermae;

namespace {

Image image(std::size_t h, std::size_t w, std::vector<double> v) { return {h, w, std::move(v)}; }

Image random_image(std::size_t h, std::size_t w, rng::Xoshiro256& gen) {
    Image im{h, w, std::vector<double>(h * w)};
    for (auto& v : im.values) v = gen.uniform();
    return im;
}

double mean_of(const Image& m) {
    double s = 0;
    for (double v : m.values) s += v;
    return s / static_cast<double>(m.values.size());
}

} // namespace

TEST_CASE("channel descriptors by hand") {
    Dataset ds;
    ds.tiles = {HyperCube(CubeShape{2, 2, 2}, {0, 1, 0, 1, 0.3f, 0.3f, 0.3f, 0.3f})};
    const auto stats = compute_channel_stats(ds);
    CHECK(stats[0].mean == doctest::Approx(0.5));
    CHECK(stats[0].std == doctest::Approx(0.5));
    CHECK(stats[0].dynamic_range == doctest::Approx(1.0));
    CHECK(stats[0].coeff_variation == doctest::Approx(1.0));
    CHECK(stats[1].std == doctest::Approx(0.0));
    CHECK(stats[1].coeff_variation == 0.0);
    CHECK(stats[1].self_correlation == 0.0);
    CHECK(stats[1].degenerate);
}

TEST_CASE("lag correlation of a striped band") {
    const std::vector<float> rows = {0, 0, 0, 0, 1, 1, 1, 1, 3, 3, 3, 3, 2, 2, 2, 2};
    CHECK(*lag_correlation(rows, 4, 4, 1, 0) == doctest::Approx(1.0));
    const std::vector<float> flat(16, 0.4f);
    CHECK_FALSE(lag_correlation(flat, 4, 4, 1, 0).has_value());
}

TEST_CASE("mean reflectance") {
    Dataset ds;
    ds.tiles = {HyperCube(CubeShape{1, 2, 1}, {0.2f, 0.4f}), HyperCube(CubeShape{1, 2, 1}, {0.6f, 0.0f})};
    const auto m = mean_reflectance(ds);
    REQUIRE(m.bands.size() == 1);
    CHECK(m.bands[0].values[0] == doctest::Approx(0.4));
    CHECK(m.bands[0].values[1] == doctest::Approx(0.2));
}

TEST_CASE("sci hand cases") {
    CHECK(sci_map(image(1, 1, {0.3}), image(1, 1, {0.1}), 0.0).values[0] == doctest::Approx(0.5).epsilon(1e-15));
    CHECK(sci_map(image(1, 1, {1.0}), image(1, 1, {0.0})).values[0] == doctest::Approx(1e-8).epsilon(1e-6));
    const auto same = sci_map(image(1, 3, {0.0, 0.5, 1.0}), image(1, 3, {0.0, 0.5, 1.0}));
    for (double v : same.values) CHECK(v == 1.0);
    CHECK(sci_prod(image(1, 4, {1, 1, 0, 0})) == 0.25);
    CHECK(sci_prod(image(1, 3, {0.7, 0.7, 0.7})) == doctest::Approx(0.7).epsilon(1e-15));
}

TEST_CASE("sci properties on random inputs") {
    rng::Xoshiro256 gen(77);
    for (int trial = 0; trial < 1000; ++trial) {
        const auto a = random_image(3, 4, gen);
        const auto b = random_image(3, 4, gen);
        const auto ab = sci_map(a, b);
        const auto ba = sci_map(b, a);
        CHECK(ab.values == ba.values);
        for (double v : ab.values) {
            CHECK(v >= 0.0);
            CHECK(v <= 1.0);
        }
        CHECK(sci_prod(ab) <= mean_of(ab) + 1e-15);
    }
}

TEST_CASE("sci matrix is symmetric with a unit diagonal") {
    rng::Xoshiro256 gen(5);
    MeanReflectanceStack st;
    for (int c = 0; c < 5; ++c) st.bands.push_back(random_image(4, 4, gen));
    st.bands.push_back(st.bands[1]);
    const auto m = sci_matrix(st);
    REQUIRE(m.size == 6);
    for (std::size_t i = 0; i < 6; ++i) {
        CHECK(m(i, i) == 1.0);
        for (std::size_t j = 0; j < 6; ++j) CHECK(m(i, j) == m(j, i));
    }
    CHECK(m(1, 5) == 1.0);
}
