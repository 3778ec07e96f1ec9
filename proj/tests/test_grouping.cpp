#include "support.hpp"

#include "hypermae/errors.hpp"
#include "hypermae/grouping.hpp"
#include "hypermae/spectral_stats.hpp"
#include "hypermae/synthetic.hpp"

#include <doctest.h>

#include <cmath>
#include <map>

using namespace hypermae;

namespace {

FeatureMatrix features(std::size_t cols, std::vector<double> values) {
    FeatureMatrix f;
    f.cols = cols;
    f.rows = values.size() / cols;
    f.values = std::move(values);
    f.constant_columns.assign(cols, false);
    return f;
}

/// Pair-counting ARI straight from its definition over all label pairs.
double ari_by_pairs(const std::vector<std::size_t>& a, const std::vector<std::size_t>& b) {
    double both = 0, only_a = 0, only_b = 0, pairs = 0;
    for (std::size_t i = 0; i < a.size(); ++i)
        for (std::size_t j = i + 1; j < a.size(); ++j) {
            const bool sa = a[i] == a[j], sb = b[i] == b[j];
            both += sa && sb;
            only_a += sa;
            only_b += sb;
            pairs += 1;
        }
    const double expected = only_a * only_b / pairs;
    const double max_index = 0.5 * (only_a + only_b);
    return (both - expected) / (max_index - expected);
}

/// Silhouette straight from its definition with Euclidean distance.
double silhouette_by_definition(const FeatureMatrix& f, const std::vector<std::size_t>& lab, std::size_t g) {
    auto dist = [&](std::size_t i, std::size_t j) {
        double s = 0;
        for (std::size_t c = 0; c < f.cols; ++c) s += (f(i, c) - f(j, c)) * (f(i, c) - f(j, c));
        return std::sqrt(s);
    };
    double total = 0;
    for (std::size_t i = 0; i < f.rows; ++i) {
        std::vector<double> sum(g, 0.0);
        std::vector<double> n(g, 0.0);
        for (std::size_t j = 0; j < f.rows; ++j)
            if (j != i) {
                sum[lab[j]] += dist(i, j);
                n[lab[j]] += 1;
            }
        if (n[lab[i]] == 0) continue;
        const double a = sum[lab[i]] / n[lab[i]];
        double b = INFINITY;
        for (std::size_t k = 0; k < g; ++k)
            if (k != lab[i] && n[k] > 0) b = std::min(b, sum[k] / n[k]);
        total += (b - a) / std::max(a, b);
    }
    return total / static_cast<double>(f.rows);
}

MeanReflectanceStack two_block_stack(std::size_t k, std::size_t c) {
    rng::Xoshiro256 gen(3);
    Image a{4, 4, std::vector<double>(16)}, b{4, 4, std::vector<double>(16)};
    for (auto& v : a.values) v = gen.uniform(0.1, 0.3);
    for (auto& v : b.values) v = gen.uniform(0.6, 0.9);
    MeanReflectanceStack st;
    for (std::size_t i = 0; i < c; ++i) st.bands.push_back(i < k ? a : b);
    return st;
}

} // namespace

TEST_CASE("sci grouping recovers duplicated blocks") {
    const auto r = group_sci(sci_matrix(two_block_stack(3, 7)), 2);
    CHECK(r.assignment == std::vector<std::size_t>{0, 0, 0, 1, 1, 1, 1});
    CHECK(r.group_sizes == std::vector<std::size_t>{3, 4});
    const auto singles = group_sci(sci_matrix(two_block_stack(3, 7)), 7);
    CHECK(singles.num_groups == 7);
    CHECK_THROWS_AS(group_sci(sci_matrix(two_block_stack(3, 7)), 8), InvalidGroupCount);
}

TEST_CASE("kmeans and hac recover separated blobs") {
    const auto f = features(2, {0, 0, 0.1, 0, 0, 0.1, 10, 10, 10.1, 10, 10, 10.1});
    const std::vector<std::size_t> truth = {0, 0, 0, 1, 1, 1};
    CHECK(group_kmeans(f, 2, 1).assignment == truth);
    CHECK(group_hac(f, 2).assignment == truth);
    CHECK(group_hac(f, 6).num_groups == 6);
    CHECK(group_kmeans(f, 2, 5, 3) == group_kmeans(f, 2, 5, 3));
    CHECK_THROWS_AS(group_kmeans(f, 7, 1), InvalidGroupCount);
    CHECK_THROWS_AS(group_hac(f, 0), InvalidGroupCount);
}

TEST_CASE("kmeans with one cluster has total scatter") {
    const auto f = features(1, {0, 1, 2, 3});
    const auto fit = kmeans(f, 1, 1);
    CHECK(fit.assignment == std::vector<std::size_t>{0, 0, 0, 0});
    CHECK(fit.wcss == doctest::Approx(1.25 * 4));
}

TEST_CASE("wavelength rules") {
    const std::vector<float> wl = {500, 900, 1500};
    CHECK(group_vnir_swir(wl).assignment == std::vector<std::size_t>{0, 0, 1});
    const std::vector<float> vnir = {500, 600};
    const auto one = group_vnir_swir(vnir);
    CHECK(one.num_groups == 1);
    CHECK(one.warning);

    std::vector<float> enmap;
    for (int i = 0; i < 224; ++i) enmap.push_back(420.0f + 2030.0f * static_cast<float>(i) / 223.0f);
    CHECK(group_soil_reflectance(enmap).num_groups == 5);
    const std::vector<float> edge = {549, 550, 551};
    CHECK(group_soil_reflectance(edge).assignment == std::vector<std::size_t>{0, 1, 1});
    const std::vector<double> single = {1000.0};
    CHECK(group_soil_reflectance(wl, single).num_groups == 2);
}

TEST_CASE("silhouette by hand and against its definition") {
    const auto f = features(1, {0, 0.1, 10, 10.1});
    const auto r = make_grouping(std::vector<std::size_t>{0, 0, 1, 1}, Strategy::KMeans);
    // Outer points have b = 10.05, inner points b = 9.95; a = 0.1 for all four.
    const double hand = 0.5 * ((10.05 - 0.1) / 10.05 + (9.95 - 0.1) / 9.95);
    CHECK(silhouette_score(f, r) == doctest::Approx(hand).epsilon(1e-12));
    CHECK(silhouette_score(f, r) == doctest::Approx(0.9900).epsilon(1e-4));
    CHECK_THROWS_AS(silhouette_score(f, make_grouping(std::vector<std::size_t>{0, 0, 0, 0}, Strategy::Hac)),
                    UndefinedScore);

    rng::Xoshiro256 gen(11);
    double mean_abs = 0;
    for (int seed = 0; seed < 100; ++seed) {
        std::vector<double> v(20 * 3);
        for (auto& x : v) x = gen.uniform();
        const auto fm = features(3, v);
        std::vector<std::size_t> lab(20);
        for (std::size_t i = 0; i < 20; ++i) lab[i] = i < 3 ? i : gen.below(3);
        const auto g = make_grouping(lab, Strategy::KMeans);
        const double s = silhouette_score(fm, g);
        CHECK(s == doctest::Approx(silhouette_by_definition(fm, lab, 3)).epsilon(1e-12));
        mean_abs += s;
    }
    CHECK(std::abs(mean_abs / 100) < 0.15);
}

TEST_CASE("adjusted rand index against pair counting") {
    rng::Xoshiro256 gen(2);
    for (int trial = 0; trial < 50; ++trial) {
        std::vector<std::size_t> a(15), b(15);
        for (auto& x : a) x = gen.below(4);
        for (auto& x : b) x = gen.below(3);
        CHECK(adjusted_rand_index(a, b) == doctest::Approx(ari_by_pairs(a, b)).epsilon(1e-12));
    }
    const std::vector<std::size_t> x = {0, 0, 1, 1, 2}, relabeled = {2, 2, 0, 0, 1};
    CHECK(adjusted_rand_index(x, relabeled) == doctest::Approx(1.0));
}

TEST_CASE("groupings are partitions with canonical labels") {
    const auto d = generate_synthetic(make_planted_spec(12, 5), 20, 16, 7);
    const auto stats = compute_channel_stats(d.train);
    const auto f = feature_matrix(stats);
    for (const auto& r : {group_sci(sci_matrix(mean_reflectance(d.train)), 5), group_kmeans(f, 5, 7), group_hac(f, 5)}) {
        r.validate();
        CHECK(r.assignment.size() == 12);
        std::size_t total = 0;
        for (auto s : r.group_sizes) total += s;
        CHECK(total == 12);
        CHECK(r.assignment[0] == 0);
        CHECK(adjusted_rand_index(r.assignment, d.truth) >= 0.9);
    }
}
