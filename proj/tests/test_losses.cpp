#include "support.hpp"

#include "hypermae/errors.hpp"
#include "hypermae/losses.hpp"
#include "hypermae/masking.hpp"

#include <doctest.h>

#include <cmath>

using namespace hypermae;

namespace {

/// SSIM from its definition: explicit loops over every window position.
double ssim_by_windows(const Volume& x, const Volume& y, std::size_t k, double c1, double c2) {
    const auto& s = x.shape;
    double total = 0;
    std::size_t count = 0;
    const double n = static_cast<double>(k * k);
    for (std::size_t c = 0; c < s.channels; ++c)
        for (std::size_t r = 0; r + k <= s.height; ++r)
            for (std::size_t q = 0; q + k <= s.width; ++q) {
                double mx = 0, my = 0;
                for (std::size_t i = 0; i < k; ++i)
                    for (std::size_t j = 0; j < k; ++j) {
                        mx += x.at(c, r + i, q + j);
                        my += y.at(c, r + i, q + j);
                    }
                mx /= n;
                my /= n;
                double vx = 0, vy = 0, cxy = 0;
                for (std::size_t i = 0; i < k; ++i)
                    for (std::size_t j = 0; j < k; ++j) {
                        const double dx = x.at(c, r + i, q + j) - mx, dy = y.at(c, r + i, q + j) - my;
                        vx += dx * dx;
                        vy += dy * dy;
                        cxy += dx * dy;
                    }
                vx /= n;
                vy /= n;
                cxy /= n;
                total += (2 * mx * my + c1) * (2 * cxy + c2) / ((mx * mx + my * my + c1) * (vx + vy + c2));
                ++count;
            }
    return total / static_cast<double>(count);
}

/// SID from its definition: per pixel, KL(p||q) + KL(q||p) of sum-normalized
/// spectra with negative values clamped to 0 and logs floored at eps.
double sid_by_pixels(const Volume& x, const Volume& y, double eps) {
    const auto& s = x.shape;
    double total = 0;
    for (std::size_t px = 0; px < s.plane(); ++px) {
        std::vector<double> p(s.channels), q(s.channels);
        double sp = 0, sq = 0;
        for (std::size_t c = 0; c < s.channels; ++c) {
            p[c] = std::max(0.0, x.values[c * s.plane() + px]);
            q[c] = std::max(0.0, y.values[c * s.plane() + px]);
            sp += p[c];
            sq += q[c];
        }
        double kl_pq = 0, kl_qp = 0;
        for (std::size_t c = 0; c < s.channels; ++c) {
            p[c] /= sp + eps;
            q[c] /= sq + eps;
            const double lp = std::log(std::max(p[c], eps)), lq = std::log(std::max(q[c], eps));
            kl_pq += p[c] * (lp - lq);
            kl_qp += q[c] * (lq - lp);
        }
        total += kl_pq + kl_qp;
    }
    return total / static_cast<double>(s.plane());
}

template <class F>
double central_difference(Volume& v, std::size_t i, double h, F&& f) {
    const double orig = v.values[i];
    v.values[i] = orig + h;
    const double up = f();
    v.values[i] = orig - h;
    const double down = f();
    v.values[i] = orig;
    return (up - down) / (2 * h);
}

} // namespace

TEST_CASE("mae identities") {
    const auto a = testing::random_volume({3, 3, 2}, 1);
    CHECK(mae(a, a) == 0.0);
    auto b = a;
    for (auto& v : b.values) v += 0.1;
    CHECK(mae(b, a) == doctest::Approx(0.1).epsilon(1e-12));
    const std::vector<double> p = {0, 1}, t = {1, 0};
    CHECK(mae(p, t) == 1.0);
    CHECK_THROWS_AS(mae(a, testing::random_volume({3, 3, 1}, 1)), ShapeError);
}

TEST_CASE("ssim hand values") {
    const CubeShape s{7, 7, 1};
    Volume x(s, std::vector<double>(49, 0.2)), y(s, std::vector<double>(49, 0.8));
    const double expected = (2 * 0.16 + 1e-4) / (0.04 + 0.64 + 1e-4);
    CHECK(ssim(x, y) == doctest::Approx(expected).epsilon(1e-12));
    CHECK(ssim(x, y) == doctest::Approx(0.4707).epsilon(1e-4));
    CHECK(ssim_n(x, y) == doctest::Approx((1 - expected) / 2).epsilon(1e-12));
    CHECK(ssim_n(x, y) == doctest::Approx(0.2646).epsilon(1e-3));
    const auto r = testing::random_volume({8, 8, 2}, 3);
    CHECK(ssim(r, r) == 1.0);
    CHECK(ssim_n(r, r) == 0.0);
    CHECK_THROWS_AS(ssim(testing::random_volume({6, 6, 1}, 1), testing::random_volume({6, 6, 1}, 2)), WindowError);
}

TEST_CASE("ssim matches the windowed definition and is symmetric") {
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        const auto x = testing::random_volume({9, 10, 3}, seed);
        const auto y = testing::random_volume({9, 10, 3}, seed + 100);
        const double v = ssim(x, y);
        CHECK(v == doctest::Approx(ssim_by_windows(x, y, 7, 1e-4, 9e-4)).epsilon(1e-12));
        CHECK(v == doctest::Approx(ssim(y, x)).epsilon(1e-14));
        CHECK(v <= 1.0);
        CHECK(v >= -1.0);
        CHECK(ssim_n(x, y) >= 0.0);
        CHECK(ssim_n(x, y) <= 1.0);
    }
}

TEST_CASE("ssim_n reaches one for anti-correlated images") {
    const CubeShape s{7, 7, 1};
    Volume x(s), y(s);
    double mean = 0;
    for (std::size_t i = 0; i < 49; ++i) {
        x.values[i] = (i % 2) ? 1.0 : -1.0;
        mean += x.values[i] / 49;
    }
    for (std::size_t i = 0; i < 49; ++i) {
        x.values[i] -= mean;
        y.values[i] = -x.values[i];
    }
    SsimParams p;
    p.c1 = 1e-12;
    p.c2 = 1e-30;
    CHECK(ssim(x, y, p) == doctest::Approx(-1.0).epsilon(1e-9));
    CHECK(ssim_n(x, y, p) == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("sid hand values") {
    const CubeShape s{1, 1, 2};
    Volume x(s, {0.75, 0.25}), y(s, {0.25, 0.75});
    CHECK(sid(x, y) == doctest::Approx(std::log(3.0)).epsilon(1e-6));
    CHECK(sid_n(x, y) == doctest::Approx(1 - std::pow(3.0, -0.5)).epsilon(1e-6));
    CHECK(sid_n_from_sid(std::log(3.0), 0.5) == doctest::Approx(1 - 1 / std::sqrt(3.0)).epsilon(1e-12));
    CHECK(sid_n_from_sid(0.0, 0.5) == 0.0);
    const auto r = testing::random_volume({3, 3, 4}, 9, 0.1, 1.0);
    CHECK(sid(r, r) == doctest::Approx(0.0).epsilon(1e-12));
    CHECK_THROWS_AS(sid(r, testing::random_volume({3, 3, 3}, 9)), ShapeError);
}

TEST_CASE("sid matches the per-pixel definition") {
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        const auto x = testing::random_volume({4, 5, 6}, seed, 0.0, 1.0);
        const auto y = testing::random_volume({4, 5, 6}, seed + 50, -0.1, 1.0);
        CHECK(sid(x, y) == doctest::Approx(sid_by_pixels(x, y, 1e-8)).epsilon(1e-10));
        CHECK(sid(x, y) >= 0.0);
        CHECK(sid_n(x, y) >= 0.0);
        CHECK(sid_n(x, y) < 1.0);
    }
}

TEST_CASE("psnr") {
    CHECK(psnr_from_mse(0.01) == doctest::Approx(20.0).epsilon(1e-12));
    CHECK(psnr_from_mse(1.0) == 0.0);
    const auto a = testing::random_volume({2, 2, 2}, 1);
    CHECK(std::isinf(psnr(a, a)));
    CHECK(psnr(a, a) > 0);
}

TEST_CASE("weight schedule") {
    CHECK(schedule_weights(0, 6) == LossWeights{1.0, 0.0, 0.0});
    CHECK(schedule_weights(6, 6) == LossWeights{0.7, 0.15, 0.15});
    CHECK(schedule_weights(30, 6) == LossWeights{0.7, 0.15, 0.15});
    const auto mid = schedule_weights(3, 6);
    CHECK(mid.eta == doctest::Approx(0.85));
    CHECK(mid.lambda == doctest::Approx(0.075));
    CHECK(mid.mu == doctest::Approx(0.075));
    for (std::size_t e = 0; e <= 10; ++e) CHECK(schedule_weights(e, 10).sum() == doctest::Approx(1.0));
}

TEST_CASE("loss gradients match central differences") {
    const CubeShape s{8, 8, 6};
    double worst_ssim = 0, worst_sid = 0;
    for (std::uint64_t trial = 0; trial < 20; ++trial) {
        const auto x = testing::random_volume(s, 1000 + trial, 0.05, 1.0);
        auto y = testing::random_volume(s, 2000 + trial, 0.05, 1.0);
        std::vector<double> g_ssim, g_sid;
        ssim(x, y, {}, &g_ssim);
        sid(x, y, {}, &g_sid);
        rng::Xoshiro256 pick(trial);
        for (int k = 0; k < 12; ++k) {
            const std::size_t i = pick.below(s.size());
            const double fd_ssim = central_difference(y, i, 1e-4, [&] { return ssim(x, y); });
            const double fd_sid = central_difference(y, i, 1e-4, [&] { return sid(x, y); });
            worst_ssim = std::max(worst_ssim, std::abs(fd_ssim - g_ssim[i]) / std::max(std::abs(fd_ssim), 1e-6));
            worst_sid = std::max(worst_sid, testing::relative_error(fd_sid, g_sid[i]));
        }
    }
    CHECK(worst_ssim < 1e-4);
    CHECK(worst_sid < 1e-4);
}

TEST_CASE("composite loss gradient matches central differences") {
    const CubeShape s{8, 8, 6};
    const auto grid = make_patch_grid(8, 8, 4);
    const auto grouping = make_grouping(std::vector<std::size_t>{0, 0, 1, 1, 2, 2}, Strategy::Sci);
    const LossWeights w{0.7, 0.15, 0.15};
    double worst = 0;
    for (std::uint64_t trial = 0; trial < 20; ++trial) {
        const auto target = testing::random_volume(s, 3000 + trial, 0.05, 1.0);
        auto pred = testing::random_volume(s, 4000 + trial, 0.05, 1.0);
        const auto plan = sample_mask(grid, 3, 0.5, trial);
        const auto mask = masked_elements(s, grouping, plan, grid);
        const auto base = composite_loss(pred, target, mask, w);
        rng::Xoshiro256 pick(trial + 99);
        for (int k = 0; k < 12; ++k) {
            std::size_t i = pick.below(s.size());
            while (!mask[i]) i = pick.below(s.size());
            const double fd =
                central_difference(pred, i, 1e-4, [&] { return composite_loss(pred, target, mask, w).report.total; });
            worst = std::max(worst, testing::relative_error(fd, base.gradient.values[i]));
        }
        for (std::size_t i = 0; i < s.size(); ++i)
            if (!mask[i]) CHECK(base.gradient.values[i] == 0.0);
    }
    CHECK(worst < 1e-4);
}

TEST_CASE("composite loss special cases") {
    const CubeShape s{8, 8, 2};
    const auto t = testing::random_volume(s, 5);
    const auto grid = make_patch_grid(8, 8, 4);
    const auto grouping = make_grouping(std::vector<std::size_t>{0, 1}, Strategy::Sci);
    const auto plan = sample_mask(grid, 2, 0.5, 3);
    const auto same = composite_loss(t, t, plan, grouping, grid, kScheduleTarget);
    CHECK(same.report.total == 0.0);
    for (double g : same.gradient.values) CHECK(std::abs(g) < 1e-15);

    auto p = t;
    for (auto& v : p.values) v += 0.2;
    const auto only_mae = composite_loss(p, t, plan, grouping, grid, kScheduleStart);
    CHECK(only_mae.report.total == doctest::Approx(0.2).epsilon(1e-12));
    CHECK(only_mae.report.ssim_n > 0.0);
    CHECK(only_mae.report.sid_n >= 0.0);

    const auto skipped = composite_loss(p, t, plan, grouping, grid, kScheduleTarget, {}, {}, LossTerms{true, false, false});
    CHECK(std::isnan(skipped.report.ssim_n));
    CHECK(std::isnan(skipped.report.sid_n));
}
