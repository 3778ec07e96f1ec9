#include "support.hpp"

#include "hypermae/errors.hpp"
#include "hypermae/masking.hpp"

#include <doctest.h>

#include <set>

using namespace hypermae;

TEST_CASE("patch grids") {
    const auto g = make_patch_grid(64, 64, 4);
    CHECK(g.num_patches() == 256);
    CHECK(make_patch_grid(8, 8, 8).num_patches() == 1);
    CHECK_THROWS_AS(make_patch_grid(10, 10, 4), GridError);
}

TEST_CASE("masks have exact counts per group") {
    const auto grid = make_patch_grid(64, 64, 4);
    CHECK(masked_count(0.75, 256) == 192);
    const auto plan = sample_mask(grid, 5, 0.75, 42);
    for (std::size_t g = 0; g < 5; ++g) {
        CHECK(plan.masked[g].size() == 192);
        CHECK(plan.visible[g].size() == 64);
        std::set<std::size_t> all(plan.masked[g].begin(), plan.masked[g].end());
        all.insert(plan.visible[g].begin(), plan.visible[g].end());
        CHECK(all.size() == 256);
    }
    CHECK(plan.masked[0] != plan.masked[1]);
    CHECK(sample_mask(grid, 5, 0.75, 42) == plan);
    const auto none = sample_mask(grid, 2, 0.0, 42);
    CHECK(none.masked[0].empty());
    CHECK(none.visible[1].size() == 256);
}

TEST_CASE("apply mask and reassemble") {
    const auto grid = make_patch_grid(4, 4, 2);
    const auto grouping = make_grouping(std::vector<std::size_t>{0, 0, 0}, Strategy::Sci);
    const auto cube = testing::random_cube({4, 4, 3}, 8);
    MaskPlan plan;
    plan.masked = {{0, 3}};
    plan.visible = {{1, 2}};
    plan.ratio = 0.5;
    plan.num_patches = 4;
    const auto split = apply_mask(cube, grouping, plan, grid);
    REQUIRE(split.visible.size() == 2);
    CHECK(split.visible[0].patch == 1);
    CHECK(split.visible[1].patch == 2);
    CHECK(split.visible[0].values.size() == 2 * 2 * 3);
    CHECK(split.visible[0].values[0] == cube.at(0, 0, 2));
    CHECK(reassemble(split, grouping, grid, cube.shape) == cube);

    const auto open = apply_mask(cube, grouping, sample_mask(grid, 1, 0.0, 1), grid);
    CHECK(open.masked.empty());
    const auto full = reassemble(open, grouping, grid, cube.shape);
    CHECK(full == cube);

    const auto two = make_grouping(std::vector<std::size_t>{0, 1, 0}, Strategy::Sci);
    CHECK_THROWS_AS(apply_mask(cube, two, plan, grid), ShapeError);
}

TEST_CASE("masked elements follow group membership") {
    const auto grid = make_patch_grid(4, 4, 2);
    const auto grouping = make_grouping(std::vector<std::size_t>{0, 1, 0}, Strategy::Sci);
    MaskPlan plan;
    plan.masked = {{0}, {3}};
    plan.visible = {{1, 2, 3}, {0, 1, 2}};
    plan.num_patches = 4;
    plan.ratio = 0.25;
    const CubeShape s{4, 4, 3};
    const auto m = masked_elements(s, grouping, plan, grid);
    CHECK(m[s.index(0, 0, 0)]);
    CHECK(m[s.index(2, 1, 1)]);
    CHECK_FALSE(m[s.index(1, 0, 0)]);
    CHECK(m[s.index(1, 3, 3)]);
    CHECK_FALSE(m[s.index(0, 3, 3)]);
}
