#include "hypermae/masking.hpp"

#include "hypermae/errors.hpp"
#include "hypermae/rng.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace hypermae {

PatchGrid make_patch_grid(std::size_t h, std::size_t w, std::size_t p) {
    if (p == 0 || h == 0 || w == 0 || h % p != 0 || w % p != 0)
        throw GridError("patch size " + std::to_string(p) + " does not divide " + std::to_string(h) + "x" +
                        std::to_string(w));
    return PatchGrid{p, h / p, w / p};
}

std::vector<std::vector<bool>> MaskPlan::masked_flags() const {
    std::vector<std::vector<bool>> flags(masked.size(), std::vector<bool>(num_patches, false));
    for (std::size_t g = 0; g < masked.size(); ++g)
        for (auto p : masked[g]) flags[g][p] = true;
    return flags;
}

std::size_t masked_count(double ratio, std::size_t num_patches) {
    return static_cast<std::size_t>(std::round(ratio * static_cast<double>(num_patches)));
}

MaskPlan sample_mask(const PatchGrid& grid, std::size_t groups, double ratio, std::uint64_t seed) {
    if (!(ratio >= 0.0 && ratio <= 1.0)) throw ConfigError("/masking/ratio", "mask ratio must lie in [0, 1]");
    const std::size_t n = grid.num_patches();
    const std::size_t k = masked_count(ratio, n);
    MaskPlan plan;
    plan.ratio = ratio;
    plan.seed = seed;
    plan.num_patches = n;
    plan.masked.resize(groups);
    plan.visible.resize(groups);
    std::vector<std::size_t> order(n);
    for (std::size_t g = 0; g < groups; ++g) {
        rng::Xoshiro256 gen(rng::derive_seed(seed, g));
        for (std::size_t i = 0; i < n; ++i) order[i] = i;
        // Partial Fisher-Yates: the first k slots become a uniform k-subset.
        for (std::size_t i = 0; i < k; ++i) {
            const std::size_t j = i + static_cast<std::size_t>(gen.below(n - i));
            std::swap(order[i], order[j]);
        }
        plan.masked[g].assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(k));
        plan.visible[g].assign(order.begin() + static_cast<std::ptrdiff_t>(k), order.end());
        std::sort(plan.masked[g].begin(), plan.masked[g].end());
        std::sort(plan.visible[g].begin(), plan.visible[g].end());
    }
    return plan;
}

void check_mask_inputs(const CubeShape& shape, const GroupingResult& grouping, const MaskPlan& plan,
                       const PatchGrid& grid) {
    if (grid.height() != shape.height || grid.width() != shape.width)
        throw ShapeError("patch grid does not match the cube extent");
    if (grouping.channels() != shape.channels) throw ShapeError("grouping does not cover the cube channels");
    if (plan.groups() != grouping.num_groups) throw ShapeError("mask plan group count != grouping group count");
    if (plan.num_patches != grid.num_patches()) throw ShapeError("mask plan patch count != grid patch count");
}

void extract_block(const HyperCube& cube, const GroupingResult& grouping, const PatchGrid& grid, std::size_t group,
                   std::size_t patch, std::vector<float>& out) {
    const std::size_t P = grid.patch;
    const std::size_t y0 = (patch / grid.cols) * P, x0 = (patch % grid.cols) * P;
    out.clear();
    for (std::size_t c = 0; c < grouping.channels(); ++c) {
        if (grouping.assignment[c] != group) continue;
        for (std::size_t y = 0; y < P; ++y)
            for (std::size_t x = 0; x < P; ++x) out.push_back(cube.at(c, y0 + y, x0 + x));
    }
}

MaskedSplit apply_mask(const HyperCube& cube, const GroupingResult& grouping, const MaskPlan& plan,
                       const PatchGrid& grid) {
    check_mask_inputs(cube.shape, grouping, plan, grid);
    const auto flags = plan.masked_flags();
    MaskedSplit split;
    for (std::size_t p = 0; p < grid.num_patches(); ++p)
        for (std::size_t g = 0; g < grouping.num_groups; ++g) {
            PatchBlock block{g, p, {}};
            extract_block(cube, grouping, grid, g, p, block.values);
            (flags[g][p] ? split.masked : split.visible).push_back(std::move(block));
        }
    return split;
}

HyperCube reassemble(const MaskedSplit& split, const GroupingResult& grouping, const PatchGrid& grid,
                     const CubeShape& shape) {
    HyperCube cube(shape);
    const std::size_t P = grid.patch;
    auto place = [&](const PatchBlock& b) {
        const std::size_t y0 = (b.patch / grid.cols) * P, x0 = (b.patch % grid.cols) * P;
        std::size_t k = 0;
        for (std::size_t c = 0; c < shape.channels; ++c) {
            if (grouping.assignment[c] != b.group) continue;
            for (std::size_t y = 0; y < P; ++y)
                for (std::size_t x = 0; x < P; ++x) cube.at(c, y0 + y, x0 + x) = b.values.at(k++);
        }
    };
    for (const auto& b : split.visible) place(b);
    for (const auto& b : split.masked) place(b);
    return cube;
}

std::vector<bool> masked_elements(const CubeShape& shape, const GroupingResult& grouping, const MaskPlan& plan,
                                  const PatchGrid& grid) {
    check_mask_inputs(shape, grouping, plan, grid);
    const auto flags = plan.masked_flags();
    std::vector<bool> out(shape.size(), false);
    for (std::size_t c = 0; c < shape.channels; ++c) {
        const auto& gflags = flags[grouping.assignment[c]];
        for (std::size_t y = 0; y < shape.height; ++y)
            for (std::size_t x = 0; x < shape.width; ++x)
                out[shape.index(c, y, x)] = gflags[(y / grid.patch) * grid.cols + x / grid.patch];
    }
    return out;
}

} // namespace hypermae
