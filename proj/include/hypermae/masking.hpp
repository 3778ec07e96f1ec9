#pragma once

#include "hypermae/grouping.hpp"
#include "hypermae/hypercube.hpp"

#include <cstddef>
#include <cstdint>
#include <vector>

namespace hypermae {

/// Square patches of side `patch` tiling an H x W tile exactly.
struct PatchGrid {
    std::size_t patch = 0;
    std::size_t rows = 0;
    std::size_t cols = 0;

    std::size_t num_patches() const noexcept { return rows * cols; }
    std::size_t height() const noexcept { return rows * patch; }
    std::size_t width() const noexcept { return cols * patch; }
    friend bool operator==(const PatchGrid&, const PatchGrid&) = default;
};

/// Throws GridError unless p divides both h and w.
PatchGrid make_patch_grid(std::size_t h, std::size_t w, std::size_t p);

/// Per-group masked / visible patch indices (each sorted ascending).
struct MaskPlan {
    std::vector<std::vector<std::size_t>> masked;
    std::vector<std::vector<std::size_t>> visible;
    double ratio = 0.0;
    std::uint64_t seed = 0;
    std::size_t num_patches = 0;

    std::size_t groups() const noexcept { return masked.size(); }
    /// is_masked[g][patch]
    std::vector<std::vector<bool>> masked_flags() const;
    friend bool operator==(const MaskPlan&, const MaskPlan&) = default;
};

/// round(ratio * n), rounding halves away from zero.
std::size_t masked_count(double ratio, std::size_t num_patches);

/// Each group draws exactly masked_count(ratio, N) patches uniformly without
/// replacement from the stream derive_seed(seed, group).
MaskPlan sample_mask(const PatchGrid& grid, std::size_t groups, double ratio, std::uint64_t seed);

/// Pixel values of one (group, patch) block: channels of the group in ascending
/// order, each a row-major patch x patch square.
struct PatchBlock {
    std::size_t group = 0;
    std::size_t patch = 0;
    std::vector<float> values;
};

struct MaskedSplit {
    std::vector<PatchBlock> visible;  ///< encoder input, ordered by (patch, group)
    std::vector<PatchBlock> masked;   ///< reconstruction targets, ordered by (patch, group)
};

/// Copies the block of `cube` at (group, patch) into `out` (resized to fit).
void extract_block(const HyperCube& cube, const GroupingResult& grouping, const PatchGrid& grid, std::size_t group,
                   std::size_t patch, std::vector<float>& out);

/// Splits a cube into visible and masked blocks. Throws ShapeError on mismatch.
MaskedSplit apply_mask(const HyperCube& cube, const GroupingResult& grouping, const MaskPlan& plan,
                       const PatchGrid& grid);

/// Writes blocks back into a cube of the given shape; inverse of apply_mask.
HyperCube reassemble(const MaskedSplit& split, const GroupingResult& grouping, const PatchGrid& grid,
                     const CubeShape& shape);

/// Per cube element, true when its (group, patch) block is masked.
std::vector<bool> masked_elements(const CubeShape& shape, const GroupingResult& grouping, const MaskPlan& plan,
                                  const PatchGrid& grid);

/// Throws ShapeError unless plan, grouping, grid and shape are mutually consistent.
void check_mask_inputs(const CubeShape& shape, const GroupingResult& grouping, const MaskPlan& plan,
                       const PatchGrid& grid);

} // namespace hypermae
