#pragma once

#include "hypermae/autodiff.hpp"
#include "hypermae/grouping.hpp"
#include "hypermae/hypercube.hpp"
#include "hypermae/masking.hpp"

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace hypermae {

struct ModelConfig {
    std::size_t patch = 4;
    std::size_t embed_dim = 64;
    std::size_t encoder_blocks = 2;
    std::size_t heads = 4;
    std::size_t decoder_dim = 32;
    std::size_t decoder_blocks = 1;
    std::size_t decoder_heads = 4;
    std::size_t groups = 5;
    std::size_t mlp_ratio = 4;
    double mask_ratio = 0.75;

    /// Throws ConfigError (with a /model/... pointer) for inconsistent dimensions.
    void validate() const;
    friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

/// A named trainable tensor. `shape` is the logical shape written to
/// checkpoints; the autodiff leaf stores it as a rows x cols matrix.
struct Parameter {
    std::string name;
    std::vector<std::size_t> shape;
    ad::Var var;
    bool decay = false;  ///< receives decoupled weight decay
};

/// Ordered, uniquely named parameters. Copies are deep.
class ParameterSet {
public:
    ParameterSet() = default;
    ParameterSet(const ParameterSet& other);
    ParameterSet& operator=(const ParameterSet& other);
    ParameterSet(ParameterSet&&) noexcept = default;
    ParameterSet& operator=(ParameterSet&&) noexcept = default;

    /// Throws ConfigError on a duplicate name.
    ad::Var add(std::string name, std::vector<std::size_t> shape, std::vector<double> values, bool decay);
    const ad::Var& get(const std::string& name) const;
    const Parameter* find(const std::string& name) const;

    std::size_t size() const noexcept { return params_.size(); }
    const Parameter& operator[](std::size_t i) const { return params_[i]; }
    auto begin() const noexcept { return params_.begin(); }
    auto end() const noexcept { return params_.end(); }

    std::size_t element_count() const;
    void zero_grad();

private:
    std::vector<Parameter> params_;
};

/// Seeded initialization: Xavier-uniform linear weights, zero biases, unit
/// layer-norm gains, N(0, 0.02^2) group embeddings and mask token.
ParameterSet init_parameters(const ModelConfig& config, const GroupingResult& grouping, std::uint64_t seed);

/// Fixed 2D sin-cos embedding of a rows x cols patch grid, one row of `dim`
/// values per patch (row-major patch order). dim must be divisible by 4.
std::vector<double> sincos_2d(std::size_t rows, std::size_t cols, std::size_t dim);

/// Flattened P x P x |C_g| block of every (patch, group) pair, row p*G + g.
struct TokenBlocks {
    std::size_t patches = 0;
    std::size_t groups = 0;
    std::vector<std::vector<double>> rows;
};

TokenBlocks extract_tokens(const HyperCube& cube, const GroupingResult& grouping, const PatchGrid& grid);

/// Projects every (patch, group) block with its group's linear map; returns a
/// (patches * G) x D matrix in (patch, group) order. Throws ShapeError on mismatch.
std::vector<double> tokenize(const HyperCube& cube, const GroupingResult& grouping, const PatchGrid& grid,
                             const ParameterSet& params);

/// Adds the spatial sin-cos embedding of each token's patch and the learned
/// embedding of its group to a (patches * G) x dim matrix in (patch, group) order.
std::vector<double> add_positions(std::vector<double> tokens, const PatchGrid& grid, std::size_t groups,
                                  const std::vector<double>& group_embedding, std::size_t dim);

struct ForwardResult {
    Volume prediction;      ///< model output at masked blocks, input copied at visible blocks
    Volume reconstruction;  ///< model output at every block
};

/// Grouped masked autoencoder. The encoder sees visible tokens only; the
/// decoder fills masked positions with a shared mask token.
class MaskedAutoencoder {
public:
    MaskedAutoencoder(ModelConfig config, GroupingResult grouping, PatchGrid grid);

    const ModelConfig& config() const noexcept { return config_; }
    const GroupingResult& grouping() const noexcept { return grouping_; }
    const PatchGrid& grid() const noexcept { return grid_; }

    /// Records a trace for backward. Throws ConfigError when the grouping or
    /// plan disagrees with the config, ShapeError when the cube does.
    ForwardResult forward(const ParameterSet& params, const HyperCube& cube, const MaskPlan& plan);

    /// Accumulates d(loss)/d(params) into the parameter gradients given
    /// d(loss)/d(prediction). Visible elements carry no gradient. Consumes the
    /// trace; throws TraceError when there is none.
    void backward(const Volume& grad_prediction);

    /// Drops the recorded trace (inference-only use of forward).
    void discard_trace() noexcept;

private:
    ModelConfig config_;
    GroupingResult grouping_;
    PatchGrid grid_;
    std::vector<std::vector<std::size_t>> members_;
    std::vector<double> enc_pos_;
    std::vector<double> dec_pos_;

    ad::Tape tape_;
    std::vector<ad::Var> heads_;  ///< per-group head output, rows = patches
    std::optional<std::vector<std::vector<bool>>> trace_flags_;  ///< masked[g][patch] of the traced plan
    CubeShape trace_shape_;
};

} // namespace hypermae
