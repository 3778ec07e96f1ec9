#pragma once

#include "hypermae/checkpoint.hpp"
#include "hypermae/dataset.hpp"
#include "hypermae/grouping.hpp"
#include "hypermae/losses.hpp"
#include "hypermae/model.hpp"
#include "hypermae/optim.hpp"

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <vector>

namespace hypermae {

struct TrainConfig {
    std::size_t epochs = 30;
    std::size_t batch = 4;
    AdamWConfig optimizer;
    /// Epochs of the linear weight schedule; default 20% of `epochs` (at least 1).
    std::optional<std::size_t> warmup;
    LossWeights weights_start = kScheduleStart;
    LossWeights weights_target = kScheduleTarget;
    LossTerms terms;
    SsimParams ssim;
    SidParams sid;

    std::size_t warmup_epochs() const;
    void validate() const;
};

/// Reconstruction quality averaged over tiles. The canonical values are
/// computed on the composite (prediction at masked blocks, truth elsewhere):
/// MAE and PSNR over masked elements, SSIM over the whole composite. The
/// `full_*` values score the raw reconstruction of every block.
struct EvalMetrics {
    double mae = 0.0;
    double psnr = 0.0;
    double ssim = 0.0;
    double full_mae = 0.0;
    double full_psnr = 0.0;
    double full_ssim = 0.0;
    std::size_t tiles = 0;
    friend bool operator==(const EvalMetrics&, const EvalMetrics&) = default;
};

/// Row 0 describes the initial state (no training); row e > 0 describes the
/// state after training epoch e-1 with that epoch's schedule weights.
struct EpochMetrics {
    std::size_t epoch = 0;
    LossWeights weights;
    double lr = 0.0;
    double train_total = 0.0;
    double train_mae = 0.0;
    double train_ssim_n = 0.0;
    double train_sid_n = 0.0;
    EvalMetrics eval;
    double seconds = 0.0;      ///< wall time of the epoch's training work
    LossTimings loss_seconds;  ///< mean per-batch loss evaluation time by term
};

struct TrainState {
    ModelConfig model;
    ParameterSet params;
    AdamWState optimizer;
    std::size_t epoch = 0;  ///< completed epochs
    std::uint64_t seed = 0;
    std::vector<EpochMetrics> history;
};

/// Fresh parameters and zero optimizer moments.
TrainState init_train_state(const ModelConfig& model, const GroupingResult& grouping, std::uint64_t seed);

/// Seed of the mask drawn for `tile` in training epoch `epoch`.
std::uint64_t train_mask_seed(std::uint64_t seed, std::size_t epoch, std::size_t tile);
/// Seed of the fixed evaluation mask of `tile`.
std::uint64_t eval_mask_seed(std::uint64_t seed, std::size_t tile);

using Predictor = std::function<ForwardResult(const HyperCube& cube, const MaskPlan& plan)>;

/// Scores any predictor on `ds` with seeded masks at `ratio`.
EvalMetrics evaluate_predictor(const Dataset& ds, const GroupingResult& grouping, const PatchGrid& grid, double ratio,
                               std::uint64_t seed, const SsimParams& ssim, const Predictor& predict);

/// Scores the model held in `state`. `ratio` defaults to the model mask ratio.
EvalMetrics evaluate(const Dataset& ds, const TrainState& state, const GroupingResult& grouping, std::uint64_t seed,
                     std::optional<double> ratio = std::nullopt, const SsimParams& ssim = {});

struct TrainOptions {
    /// Return after this many completed epochs (simulated interruption).
    std::optional<std::size_t> stop_after;
    std::function<void(const EpochMetrics&)> on_epoch;
};

/// Continues training `state` until `cfg.epochs` epochs are complete. Per epoch:
/// seeded shuffle, per-(epoch, tile) masks, composite loss with the scheduled
/// weights, backpropagation and one AdamW step per batch, then evaluation on
/// `val` (on `train` when `val` is empty). Throws ConfigError for an empty
/// train split and NumericError for a non-finite loss.
void train(TrainState& state, const Dataset& train_split, const Dataset& val, const GroupingResult& grouping,
           const TrainConfig& cfg, const TrainOptions& options = {});

/// Batches per epoch for a split of `tiles` tiles.
std::size_t batches_per_epoch(std::size_t tiles, std::size_t batch);

Checkpoint to_checkpoint(const TrainState& state);
/// Overwrites parameters, moments and step of `state` with the checkpoint's.
/// Throws FormatError when names or shapes differ.
void restore_checkpoint(const Checkpoint& ckpt, TrainState& state);

} // namespace hypermae
