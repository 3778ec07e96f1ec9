#include "hypermae/trainer.hpp"

#include "hypermae/errors.hpp"
#include "hypermae/rng.hpp"

#include <chrono>
#include <cmath>
#include <limits>

namespace hypermae {

namespace {

constexpr std::uint64_t kMaskStream = 1;
constexpr std::uint64_t kShuffleStream = 2;
constexpr std::uint64_t kEvalStream = 3;
constexpr std::uint64_t kInitStream = 4;

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

PatchGrid grid_for(const Dataset& ds, const ModelConfig& m) {
    const auto s = ds.shape();
    return make_patch_grid(s.height, s.width, m.patch);
}

std::vector<NamedTensor> named(const ParameterSet& params, const std::vector<std::vector<double>>* source) {
    std::vector<NamedTensor> out;
    for (std::size_t i = 0; i < params.size(); ++i) {
        const auto& p = params[i];
        NamedTensor t{p.name, {}, {}};
        for (auto d : p.shape) t.dims.push_back(static_cast<std::uint32_t>(d));
        const auto& values = source ? (*source)[i] : p.var->value;
        t.data.assign(values.begin(), values.end());
        out.push_back(std::move(t));
    }
    return out;
}

void restore_tensors(const std::vector<NamedTensor>& tensors, const ParameterSet& params,
                     const std::function<std::vector<double>&(std::size_t)>& target) {
    if (tensors.size() != params.size()) throw FormatError("checkpoint tensor count differs from the model");
    for (std::size_t i = 0; i < params.size(); ++i) {
        const auto& t = tensors[i];
        const auto& p = params[i];
        std::vector<std::size_t> dims(t.dims.begin(), t.dims.end());
        if (t.name != p.name || dims != p.shape)
            throw FormatError("checkpoint tensor " + t.name + " does not match model parameter " + p.name);
        auto& dst = target(i);
        dst.assign(t.data.begin(), t.data.end());
    }
}

} // namespace

std::size_t TrainConfig::warmup_epochs() const {
    if (warmup) return *warmup;
    const auto w = static_cast<std::size_t>(std::round(0.2 * static_cast<double>(epochs)));
    return w == 0 ? 1 : w;
}

void TrainConfig::validate() const {
    if (batch == 0) throw ConfigError("/train/batch", "batch size must be positive");
    if (warmup && *warmup == 0) throw ConfigError("/loss/warmup", "warmup must be >= 1");
    if (!terms.mae && !terms.ssim && !terms.sid) throw ConfigError("/loss/terms", "at least one loss term is required");
    optimizer.validate();
    ssim.validate();
    sid.validate();
}

TrainState init_train_state(const ModelConfig& model, const GroupingResult& grouping, std::uint64_t seed) {
    TrainState s;
    s.model = model;
    s.params = init_parameters(model, grouping, rng::derive_seed(seed, kInitStream));
    s.optimizer = make_adamw_state(s.params);
    s.seed = seed;
    return s;
}

std::uint64_t train_mask_seed(std::uint64_t seed, std::size_t epoch, std::size_t tile) {
    return rng::derive_seed(seed, {kMaskStream, epoch, tile});
}

std::uint64_t eval_mask_seed(std::uint64_t seed, std::size_t tile) { return rng::derive_seed(seed, {kEvalStream, tile}); }

std::size_t batches_per_epoch(std::size_t tiles, std::size_t batch) { return batch == 0 ? 0 : (tiles + batch - 1) / batch; }

EvalMetrics evaluate_predictor(const Dataset& ds, const GroupingResult& grouping, const PatchGrid& grid, double ratio,
                               std::uint64_t seed, const SsimParams& ssim_params, const Predictor& predict) {
    EvalMetrics m;
    if (ds.empty()) return m;
    for (std::size_t i = 0; i < ds.tiles.size(); ++i) {
        const auto& cube = ds.tiles[i];
        const MaskPlan plan = sample_mask(grid, grouping.num_groups, ratio, eval_mask_seed(seed, i));
        const ForwardResult out = predict(cube, plan);
        const Volume truth = to_volume(cube);
        const auto masked = masked_elements(cube.shape, grouping, plan, grid);
        double abs_sum = 0.0, sq_sum = 0.0;
        std::size_t count = 0;
        for (std::size_t k = 0; k < masked.size(); ++k) {
            if (!masked[k]) continue;
            const double d = out.prediction.values[k] - truth.values[k];
            abs_sum += std::abs(d);
            sq_sum += d * d;
            ++count;
        }
        m.mae += count ? abs_sum / static_cast<double>(count) : 0.0;
        m.psnr += psnr_from_mse(count ? sq_sum / static_cast<double>(count) : 0.0);
        m.ssim += ssim(truth, out.prediction, ssim_params);
        m.full_mae += mae(out.reconstruction, truth);
        m.full_psnr += psnr(out.reconstruction, truth);
        m.full_ssim += ssim(truth, out.reconstruction, ssim_params);
    }
    const double n = static_cast<double>(ds.tiles.size());
    m.tiles = ds.tiles.size();
    m.mae /= n;
    m.psnr /= n;
    m.ssim /= n;
    m.full_mae /= n;
    m.full_psnr /= n;
    m.full_ssim /= n;
    return m;
}

EvalMetrics evaluate(const Dataset& ds, const TrainState& state, const GroupingResult& grouping, std::uint64_t seed,
                     std::optional<double> ratio, const SsimParams& ssim_params) {
    if (ds.empty()) return {};
    MaskedAutoencoder model(state.model, grouping, grid_for(ds, state.model));
    return evaluate_predictor(ds, grouping, model.grid(), ratio.value_or(state.model.mask_ratio), seed, ssim_params,
                              [&](const HyperCube& cube, const MaskPlan& plan) {
                                  ForwardResult r = model.forward(state.params, cube, plan);
                                  model.discard_trace();
                                  return r;
                              });
}

void train(TrainState& state, const Dataset& train_split, const Dataset& val, const GroupingResult& grouping,
           const TrainConfig& cfg, const TrainOptions& options) {
    if (train_split.empty()) throw ConfigError("/data", "the train split holds no tiles");
    cfg.validate();
    train_split.validate();
    const Dataset& eval_split = val.empty() ? train_split : val;
    MaskedAutoencoder model(state.model, grouping, grid_for(train_split, state.model));
    const std::size_t warmup = cfg.warmup_epochs();
    const std::size_t n = train_split.tiles.size();
    const double nan = std::numeric_limits<double>::quiet_NaN();

    auto eval_now = [&] { return evaluate(eval_split, state, grouping, state.seed, std::nullopt, cfg.ssim); };

    if (state.history.empty()) {
        EpochMetrics row;
        row.epoch = 0;
        row.weights = schedule_weights(0, warmup, cfg.weights_start, cfg.weights_target);
        row.lr = cosine_lr(cfg.optimizer.lr, 0, cfg.epochs);
        row.train_total = row.train_mae = row.train_ssim_n = row.train_sid_n = nan;
        row.eval = eval_now();
        state.history.push_back(row);
        if (options.on_epoch) options.on_epoch(row);
    }

    while (state.epoch < cfg.epochs) {
        if (options.stop_after && state.epoch >= *options.stop_after) return;
        const std::size_t epoch = state.epoch;
        const auto t0 = Clock::now();
        const LossWeights w = schedule_weights(epoch, warmup, cfg.weights_start, cfg.weights_target);
        const double lr = cosine_lr(cfg.optimizer.lr, epoch, cfg.epochs);
        rng::Xoshiro256 gen(rng::derive_seed(state.seed, {kShuffleStream, epoch}));
        const auto order = rng::permutation(n, gen);

        EpochMetrics row;
        row.epoch = epoch + 1;
        row.weights = w;
        row.lr = lr;
        double total = 0, mae_sum = 0, ssim_sum = 0, sid_sum = 0;
        const std::size_t batches = batches_per_epoch(n, cfg.batch);
        for (std::size_t b = 0; b < batches; ++b) {
            const std::size_t begin = b * cfg.batch, end = std::min(n, begin + cfg.batch);
            const double inv = 1.0 / static_cast<double>(end - begin);
            state.params.zero_grad();
            for (std::size_t i = begin; i < end; ++i) {
                const std::size_t tile = order[i];
                const auto& cube = train_split.tiles[tile];
                const MaskPlan plan =
                    sample_mask(model.grid(), grouping.num_groups, state.model.mask_ratio, train_mask_seed(state.seed, epoch, tile));
                const ForwardResult out = model.forward(state.params, cube, plan);
                CompositeLoss loss = composite_loss(out.prediction, to_volume(cube),
                                                    masked_elements(cube.shape, grouping, plan, model.grid()), w,
                                                    cfg.ssim, cfg.sid, cfg.terms);
                if (!std::isfinite(loss.report.total))
                    throw NumericError("non-finite training loss at epoch " + std::to_string(epoch));
                for (auto& g : loss.gradient.values) g *= inv;
                model.backward(loss.gradient);
                const auto& r = loss.report;
                total += r.total;
                mae_sum += r.mae;
                ssim_sum += r.ssim_n;
                sid_sum += r.sid_n;
                row.loss_seconds.mae += r.timings_s.mae;
                row.loss_seconds.ssim += r.timings_s.ssim;
                row.loss_seconds.sid += r.timings_s.sid;
            }
            adamw_step(state.params, state.optimizer, cfg.optimizer, lr, true);
        }
        const double nt = static_cast<double>(n), nb = static_cast<double>(batches);
        row.train_total = total / nt;
        row.train_mae = mae_sum / nt;
        row.train_ssim_n = ssim_sum / nt;
        row.train_sid_n = sid_sum / nt;
        row.loss_seconds.mae /= nb;
        row.loss_seconds.ssim /= nb;
        row.loss_seconds.sid /= nb;
        row.seconds = seconds_since(t0);
        state.epoch = epoch + 1;
        row.eval = eval_now();
        state.history.push_back(row);
        if (options.on_epoch) options.on_epoch(row);
    }
}

Checkpoint to_checkpoint(const TrainState& state) {
    Checkpoint c;
    c.params = named(state.params, nullptr);
    c.first_moments = named(state.params, &state.optimizer.m);
    c.second_moments = named(state.params, &state.optimizer.v);
    c.step = state.optimizer.step;
    c.seed = state.seed;
    return c;
}

void restore_checkpoint(const Checkpoint& ckpt, TrainState& state) {
    auto& params = state.params;
    restore_tensors(ckpt.params, params, [&](std::size_t i) -> std::vector<double>& { return params[i].var->value; });
    state.optimizer = make_adamw_state(params);
    restore_tensors(ckpt.first_moments, params, [&](std::size_t i) -> std::vector<double>& { return state.optimizer.m[i]; });
    restore_tensors(ckpt.second_moments, params, [&](std::size_t i) -> std::vector<double>& { return state.optimizer.v[i]; });
    state.optimizer.step = ckpt.step;
    state.seed = ckpt.seed;
}

} // namespace hypermae
