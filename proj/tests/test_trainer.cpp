#include "support.hpp"

#include "hypermae/checkpoint.hpp"
#include "hypermae/errors.hpp"
#include "hypermae/synthetic.hpp"
#include "hypermae/trainer.hpp"

#include <doctest.h>

#include <cmath>

using namespace hypermae;

namespace {

struct Rig {
    SyntheticData data = generate_synthetic(make_planted_spec(4, 2), 8, 8, 5, 2);
    GroupingResult grouping = make_grouping(data.truth, Strategy::Sci);
    ModelConfig model;
    TrainConfig cfg;

    Rig() {
        model.embed_dim = 8;
        model.encoder_blocks = 1;
        model.heads = 2;
        model.decoder_dim = 8;
        model.decoder_heads = 2;
        model.groups = 2;
        model.mask_ratio = 0.5;
        cfg.epochs = 4;
        cfg.batch = 3;
        cfg.ssim.window = 5;
    }

    TrainState fresh() const { return init_train_state(model, grouping, 11); }
};

/// Histories compared without their wall-time fields.
void check_same_history(const std::vector<EpochMetrics>& a, const std::vector<EpochMetrics>& b) {
    REQUIRE(a.size() == b.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
        CHECK(a[i].epoch == b[i].epoch);
        CHECK(a[i].weights == b[i].weights);
        CHECK(a[i].lr == b[i].lr);
        CHECK(a[i].eval == b[i].eval);
        if (i > 0) CHECK(a[i].train_total == b[i].train_total);
    }
}

void check_same_params(const ParameterSet& a, const ParameterSet& b) {
    REQUIRE(a.size() == b.size());
    for (std::size_t i = 0; i < a.size(); ++i) CHECK(a[i].var->value == b[i].var->value);
}

} // namespace

TEST_CASE("training is deterministic") {
    Rig rig;
    auto a = rig.fresh(), b = rig.fresh();
    train(a, rig.data.train, rig.data.val, rig.grouping, rig.cfg);
    train(b, rig.data.train, rig.data.val, rig.grouping, rig.cfg);
    check_same_history(a.history, b.history);
    check_same_params(a.params, b.params);
    CHECK(a.history.size() == 5);
    CHECK(a.epoch == 4);
    CHECK(a.optimizer.step == 4 * batches_per_epoch(8, 3));
}

TEST_CASE("recorded weights and learning rates follow their schedules") {
    Rig rig;
    auto s = rig.fresh();
    train(s, rig.data.train, rig.data.val, rig.grouping, rig.cfg);
    for (std::size_t e = 1; e < s.history.size(); ++e) {
        CHECK(s.history[e].weights == schedule_weights(e - 1, rig.cfg.warmup_epochs()));
        CHECK(s.history[e].lr == cosine_lr(rig.cfg.optimizer.lr, e - 1, rig.cfg.epochs));
    }
    CHECK(s.history.back().eval.mae < s.history.front().eval.mae);
}

TEST_CASE("zero epochs evaluate the initial state only") {
    Rig rig;
    rig.cfg.epochs = 0;
    auto s = rig.fresh();
    const auto before = s.params;
    train(s, rig.data.train, rig.data.val, rig.grouping, rig.cfg);
    CHECK(s.history.size() == 1);
    CHECK(s.optimizer.step == 0);
    check_same_params(s.params, before);
    CHECK(std::isfinite(s.history[0].eval.psnr));
    CHECK(s.history[0].eval.ssim < 1.0);
}

TEST_CASE("resuming from a checkpoint reproduces the uninterrupted run") {
    Rig rig;
    auto full = rig.fresh();
    train(full, rig.data.train, rig.data.val, rig.grouping, rig.cfg);

    auto first = rig.fresh();
    TrainOptions stop;
    stop.stop_after = 2;
    train(first, rig.data.train, rig.data.val, rig.grouping, rig.cfg, stop);
    CHECK(first.epoch == 2);
    const auto dir = testing::scratch_dir("resume");
    save_checkpoint(to_checkpoint(first), dir / "c.tmck");

    auto resumed = rig.fresh();
    restore_checkpoint(load_checkpoint(dir / "c.tmck"), resumed);
    resumed.epoch = 2;
    resumed.history = first.history;
    train(resumed, rig.data.train, rig.data.val, rig.grouping, rig.cfg);
    check_same_history(full.history, resumed.history);
    check_same_params(full.params, resumed.params);
}

TEST_CASE("restored checkpoints evaluate identically") {
    Rig rig;
    rig.cfg.epochs = 1;
    auto s = rig.fresh();
    train(s, rig.data.train, rig.data.val, rig.grouping, rig.cfg);
    auto r = rig.fresh();
    restore_checkpoint(decode_checkpoint(encode_checkpoint(to_checkpoint(s))), r);
    CHECK(evaluate(rig.data.val, s, rig.grouping, 3) == evaluate(rig.data.val, r, rig.grouping, 3));

    auto wrong = to_checkpoint(s);
    wrong.params[0].dims[0] += 1;
    CHECK_THROWS_AS(restore_checkpoint(wrong, r), FormatError);
}

TEST_CASE("a perfect predictor scores the identity bound") {
    Rig rig;
    const auto grid = make_patch_grid(8, 8, 4);
    const Predictor copy = [](const HyperCube& cube, const MaskPlan&) {
        return ForwardResult{to_volume(cube), to_volume(cube)};
    };
    const auto m = evaluate_predictor(rig.data.val, rig.grouping, grid, 0.75, 1, rig.cfg.ssim, copy);
    CHECK(m.mae == 0.0);
    CHECK(m.ssim == 1.0);
    CHECK(std::isinf(m.psnr));
    CHECK(m.tiles == 2);
}

TEST_CASE("training input errors") {
    Rig rig;
    auto s = rig.fresh();
    Dataset empty;
    CHECK_THROWS_AS(train(s, empty, rig.data.val, rig.grouping, rig.cfg), ConfigError);
    rig.cfg.batch = 0;
    CHECK_THROWS_AS(rig.cfg.validate(), ConfigError);
}

TEST_CASE("mask seeds differ by epoch and tile") {
    CHECK(train_mask_seed(7, 0, 0) != train_mask_seed(7, 1, 0));
    CHECK(train_mask_seed(7, 0, 0) != train_mask_seed(7, 0, 1));
    CHECK(eval_mask_seed(7, 0) != train_mask_seed(7, 0, 0));
    CHECK(eval_mask_seed(7, 3) == eval_mask_seed(7, 3));
}
