#include "hypermae/config.hpp"
#include "hypermae/errors.hpp"

#include <doctest.h>

using namespace hypermae;

namespace {

std::string pointer_of(const json& doc) {
    try {
        parse_config(doc);
    } catch (const ConfigError& e) {
        return e.pointer();
    }
    return "<accepted>";
}

} // namespace

TEST_CASE("defaults") {
    const auto c = parse_config(json::object());
    CHECK(c.seed() == 7);
    CHECK(c.train.epochs == 30);
    CHECK(c.masking.ratio == 0.75);
    CHECK(c.masking.patch == 4);
    CHECK(c.grouping.strategy == "SCI");
    CHECK(c.grouping.num_groups == 5);
    CHECK(c.train.optimizer.lr == 1e-3);
    CHECK(c.loss.weights_target == kScheduleTarget);
    const auto tc = c.train_config();
    CHECK(tc.warmup_epochs() == 6);
    CHECK(c.model_config(5).embed_dim == 64);
}

TEST_CASE("resolved config round trips") {
    const json doc = json::parse(R"({
        "data": {"synthetic": {"tiles": 12, "noise_sigma": 0.01}},
        "grouping": {"strategy": "KMEANS", "num_groups": 3},
        "loss": {"terms": ["MAE", "SID"], "warmup": 4, "ssim": {"window": 5}},
        "train": {"epochs": 2, "seed": 99, "lr": 0.002}
    })");
    const auto c = parse_config(doc);
    CHECK(c.data.synthetic->tiles == 12);
    CHECK(c.loss.terms == LossTerms{true, false, true});
    CHECK(c.loss.ssim.window == 5);
    CHECK(c.train.optimizer.lr == 0.002);
    const json resolved = config_to_json(c);
    CHECK(config_to_json(parse_config(resolved)) == resolved);
    CHECK(resolved["train"]["seed"] == 99);
}

TEST_CASE("unknown keys and bad values carry json pointers") {
    CHECK(pointer_of(json::parse(R"({"trian": {}})")) == "/trian");
    CHECK(pointer_of(json::parse(R"({"train": {"lrr": 1}})")) == "/train/lrr");
    CHECK(pointer_of(json::parse(R"({"loss": {"ssim": {"windw": 7}}})")) == "/loss/ssim/windw");
    CHECK(pointer_of(json::parse(R"({"data": {"synthetic": {"tiles": "many"}}})")) == "/data/synthetic/tiles");
    CHECK(pointer_of(json::parse(R"({"grouping": {"num_groups": 0}})")) == "/grouping/num_groups");
    CHECK(pointer_of(json::parse(R"({"masking": {"ratio": 1.5}})")) == "/masking/ratio");
    CHECK(pointer_of(json::parse(R"({"model": {"heads": 3}})")).rfind("/model", 0) == 0);
    CHECK(pointer_of(json::parse(R"({"loss": {"terms": ["MAE", "TV"]}})")).rfind("/loss/terms", 0) == 0);
    CHECK(pointer_of(json::parse(R"({"grouping": {"strategy": "PCA"}})")) == "/grouping/strategy");
}

TEST_CASE("loss labels") {
    CHECK(loss_label(LossTerms{}) == "MAE+SSIM+SID");
    CHECK(loss_label(LossTerms{true, false, false}) == "MAE");
    CHECK(loss_terms_from_label("MAE+SID", "/x") == LossTerms{true, false, true});
    CHECK_THROWS_AS(loss_terms_from_label("MAE+FOO", "/x"), ConfigError);
}
