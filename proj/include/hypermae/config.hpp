#pragma once

#include "hypermae/grouping.hpp"
#include "hypermae/losses.hpp"
#include "hypermae/model.hpp"
#include "hypermae/synthetic.hpp"
#include "hypermae/trainer.hpp"

#include <json.hpp>

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace hypermae {

using json = nlohmann::ordered_json;

struct SyntheticConfig {
    std::size_t tiles = 200;
    std::size_t val_tiles = 40;
    std::size_t size = 16;
    std::size_t channels = 12;
    std::size_t planted_groups = 5;
    std::size_t smoothness = 4;
    double noise_sigma = 0.005;
    double leak = 0.1;
    double common_fraction = 0.8;

    SyntheticSpec spec() const;
};

struct DataConfig {
    std::optional<SyntheticConfig> synthetic;
    std::optional<std::string> manifest;  ///< relative paths resolve against the config file
    std::vector<std::string> paths;       ///< scene files for `ingest`
    std::size_t tile = 16;
    double val_fraction = 0.2;
    float sentinel = -32768.0f;
    std::string normalization = "minmax";
};

struct GroupingConfig {
    std::string strategy = "SCI";  ///< a strategy name or "all" (group command only)
    std::size_t num_groups = 5;
    std::vector<double> sr_boundaries{kSoilBoundariesNm.begin(), kSoilBoundariesNm.end()};
    double vnir_boundary = kVnirSwirBoundaryNm;
    std::size_t restarts = 10;
};

struct MaskingConfig {
    double ratio = 0.75;
    std::size_t patch = 4;
};

struct LossConfig {
    LossTerms terms;
    LossWeights weights_start = kScheduleStart;
    LossWeights weights_target = kScheduleTarget;
    std::optional<std::size_t> warmup;
    SsimParams ssim;
    SidParams sid;
};

struct ModelDims {
    std::size_t embed_dim = 64;
    std::size_t encoder_blocks = 2;
    std::size_t heads = 4;
    std::size_t decoder_dim = 32;
    std::size_t decoder_blocks = 1;
    std::size_t decoder_heads = 4;
    std::size_t mlp_ratio = 4;
};

struct TrainSection {
    std::size_t epochs = 30;
    std::size_t batch = 4;
    AdamWConfig optimizer;
    std::uint64_t seed = 7;
};

struct AblateConfig {
    std::string axis;
    json values = json::array();  ///< empty means the axis defaults
};

/// Every section is optional in the input document; missing keys take the
/// defaults above. Unknown keys raise ConfigError carrying a JSON pointer.
struct RunConfig {
    DataConfig data;
    GroupingConfig grouping;
    MaskingConfig masking;
    LossConfig loss;
    ModelDims model;
    TrainSection train;
    std::optional<AblateConfig> ablate;
    std::filesystem::path base_dir;  ///< directory of the config file

    std::uint64_t seed() const noexcept { return train.seed; }
    ModelConfig model_config(std::size_t groups) const;
    TrainConfig train_config() const;
};

RunConfig parse_config(const json& doc, const std::filesystem::path& base_dir = {});
RunConfig load_config(const std::filesystem::path& path);

/// The fully resolved configuration (defaults filled in). Parsing the result
/// yields an equal configuration.
json config_to_json(const RunConfig& cfg);

/// "MAE", "MAE+SSIM", ... for a term set.
std::string loss_label(const LossTerms& terms);
LossTerms loss_terms_from_label(const std::string& label, const std::string& pointer);

} // namespace hypermae
