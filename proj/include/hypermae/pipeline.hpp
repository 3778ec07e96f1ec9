#pragma once

#include "hypermae/config.hpp"
#include "hypermae/dataset.hpp"
#include "hypermae/grouping.hpp"
#include "hypermae/trainer.hpp"

#include <exception>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

/// Command implementations behind the `hypermae` executable.
///
/// Every report embeds the resolved run configuration and seed. JSON reports
/// carry them as "config" and "seed"; CSV tables start with one comment line
/// `# seed=<n> config=<compact json>` followed by the column header.
/// Wall-time fields are named `seconds_per_epoch` or end in `_s`.
namespace hypermae {

struct CommandOptions {
    RunConfig config;
    std::filesystem::path out = ".";
    std::ostream* log = nullptr;
    std::optional<std::filesystem::path> resume;       ///< train: checkpoint to continue from
    std::optional<std::filesystem::path> checkpoint;   ///< eval: checkpoint to score
    std::optional<std::filesystem::path> grouping_file;  ///< train: grouping JSON from `group`
    std::optional<std::string> axis;                   ///< ablate: overrides /ablate/axis
    std::optional<std::size_t> stop_after;             ///< train: stop after this many epochs
    std::optional<double> eval_ratio;                  ///< eval: mask ratio (default model ratio)
};

struct LoadedData {
    Dataset train;
    Dataset val;
    Dataset test;
    std::optional<std::vector<std::size_t>> truth;  ///< planted grouping of synthetic data
};

/// Synthetic data are generated in memory; a manifest is read from disk.
LoadedData load_data(const RunConfig& cfg);

GroupingResult build_grouping(const RunConfig& cfg, const Dataset& train, Strategy strategy, std::size_t groups);

/// Trains from scratch on `data` and returns the final state.
TrainState run_training(const RunConfig& cfg, const LoadedData& data, const GroupingResult& grouping,
                        const TrainOptions& options = {});

void cmd_synth(const CommandOptions& opt);
void cmd_ingest(const CommandOptions& opt);
void cmd_group(const CommandOptions& opt);
void cmd_mask_preview(const CommandOptions& opt);
void cmd_train(const CommandOptions& opt);
void cmd_eval(const CommandOptions& opt);
void cmd_ablate(const CommandOptions& opt);
void cmd_report(const CommandOptions& opt);

/// Column header of the ablation table for `axis`. Throws ConfigError for an unknown axis.
std::vector<std::string> ablation_columns(const std::string& axis);
/// Column header of the per-epoch metrics table.
std::vector<std::string> metrics_columns();

/// 0 success, 2 configuration error, 3 data error, 4 numeric failure, 1 otherwise.
int exit_code(const std::exception& e) noexcept;

bool is_wall_time_field(std::string_view name) noexcept;
/// Copy of `j` with every wall-time field replaced by null.
json mask_wall_time(json j);
/// Copy of a CSV table with every wall-time column blanked.
std::string mask_wall_time_csv(const std::string& csv);

} // namespace hypermae
