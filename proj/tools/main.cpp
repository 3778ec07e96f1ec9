#include "hypermae/errors.hpp"
#include "hypermae/pipeline.hpp"

#include <CLI11.hpp>

#include <functional>
#include <iostream>
#include <map>

namespace {

struct Args {
    std::string config;
    std::optional<std::uint64_t> seed;
    std::string out = ".";
    std::string resume;
    std::string checkpoint;
    std::string grouping;
    std::string axis;
    std::optional<std::size_t> stop_after;
    std::optional<double> ratio;
};

hypermae::CommandOptions resolve(const Args& a) {
    hypermae::CommandOptions opt;
    opt.config = a.config.empty() ? hypermae::parse_config(hypermae::json::object()) : hypermae::load_config(a.config);
    if (a.seed) opt.config.train.seed = *a.seed;
    opt.out = a.out;
    opt.log = &std::cerr;
    if (!a.resume.empty()) opt.resume = a.resume;
    if (!a.checkpoint.empty()) opt.checkpoint = a.checkpoint;
    if (!a.grouping.empty()) opt.grouping_file = a.grouping;
    if (!a.axis.empty()) opt.axis = a.axis;
    opt.stop_after = a.stop_after;
    opt.eval_ratio = a.ratio;
    return opt;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Grouped masked autoencoder for hyperspectral tiles"};
    app.require_subcommand(1);
    Args args;

    using Command = void (*)(const hypermae::CommandOptions&);
    const std::map<std::string, std::pair<Command, std::string>> commands = {
        {"synth", {hypermae::cmd_synth, "Generate a synthetic dataset with a planted grouping"}},
        {"ingest", {hypermae::cmd_ingest, "Tile, split and normalize HSC scenes"}},
        {"group", {hypermae::cmd_group, "Group channels and score the groupings"}},
        {"mask-preview", {hypermae::cmd_mask_preview, "Show the mask of the first tile"}},
        {"train", {hypermae::cmd_train, "Pretrain the masked autoencoder"}},
        {"eval", {hypermae::cmd_eval, "Score a checkpoint on held-out tiles"}},
        {"ablate", {hypermae::cmd_ablate, "Sweep one axis and tabulate the results"}},
        {"report", {hypermae::cmd_report, "Summarize the reports in the output directory"}},
    };

    for (const auto& [name, entry] : commands) {
        CLI::App* sub = app.add_subcommand(name, entry.second);
        sub->add_option("-c,--config", args.config, "JSON run configuration")->check(CLI::ExistingFile);
        sub->add_option("--seed", args.seed, "Override the configured seed");
        sub->add_option("-o,--out", args.out, "Output directory");
        if (name == "train") {
            sub->add_option("--resume", args.resume, "Checkpoint to continue from")->check(CLI::ExistingFile);
            sub->add_option("--stop-after", args.stop_after, "Stop after this many completed epochs");
        }
        if (name == "train" || name == "mask-preview")
            sub->add_option("--grouping", args.grouping, "Grouping JSON written by the group command")
                ->check(CLI::ExistingFile);
        if (name == "eval") {
            sub->add_option("--checkpoint", args.checkpoint, "Checkpoint to score (default <out>/checkpoint.tmck)");
            sub->add_option("--ratio", args.ratio, "Mask ratio used for scoring");
        }
        if (name == "ablate") sub->add_option("--axis", args.axis, "mask_ratio, num_groups, grouping_strategy or loss_combo");
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : 2;
    }

    try {
        const std::string name = app.get_subcommands().front()->get_name();
        commands.at(name).first(resolve(args));
        return 0;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return hypermae::exit_code(e);
    }
}
