#include "hypermae/pipeline.hpp"

#include "hypermae/checkpoint.hpp"
#include "hypermae/errors.hpp"
#include "hypermae/rng.hpp"
#include "hypermae/spectral_stats.hpp"
#include "hypermae/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <numeric>
#include <ostream>
#include <sstream>

namespace hypermae {

namespace fs = std::filesystem;

namespace {

constexpr std::uint64_t kIngestStream = 11;
constexpr std::uint64_t kGroupingStream = 12;

constexpr Strategy kAllStrategies[] = {Strategy::KMeans, Strategy::Hac, Strategy::Sci, Strategy::VnirSwir,
                                       Strategy::SoilReflectance};

void log_line(const CommandOptions& opt, const std::string& line) {
    if (opt.log) *opt.log << line << '\n' << std::flush;
}

fs::path resolve(const RunConfig& cfg, const std::string& p) {
    const fs::path path(p);
    return path.is_absolute() || cfg.base_dir.empty() ? path : cfg.base_dir / path;
}

json header(const RunConfig& cfg) { return json{{"seed", cfg.seed()}, {"config", config_to_json(cfg)}}; }

std::string format_number(double v) {
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.9g", v);
    return buf;
}

double number_or_nan(const json& j) {
    return j.is_number() ? j.get<double>() : std::numeric_limits<double>::quiet_NaN();
}

std::string csv_cell(const json& v) {
    if (v.is_string()) {
        const auto s = v.get<std::string>();
        return s.find_first_of(",\"\n") == std::string::npos ? s : "\"" + s + "\"";
    }
    if (v.is_number_float()) return format_number(v.get<double>());
    if (v.is_number()) return v.dump();
    if (v.is_boolean()) return v.get<bool>() ? "true" : "false";
    if (v.is_null()) return "nan";
    return v.dump();
}

/// A report table emitted both as CSV and as JSON.
struct Table {
    std::vector<std::string> columns;
    std::vector<std::vector<json>> rows;

    void add(std::vector<json> row) {
        if (row.size() != columns.size()) throw ShapeError("table row width does not match its header");
        rows.push_back(std::move(row));
    }

    std::string csv(const RunConfig& cfg) const {
        std::ostringstream out;
        out << "# seed=" << cfg.seed() << " config=" << config_to_json(cfg).dump() << '\n';
        for (std::size_t i = 0; i < columns.size(); ++i) out << (i ? "," : "") << columns[i];
        out << '\n';
        for (const auto& r : rows) {
            for (std::size_t i = 0; i < r.size(); ++i) out << (i ? "," : "") << csv_cell(r[i]);
            out << '\n';
        }
        return out.str();
    }

    json to_json() const {
        json j = {{"columns", columns}, {"rows", json::array()}};
        for (const auto& r : rows) j["rows"].push_back(r);
        return j;
    }
};

void write_json(const fs::path& path, const json& j) { write_file_atomic(path, j.dump(2) + "\n"); }

json read_json(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path.string());
    try {
        return json::parse(in);
    } catch (const json::exception& e) {
        throw FormatError("malformed JSON in " + path.string() + ": " + e.what());
    }
}

json grouping_json(const GroupingResult& g) {
    return {{"strategy", to_string(g.strategy)},
            {"num_groups", g.num_groups},
            {"assignment", g.assignment},
            {"group_sizes", g.group_sizes},
            {"warning", g.warning}};
}

GroupingResult grouping_from_json(const json& j, const std::string& where) {
    try {
        const auto labels = j.at("assignment").get<std::vector<std::size_t>>();
        auto g = make_grouping(labels, strategy_from_string(j.at("strategy").get<std::string>()));
        g.warning = j.value("warning", false);
        return g;
    } catch (const json::exception& e) {
        throw FormatError("malformed grouping in " + where + ": " + e.what());
    }
}

json eval_json(const EvalMetrics& m) {
    return {{"mae", m.mae},           {"psnr", m.psnr},           {"ssim", m.ssim},  {"full_mae", m.full_mae},
            {"full_psnr", m.full_psnr}, {"full_ssim", m.full_ssim}, {"tiles", m.tiles}};
}

EvalMetrics eval_from_json(const json& j) {
    EvalMetrics m;
    m.mae = number_or_nan(j.at("mae"));
    m.psnr = number_or_nan(j.at("psnr"));
    m.ssim = number_or_nan(j.at("ssim"));
    m.full_mae = number_or_nan(j.at("full_mae"));
    m.full_psnr = number_or_nan(j.at("full_psnr"));
    m.full_ssim = number_or_nan(j.at("full_ssim"));
    m.tiles = j.at("tiles").get<std::size_t>();
    return m;
}

json epoch_json(const EpochMetrics& m) {
    return {{"epoch", m.epoch},
            {"weights", json::array({m.weights.eta, m.weights.lambda, m.weights.mu})},
            {"lr", m.lr},
            {"train_total", m.train_total},
            {"train_mae", m.train_mae},
            {"train_ssim_n", m.train_ssim_n},
            {"train_sid_n", m.train_sid_n},
            {"eval", eval_json(m.eval)},
            {"seconds_per_epoch", m.seconds},
            {"loss_mae_s", m.loss_seconds.mae},
            {"loss_ssim_s", m.loss_seconds.ssim},
            {"loss_sid_s", m.loss_seconds.sid}};
}

EpochMetrics epoch_from_json(const json& j) {
    EpochMetrics m;
    m.epoch = j.at("epoch").get<std::size_t>();
    const auto& w = j.at("weights");
    m.weights = {w.at(0).get<double>(), w.at(1).get<double>(), w.at(2).get<double>()};
    m.lr = number_or_nan(j.at("lr"));
    m.train_total = number_or_nan(j.at("train_total"));
    m.train_mae = number_or_nan(j.at("train_mae"));
    m.train_ssim_n = number_or_nan(j.at("train_ssim_n"));
    m.train_sid_n = number_or_nan(j.at("train_sid_n"));
    m.eval = eval_from_json(j.at("eval"));
    m.seconds = number_or_nan(j.at("seconds_per_epoch"));
    m.loss_seconds = {number_or_nan(j.at("loss_mae_s")), number_or_nan(j.at("loss_ssim_s")),
                      number_or_nan(j.at("loss_sid_s"))};
    return m;
}

Table metrics_table(const std::vector<EpochMetrics>& history) {
    Table t{metrics_columns(), {}};
    for (const auto& m : history)
        t.add({m.epoch, m.weights.eta, m.weights.lambda, m.weights.mu, m.lr, m.train_total, m.train_mae,
               m.train_ssim_n, m.train_sid_n, m.eval.mae, m.eval.psnr, m.eval.ssim, m.eval.full_mae,
               m.eval.full_psnr, m.eval.full_ssim, m.seconds, m.loss_seconds.mae, m.loss_seconds.ssim,
               m.loss_seconds.sid});
    return t;
}

std::string basis(Strategy s) {
    switch (s) {
    case Strategy::KMeans:
    case Strategy::Hac: return "statistical clustering";
    case Strategy::Sci: return "spatial-spectral similarity";
    case Strategy::VnirSwir: return "physical sensor ranges";
    case Strategy::SoilReflectance: return "domain knowledge";
    }
    return "";
}

Strategy single_strategy(const RunConfig& cfg) {
    if (cfg.grouping.strategy == "all")
        throw ConfigError("/grouping/strategy", "this command needs a single strategy, not \"all\"");
    return strategy_from_string(cfg.grouping.strategy);
}

GroupingResult grouping_for(const CommandOptions& opt, const LoadedData& data) {
    const auto& cfg = opt.config;
    if (!opt.grouping_file) return build_grouping(cfg, data.train, single_strategy(cfg), cfg.grouping.num_groups);
    GroupingResult g = grouping_from_json(read_json(*opt.grouping_file), opt.grouping_file->string());
    if (g.channels() != data.train.shape().channels)
        throw ConfigError("/grouping", "grouping covers " + std::to_string(g.channels()) + " channels, data has " +
                                           std::to_string(data.train.shape().channels));
    return g;
}

const Dataset& eval_split(const LoadedData& data) { return data.val.empty() ? data.train : data.val; }

double mean_seconds_per_epoch(const std::vector<EpochMetrics>& h) {
    double s = 0.0;
    std::size_t n = 0;
    for (const auto& m : h)
        if (m.epoch > 0) {
            s += m.seconds;
            ++n;
        }
    return n ? s / static_cast<double>(n) : 0.0;
}

LossTimings mean_loss_seconds(const std::vector<EpochMetrics>& h) {
    LossTimings t;
    std::size_t n = 0;
    for (const auto& m : h)
        if (m.epoch > 0) {
            t.mae += m.loss_seconds.mae;
            t.ssim += m.loss_seconds.ssim;
            t.sid += m.loss_seconds.sid;
            ++n;
        }
    if (n) {
        t.mae /= static_cast<double>(n);
        t.ssim /= static_cast<double>(n);
        t.sid /= static_cast<double>(n);
    }
    return t;
}

void write_manifest_for(const LoadedData& data, const fs::path& out) {
    Manifest m;
    m.tile_shape = data.train.shape();
    m.wavelengths = data.train.wavelengths();
    m.normalization = data.train.normalization;
    for (const auto* ds : {&data.train, &data.val, &data.test}) {
        if (ds->empty()) continue;
        const std::string split(to_string(ds->split));
        auto names = write_tiles(*ds, out / "tiles", split);
        for (auto& n : names) n = "tiles/" + n;
        m.splits[split] = std::move(names);
    }
    write_manifest(m, out / "manifest.json");
}

json values_or(const RunConfig& cfg, json defaults) {
    if (cfg.ablate && !cfg.ablate->values.empty()) return cfg.ablate->values;
    return defaults;
}

} // namespace

std::vector<std::string> metrics_columns() {
    return {"epoch",         "eta",           "lambda",         "mu",          "lr",
            "train_total",   "train_mae",     "train_ssim_n",   "train_sid_n", "eval_mae",
            "eval_psnr",     "eval_ssim",     "eval_full_mae",  "eval_full_psnr", "eval_full_ssim",
            "seconds_per_epoch", "loss_mae_s", "loss_ssim_s",   "loss_sid_s"};
}

std::vector<std::string> ablation_columns(const std::string& axis) {
    if (axis == "mask_ratio")
        return {"pretrain_mask_ratio", "mae_at_pmr", "psnr_at_pmr", "ssim_at_pmr", "mae_at_75", "psnr_at_75", "ssim_at_75"};
    if (axis == "num_groups") return {"pretrain_mask_ratio", "groups", "mae", "psnr", "ssim", "seconds_per_epoch"};
    if (axis == "grouping_strategy") return {"strategy", "groups", "mae", "psnr", "ssim"};
    if (axis == "loss_combo")
        return {"loss", "mae", "psnr", "ssim", "loss_mae_s", "loss_ssim_s", "loss_sid_s", "loss_batch_s"};
    throw ConfigError("/ablate/axis", "unknown ablation axis \"" + axis +
                                          "\" (expected mask_ratio, num_groups, grouping_strategy or loss_combo)");
}

LoadedData load_data(const RunConfig& cfg) {
    LoadedData d;
    if (cfg.data.manifest) {
        const fs::path path = resolve(cfg, *cfg.data.manifest);
        const Manifest m = read_manifest(path);
        d.train = load_split(m, path, Split::Train);
        d.val = load_split(m, path, Split::Val);
        d.test = load_split(m, path, Split::Test);
        const fs::path truth = path.parent_path() / "truth.json";
        if (fs::exists(truth)) d.truth = read_json(truth).at("assignment").get<std::vector<std::size_t>>();
    } else if (cfg.data.synthetic) {
        const auto& s = *cfg.data.synthetic;
        auto syn = generate_synthetic(s.spec(), s.tiles, s.size, cfg.seed(), s.val_tiles);
        d.train = std::move(syn.train);
        d.val = std::move(syn.val);
        d.truth = std::move(syn.truth);
    } else {
        throw ConfigError("/data", "needs either /data/synthetic or /data/manifest");
    }
    if (d.train.empty()) throw NoTiles("the train split holds no tiles");
    return d;
}

GroupingResult build_grouping(const RunConfig& cfg, const Dataset& train, Strategy strategy, std::size_t groups) {
    const auto& gc = cfg.grouping;
    auto wavelengths = [&]() -> std::span<const float> {
        const auto& wl = train.wavelengths();
        if (!wl) throw MissingWavelengths(std::string(to_string(strategy)) + " grouping needs band wavelengths");
        return *wl;
    };
    switch (strategy) {
    case Strategy::Sci: return group_sci(sci_matrix(mean_reflectance(train)), groups);
    case Strategy::KMeans:
        return group_kmeans(feature_matrix(compute_channel_stats(train)), groups,
                            rng::derive_seed(cfg.seed(), kGroupingStream), gc.restarts);
    case Strategy::Hac: return group_hac(feature_matrix(compute_channel_stats(train)), groups);
    case Strategy::VnirSwir: return group_vnir_swir(wavelengths(), gc.vnir_boundary);
    case Strategy::SoilReflectance: return group_soil_reflectance(wavelengths(), gc.sr_boundaries);
    }
    throw ConfigError("/grouping/strategy", "unknown strategy");
}

TrainState run_training(const RunConfig& cfg, const LoadedData& data, const GroupingResult& grouping,
                        const TrainOptions& options) {
    TrainState state = init_train_state(cfg.model_config(grouping.num_groups), grouping, cfg.seed());
    train(state, data.train, data.val, grouping, cfg.train_config(), options);
    return state;
}

void cmd_synth(const CommandOptions& opt) {
    const auto& cfg = opt.config;
    if (!cfg.data.synthetic) throw ConfigError("/data/synthetic", "the synth command needs a synthetic section");
    if (cfg.data.manifest) throw ConfigError("/data/manifest", "synth writes a manifest; remove /data/manifest");
    const LoadedData data = load_data(cfg);
    fs::create_directories(opt.out);
    write_manifest_for(data, opt.out);
    json truth = header(cfg);
    truth["assignment"] = *data.truth;
    truth["num_groups"] = cfg.data.synthetic->planted_groups;
    write_json(opt.out / "truth.json", truth);
    log_line(opt, "synth: " + std::to_string(data.train.tiles.size()) + " train and " +
                      std::to_string(data.val.tiles.size()) + " val tiles in " + opt.out.string());
}

void cmd_ingest(const CommandOptions& opt) {
    const auto& cfg = opt.config;
    if (cfg.data.paths.empty()) throw ConfigError("/data/paths", "ingest needs at least one scene file");
    std::vector<HyperCube> tiles;
    for (const auto& p : cfg.data.paths) {
        const HyperCube scene = drop_sentinel_channels(read_hsc(resolve(cfg, p)), cfg.data.sentinel);
        for (auto& t : tile_scene(scene, cfg.data.tile)) tiles.push_back(std::move(t));
    }
    rng::Xoshiro256 gen(rng::derive_seed(cfg.seed(), kIngestStream));
    auto order = rng::permutation(tiles.size(), gen);
    const auto n_val = static_cast<std::size_t>(std::round(cfg.data.val_fraction * static_cast<double>(tiles.size())));
    if (n_val >= tiles.size()) throw NoTiles("val_fraction leaves no train tiles");
    std::vector<std::size_t> val_idx(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_val));
    std::sort(val_idx.begin(), val_idx.end());
    Dataset train, val;
    train.split = Split::Train;
    val.split = Split::Val;
    for (std::size_t i = 0; i < tiles.size(); ++i)
        (std::binary_search(val_idx.begin(), val_idx.end(), i) ? val : train).tiles.push_back(tiles[i]);
    train.validate();
    LoadedData data;
    data.train = normalize_dataset(train);
    data.val = apply_normalization(val, data.train.normalization);
    fs::create_directories(opt.out);
    write_manifest_for(data, opt.out);
    log_line(opt, "ingest: " + std::to_string(data.train.tiles.size()) + " train and " +
                      std::to_string(data.val.tiles.size()) + " val tiles in " + opt.out.string());
}

void cmd_group(const CommandOptions& opt) {
    const auto& cfg = opt.config;
    const LoadedData data = load_data(cfg);
    std::vector<Strategy> strategies;
    if (cfg.grouping.strategy == "all") strategies.assign(std::begin(kAllStrategies), std::end(kAllStrategies));
    else strategies.push_back(strategy_from_string(cfg.grouping.strategy));

    const FeatureMatrix features = feature_matrix(compute_channel_stats(data.train));
    fs::create_directories(opt.out);
    Table table{{"strategy", "num_groups", "silhouette", "ari", "basis"}, {}};
    json results = json::array();
    for (Strategy s : strategies) {
        const GroupingResult g = build_grouping(cfg, data.train, s, cfg.grouping.num_groups);
        double score = std::numeric_limits<double>::quiet_NaN();
        try {
            score = silhouette_score(features, g);
        } catch (const UndefinedScore&) {
        }
        const double ari = data.truth ? adjusted_rand_index(g.assignment, *data.truth)
                                      : std::numeric_limits<double>::quiet_NaN();
        json r = grouping_json(g);
        r["silhouette"] = score;
        r["ari"] = ari;
        results.push_back(r);
        table.add({std::string(to_string(s)), g.num_groups, score, ari, basis(s)});
        log_line(opt, "group: " + std::string(to_string(s)) + " -> " + std::to_string(g.num_groups) +
                          " groups, silhouette " + format_number(score));
        if (strategies.size() == 1) {
            json single = header(cfg);
            single.update(grouping_json(g));
            write_json(opt.out / "grouping.json", single);
        }
    }
    json doc = header(cfg);
    doc["results"] = results;
    doc["silhouette"] = table.to_json();
    write_json(opt.out / "groupings.json", doc);
    write_file_atomic(opt.out / "silhouette.csv", table.csv(cfg));
    write_sci_csv(sci_matrix(mean_reflectance(data.train)), opt.out / "sci_matrix.csv");
}

void cmd_mask_preview(const CommandOptions& opt) {
    const auto& cfg = opt.config;
    const LoadedData data = load_data(cfg);
    const GroupingResult g = grouping_for(opt, data);
    const auto shape = data.train.shape();
    const PatchGrid grid = make_patch_grid(shape.height, shape.width, cfg.masking.patch);
    const MaskPlan plan = sample_mask(grid, g.num_groups, cfg.masking.ratio, eval_mask_seed(cfg.seed(), 0));
    const auto flags = plan.masked_flags();

    Table table{{"group", "patch", "row", "col", "masked"}, {}};
    json groups = json::array();
    for (std::size_t k = 0; k < g.num_groups; ++k) {
        groups.push_back({{"group", k}, {"channels", g.members(k)}, {"masked", plan.masked[k]}, {"visible", plan.visible[k]}});
        std::string art = "group " + std::to_string(k) + ":";
        for (std::size_t p = 0; p < grid.num_patches(); ++p) {
            table.add({k, p, p / grid.cols, p % grid.cols, flags[k][p] ? 1 : 0});
            if (p % grid.cols == 0) art += "\n  ";
            art += flags[k][p] ? '#' : '.';
        }
        log_line(opt, art);
    }
    json doc = header(cfg);
    doc["tile"] = 0;
    doc["mask_seed"] = plan.seed;
    doc["ratio"] = plan.ratio;
    doc["grid"] = {{"patch", grid.patch}, {"rows", grid.rows}, {"cols", grid.cols}};
    doc["masked_per_group"] = masked_count(plan.ratio, grid.num_patches());
    doc["grouping"] = grouping_json(g);
    doc["groups"] = groups;
    fs::create_directories(opt.out);
    write_json(opt.out / "mask_preview.json", doc);
    write_file_atomic(opt.out / "mask_preview.csv", table.csv(cfg));
}

void cmd_train(const CommandOptions& opt) {
    const auto& cfg = opt.config;
    const LoadedData data = load_data(cfg);
    const TrainConfig tcfg = cfg.train_config();
    const std::size_t bpe = batches_per_epoch(data.train.tiles.size(), tcfg.batch);

    GroupingResult grouping;
    TrainState state;
    if (opt.resume) {
        fs::path sidecar = *opt.resume;
        sidecar += ".json";
        const json side = read_json(sidecar);
        grouping = grouping_from_json(side.at("grouping"), sidecar.string());
        if (grouping.channels() != data.train.shape().channels)
            throw ConfigError("/grouping", "checkpoint grouping does not match the data channels");
        const Checkpoint ckpt = load_checkpoint(*opt.resume);
        state = init_train_state(cfg.model_config(grouping.num_groups), grouping, ckpt.seed);
        restore_checkpoint(ckpt, state);
        state.epoch = bpe ? static_cast<std::size_t>(ckpt.step / bpe) : 0;
        for (const auto& row : side.at("history"))
            if (state.history.size() <= state.epoch) state.history.push_back(epoch_from_json(row));
        log_line(opt, "train: resuming at epoch " + std::to_string(state.epoch));
    } else {
        grouping = grouping_for(opt, data);
        state = init_train_state(cfg.model_config(grouping.num_groups), grouping, cfg.seed());
    }

    TrainOptions to;
    to.stop_after = opt.stop_after;
    to.on_epoch = [&](const EpochMetrics& m) {
        log_line(opt, "epoch " + std::to_string(m.epoch) + "  train " + format_number(m.train_total) + "  eval mae " +
                          format_number(m.eval.mae) + "  psnr " + format_number(m.eval.psnr) + "  ssim " +
                          format_number(m.eval.ssim));
    };
    train(state, data.train, data.val, grouping, tcfg, to);

    fs::create_directories(opt.out);
    const fs::path ckpt_path = opt.out / "checkpoint.tmck";
    save_checkpoint(to_checkpoint(state), ckpt_path);
    json history = json::array();
    for (const auto& m : state.history) history.push_back(epoch_json(m));
    json side = header(cfg);
    side["epoch"] = state.epoch;
    side["step"] = state.optimizer.step;
    side["batches_per_epoch"] = bpe;
    side["grouping"] = grouping_json(grouping);
    side["history"] = history;
    fs::path side_path = ckpt_path;
    side_path += ".json";
    write_json(side_path, side);

    const Table table = metrics_table(state.history);
    write_file_atomic(opt.out / "metrics.csv", table.csv(cfg));
    json report = header(cfg);
    report["grouping"] = grouping_json(grouping);
    report["parameters"] = state.params.element_count();
    report["epochs_completed"] = state.epoch;
    report["final_eval"] = eval_json(state.history.back().eval);
    report["metrics"] = table.to_json();
    write_json(opt.out / "train_report.json", report);
}

void cmd_eval(const CommandOptions& opt) {
    const auto& cfg = opt.config;
    const fs::path ckpt_path = opt.checkpoint.value_or(opt.out / "checkpoint.tmck");
    fs::path side_path = ckpt_path;
    side_path += ".json";
    const json side = read_json(side_path);
    const GroupingResult grouping = grouping_from_json(side.at("grouping"), side_path.string());
    const LoadedData data = load_data(cfg);
    if (grouping.channels() != data.train.shape().channels)
        throw ConfigError("/grouping", "checkpoint grouping does not match the data channels");
    const Checkpoint ckpt = load_checkpoint(ckpt_path);
    TrainState state = init_train_state(cfg.model_config(grouping.num_groups), grouping, ckpt.seed);
    restore_checkpoint(ckpt, state);
    const double ratio = opt.eval_ratio.value_or(cfg.masking.ratio);
    if (!(ratio >= 0.0 && ratio <= 1.0)) throw ConfigError("/masking/ratio", "evaluation ratio must lie in [0, 1]");

    Table table{{"split", "grouping", "loss", "groups", "mask_ratio", "mae", "psnr", "ssim", "full_mae", "full_psnr",
                 "full_ssim"},
                {}};
    std::vector<const Dataset*> splits;
    if (!data.val.empty()) splits.push_back(&data.val);
    if (!data.test.empty()) splits.push_back(&data.test);
    if (splits.empty()) splits.push_back(&data.train);
    for (const Dataset* ds : splits) {
        const EvalMetrics m = evaluate(*ds, state, grouping, state.seed, ratio, cfg.loss.ssim);
        table.add({std::string(to_string(ds->split)), std::string(to_string(grouping.strategy)), loss_label(cfg.loss.terms),
                   grouping.num_groups, ratio, m.mae, m.psnr, m.ssim, m.full_mae, m.full_psnr, m.full_ssim});
        log_line(opt, "eval " + std::string(to_string(ds->split)) + ": mae " + format_number(m.mae) + "  psnr " +
                          format_number(m.psnr) + "  ssim " + format_number(m.ssim));
    }
    fs::create_directories(opt.out);
    json doc = header(cfg);
    doc["checkpoint"] = ckpt_path.filename().string();
    doc["table"] = table.to_json();
    write_json(opt.out / "eval.json", doc);
    write_file_atomic(opt.out / "eval.csv", table.csv(cfg));
}

void cmd_ablate(const CommandOptions& opt) {
    const RunConfig& cfg = opt.config;
    std::string axis = opt.axis.value_or(cfg.ablate ? cfg.ablate->axis : "");
    if (axis.empty()) throw ConfigError("/ablate/axis", "no ablation axis given");
    Table table{ablation_columns(axis), {}};
    const LoadedData data = load_data(cfg);
    const Dataset& held_out = eval_split(data);
    const std::string vptr = "/ablate/values";

    auto trained = [&](const RunConfig& run, const GroupingResult& g) {
        return run_training(run, data, g, {});
    };
    auto progress = [&](const std::string& what, const EvalMetrics& m) {
        log_line(opt, "ablate " + axis + " " + what + ": mae " + format_number(m.mae) + "  psnr " +
                          format_number(m.psnr) + "  ssim " + format_number(m.ssim));
    };

    if (axis == "mask_ratio") {
        const json values = values_or(cfg, json::array({0.6, 0.75, 0.85}));
        for (const auto& v : values) {
            if (!v.is_number()) throw ConfigError(vptr, "mask ratios must be numbers");
            RunConfig run = cfg;
            run.masking.ratio = v.get<double>();
            const auto g = build_grouping(run, data.train, single_strategy(run), run.grouping.num_groups);
            const TrainState s = trained(run, g);
            const EvalMetrics own = evaluate(held_out, s, g, s.seed, run.masking.ratio, run.loss.ssim);
            const EvalMetrics at75 = evaluate(held_out, s, g, s.seed, 0.75, run.loss.ssim);
            table.add({run.masking.ratio, own.mae, own.psnr, own.ssim, at75.mae, at75.psnr, at75.ssim});
            progress(format_number(run.masking.ratio), own);
        }
    } else if (axis == "num_groups") {
        const json values = values_or(cfg, json::array({1, 5}));
        for (const auto& v : values) {
            if (!v.is_number_integer() || v.get<long long>() < 1) throw ConfigError(vptr, "group counts must be positive integers");
            RunConfig run = cfg;
            run.grouping.num_groups = v.get<std::size_t>();
            const auto g = build_grouping(run, data.train, single_strategy(run), run.grouping.num_groups);
            const TrainState s = trained(run, g);
            const EvalMetrics m = s.history.back().eval;
            table.add({run.masking.ratio, g.num_groups, m.mae, m.psnr, m.ssim, mean_seconds_per_epoch(s.history)});
            progress(std::to_string(g.num_groups), m);
        }
    } else if (axis == "grouping_strategy") {
        const json values = values_or(cfg, json::array({"KMEANS", "HAC", "SCI", "VNIR_SWIR", "SOIL_REFLECTANCE"}));
        for (const auto& v : values) {
            if (!v.is_string()) throw ConfigError(vptr, "strategies must be names");
            RunConfig run = cfg;
            Strategy st;
            try {
                st = strategy_from_string(v.get<std::string>());
            } catch (const Error&) {
                throw ConfigError(vptr, "unknown strategy " + v.get<std::string>());
            }
            run.grouping.strategy = std::string(to_string(st));
            const auto g = build_grouping(run, data.train, st, run.grouping.num_groups);
            const TrainState s = trained(run, g);
            const EvalMetrics m = s.history.back().eval;
            table.add({run.grouping.strategy, g.num_groups, m.mae, m.psnr, m.ssim});
            progress(run.grouping.strategy, m);
        }
    } else if (axis == "loss_combo") {
        const json values = values_or(cfg, json::array({"MAE", "MAE+SSIM", "MAE+SID", "MAE+SSIM+SID"}));
        for (const auto& v : values) {
            if (!v.is_string()) throw ConfigError(vptr, "loss combinations must be strings such as \"MAE+SSIM\"");
            RunConfig run = cfg;
            run.loss.terms = loss_terms_from_label(v.get<std::string>(), vptr);
            const auto g = build_grouping(run, data.train, single_strategy(run), run.grouping.num_groups);
            const TrainState s = trained(run, g);
            const EvalMetrics m = s.history.back().eval;
            const LossTimings t = mean_loss_seconds(s.history);
            table.add({loss_label(run.loss.terms), m.mae, m.psnr, m.ssim, t.mae, t.ssim, t.sid, t.mae + t.ssim + t.sid});
            progress(loss_label(run.loss.terms), m);
        }
    }

    fs::create_directories(opt.out);
    json doc = header(cfg);
    doc["axis"] = axis;
    doc["table"] = table.to_json();
    write_json(opt.out / ("ablation_" + axis + ".json"), doc);
    write_file_atomic(opt.out / ("ablation_" + axis + ".csv"), table.csv(cfg));
}

void cmd_report(const CommandOptions& opt) {
    const auto& cfg = opt.config;
    if (!fs::is_directory(opt.out)) throw IoError("report: " + opt.out.string() + " is not a directory");
    std::vector<fs::path> files;
    for (const auto& e : fs::directory_iterator(opt.out))
        if (e.is_regular_file() && e.path().extension() == ".json" && e.path().filename() != "report.json" &&
            e.path().filename() != "manifest.json" && e.path().filename().string().find(".tmck") == std::string::npos)
            files.push_back(e.path());
    std::sort(files.begin(), files.end());

    json doc = header(cfg);
    json sections = json::object();
    std::ostringstream md;
    md << "# Run report\n\nseed: " << cfg.seed() << "\n";
    // Wall-time columns stay in the CSV/JSON tables so the summary is reproducible.
    auto md_table = [&](const json& t) {
        const auto& cols = t.at("columns");
        std::vector<std::size_t> keep;
        for (std::size_t i = 0; i < cols.size(); ++i)
            if (!is_wall_time_field(cols[i].get<std::string>())) keep.push_back(i);
        md << "\n|";
        for (std::size_t i : keep) md << ' ' << cols[i].get<std::string>() << " |";
        md << "\n|";
        for (std::size_t k = 0; k < keep.size(); ++k) md << " --- |";
        md << '\n';
        for (const auto& r : t.at("rows")) {
            md << '|';
            for (std::size_t i : keep) md << ' ' << csv_cell(r.at(i)) << " |";
            md << '\n';
        }
    };
    for (const auto& f : files) {
        const json j = read_json(f);
        const std::string name = f.stem().string();
        json s = json::object();
        if (j.contains("seed")) s["seed"] = j.at("seed");
        if (j.contains("final_eval")) s["final_eval"] = j.at("final_eval");
        if (j.contains("table")) s["table"] = j.at("table");
        if (j.contains("silhouette")) s["table"] = j.at("silhouette");
        if (s.size() <= 1) continue;
        sections[name] = s;
        md << "\n## " << name << "\n";
        if (s.contains("final_eval")) {
            const auto& e = s.at("final_eval");
            md << "\nfinal eval: mae " << csv_cell(e.at("mae")) << ", psnr " << csv_cell(e.at("psnr")) << ", ssim "
               << csv_cell(e.at("ssim")) << "\n";
        }
        if (s.contains("table")) md_table(s.at("table"));
    }
    doc["sections"] = sections;
    write_json(opt.out / "report.json", doc);
    write_file_atomic(opt.out / "report.md", md.str());
    log_line(opt, "report: " + std::to_string(sections.size()) + " sections");
}

int exit_code(const std::exception& e) noexcept {
    if (dynamic_cast<const ConfigError*>(&e) || dynamic_cast<const InvalidGroupCount*>(&e)) return 2;
    if (dynamic_cast<const NumericError*>(&e) || dynamic_cast<const UndefinedScore*>(&e) ||
        dynamic_cast<const TraceError*>(&e))
        return 4;
    if (dynamic_cast<const Error*>(&e) || dynamic_cast<const fs::filesystem_error*>(&e)) return 3;
    return 1;
}

bool is_wall_time_field(std::string_view name) noexcept {
    return name == "seconds_per_epoch" || (name.size() > 2 && name.substr(name.size() - 2) == "_s");
}

json mask_wall_time(json j) {
    if (j.is_object()) {
        // Tables carry wall-time values positionally under their column names.
        if (j.contains("columns") && j.contains("rows") && j["columns"].is_array()) {
            const auto& cols = j["columns"];
            for (auto& row : j["rows"])
                for (std::size_t i = 0; i < cols.size() && i < row.size(); ++i)
                    if (cols[i].is_string() && is_wall_time_field(cols[i].get<std::string>())) row[i] = nullptr;
        }
        for (auto& [key, value] : j.items()) {
            if (is_wall_time_field(key)) value = nullptr;
            else value = mask_wall_time(value);
        }
    } else if (j.is_array()) {
        for (auto& v : j) v = mask_wall_time(v);
    }
    return j;
}

std::string mask_wall_time_csv(const std::string& csv) {
    std::istringstream in(csv);
    std::ostringstream out;
    std::string line;
    std::vector<bool> wall;
    bool have_header = false;
    while (std::getline(in, line)) {
        if (!line.empty() && line[0] == '#') {
            out << line << '\n';
            continue;
        }
        std::vector<std::string> cells;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) cells.push_back(cell);
        if (!have_header) {
            for (const auto& c : cells) wall.push_back(is_wall_time_field(c));
            have_header = true;
        } else {
            for (std::size_t i = 0; i < cells.size() && i < wall.size(); ++i)
                if (wall[i]) cells[i].clear();
        }
        for (std::size_t i = 0; i < cells.size(); ++i) out << (i ? "," : "") << cells[i];
        out << '\n';
    }
    return out.str();
}

} // namespace hypermae
