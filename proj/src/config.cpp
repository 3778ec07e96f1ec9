#include "hypermae/config.hpp"

#include "hypermae/errors.hpp"

#include <fstream>
#include <set>

namespace hypermae {

namespace {

const char* type_name(const json& j) { return j.type_name(); }

/// Reads keys of one JSON object and rejects the ones nobody asked for.
class Section {
public:
    Section(const json& j, std::string pointer) : j_(j), ptr_(std::move(pointer)) {
        if (!j_.is_object()) throw ConfigError(ptr_, std::string("expected an object, got ") + type_name(j_));
    }

    const json* find(const std::string& key) {
        seen_.insert(key);
        const auto it = j_.find(key);
        return it == j_.end() || it->is_null() ? nullptr : &*it;
    }

    std::string at(const std::string& key) const { return ptr_ + "/" + key; }

    void size(const std::string& key, std::size_t& out) {
        if (const json* v = find(key)) {
            if (!v->is_number_unsigned()) throw ConfigError(at(key), "expected a non-negative integer");
            out = v->get<std::size_t>();
        }
    }
    void u64(const std::string& key, std::uint64_t& out) {
        if (const json* v = find(key)) {
            if (!v->is_number_unsigned()) throw ConfigError(at(key), "expected a non-negative integer");
            out = v->get<std::uint64_t>();
        }
    }
    template <class T>
    void number(const std::string& key, T& out) {
        if (const json* v = find(key)) {
            if (!v->is_number()) throw ConfigError(at(key), "expected a number");
            out = v->get<T>();
        }
    }
    void text(const std::string& key, std::string& out) {
        if (const json* v = find(key)) {
            if (!v->is_string()) throw ConfigError(at(key), "expected a string");
            out = v->get<std::string>();
        }
    }
    void numbers(const std::string& key, std::vector<double>& out) {
        if (const json* v = find(key)) {
            if (!v->is_array()) throw ConfigError(at(key), "expected an array of numbers");
            out.clear();
            for (std::size_t i = 0; i < v->size(); ++i) {
                if (!(*v)[i].is_number()) throw ConfigError(at(key) + "/" + std::to_string(i), "expected a number");
                out.push_back((*v)[i].get<double>());
            }
        }
    }
    void weights(const std::string& key, LossWeights& out) {
        std::vector<double> w;
        numbers(key, w);
        if (!find(key)) return;
        if (w.size() != 3) throw ConfigError(at(key), "expected [eta, lambda, mu]");
        for (double x : w)
            if (!(x >= 0.0)) throw ConfigError(at(key), "weights must be >= 0");
        out = {w[0], w[1], w[2]};
    }

    void finish() const {
        for (const auto& [key, value] : j_.items())
            if (!seen_.count(key)) throw ConfigError(at(key), "unknown key");
    }

private:
    const json& j_;
    std::string ptr_;
    std::set<std::string> seen_;
};

SyntheticConfig parse_synthetic(const json& j) {
    Section s(j, "/data/synthetic");
    SyntheticConfig c;
    s.size("tiles", c.tiles);
    s.size("val_tiles", c.val_tiles);
    s.size("size", c.size);
    s.size("channels", c.channels);
    s.size("planted_groups", c.planted_groups);
    s.size("smoothness", c.smoothness);
    s.number("noise_sigma", c.noise_sigma);
    s.number("leak", c.leak);
    s.number("common_fraction", c.common_fraction);
    s.finish();
    if (c.tiles == 0) throw ConfigError("/data/synthetic/tiles", "at least one tile is required");
    if (c.size == 0) throw ConfigError("/data/synthetic/size", "tile size must be positive");
    if (c.planted_groups < 2) throw ConfigError("/data/synthetic/planted_groups", "at least two groups are required");
    if (c.channels < c.planted_groups) throw ConfigError("/data/synthetic/channels", "must be >= planted_groups");
    if (!(c.leak >= 0.0)) throw ConfigError("/data/synthetic/leak", "must be >= 0");
    try {
        c.spec().validate();
    } catch (const ConfigError& e) {
        throw ConfigError("/data/synthetic" + e.pointer(), e.what());
    }
    return c;
}

DataConfig parse_data(const json& j) {
    Section s(j, "/data");
    DataConfig d;
    if (const json* syn = s.find("synthetic")) d.synthetic = parse_synthetic(*syn);
    if (const json* m = s.find("manifest")) {
        if (!m->is_string()) throw ConfigError("/data/manifest", "expected a path string");
        d.manifest = m->get<std::string>();
    }
    if (const json* p = s.find("paths")) {
        if (!p->is_array()) throw ConfigError("/data/paths", "expected an array of paths");
        for (std::size_t i = 0; i < p->size(); ++i) {
            if (!(*p)[i].is_string()) throw ConfigError("/data/paths/" + std::to_string(i), "expected a path string");
            d.paths.push_back((*p)[i].get<std::string>());
        }
    }
    s.size("tile", d.tile);
    s.number("val_fraction", d.val_fraction);
    s.number("sentinel", d.sentinel);
    s.text("normalization", d.normalization);
    s.finish();
    if (d.tile == 0) throw ConfigError("/data/tile", "tile size must be positive");
    if (!(d.val_fraction >= 0.0 && d.val_fraction < 1.0)) throw ConfigError("/data/val_fraction", "must lie in [0, 1)");
    if (d.normalization != "minmax") throw ConfigError("/data/normalization", "only \"minmax\" is supported");
    return d;
}

GroupingConfig parse_grouping(const json& j) {
    Section s(j, "/grouping");
    GroupingConfig g;
    s.text("strategy", g.strategy);
    s.size("num_groups", g.num_groups);
    s.numbers("sr_boundaries", g.sr_boundaries);
    s.number("vnir_boundary", g.vnir_boundary);
    s.size("restarts", g.restarts);
    s.finish();
    if (g.strategy != "all") {
        try {
            (void)strategy_from_string(g.strategy);
        } catch (const Error&) {
            throw ConfigError("/grouping/strategy", "unknown strategy " + g.strategy);
        }
    }
    if (g.num_groups == 0) throw ConfigError("/grouping/num_groups", "must be >= 1");
    if (g.restarts == 0) throw ConfigError("/grouping/restarts", "must be >= 1");
    return g;
}

MaskingConfig parse_masking(const json& j) {
    Section s(j, "/masking");
    MaskingConfig m;
    s.number("ratio", m.ratio);
    s.size("patch", m.patch);
    s.finish();
    if (!(m.ratio >= 0.0 && m.ratio <= 1.0)) throw ConfigError("/masking/ratio", "must lie in [0, 1]");
    if (m.patch == 0) throw ConfigError("/masking/patch", "must be positive");
    return m;
}

LossConfig parse_loss(const json& j) {
    Section s(j, "/loss");
    LossConfig l;
    if (const json* t = s.find("terms")) {
        if (!t->is_array()) throw ConfigError("/loss/terms", "expected an array such as [\"MAE\", \"SSIM\"]");
        l.terms = {false, false, false};
        for (std::size_t i = 0; i < t->size(); ++i) {
            const std::string ptr = "/loss/terms/" + std::to_string(i);
            if (!(*t)[i].is_string()) throw ConfigError(ptr, "expected a term name");
            const auto name = (*t)[i].get<std::string>();
            if (name == "MAE") l.terms.mae = true;
            else if (name == "SSIM") l.terms.ssim = true;
            else if (name == "SID") l.terms.sid = true;
            else throw ConfigError(ptr, "unknown loss term " + name);
        }
    }
    s.weights("weights_start", l.weights_start);
    s.weights("weights_target", l.weights_target);
    if (s.find("warmup")) {
        std::size_t w = 0;
        s.size("warmup", w);
        if (w == 0) throw ConfigError("/loss/warmup", "must be >= 1");
        l.warmup = w;
    }
    if (const json* ss = s.find("ssim")) {
        Section q(*ss, "/loss/ssim");
        q.size("window", l.ssim.window);
        q.number("c1", l.ssim.c1);
        q.number("c2", l.ssim.c2);
        q.finish();
    }
    if (const json* sd = s.find("sid")) {
        Section q(*sd, "/loss/sid");
        q.number("alpha", l.sid.alpha);
        q.number("epsilon", l.sid.epsilon);
        q.finish();
    }
    s.finish();
    if (!l.terms.mae && !l.terms.ssim && !l.terms.sid) throw ConfigError("/loss/terms", "at least one term is required");
    l.ssim.validate();
    l.sid.validate();
    return l;
}

ModelDims parse_model(const json& j) {
    Section s(j, "/model");
    ModelDims m;
    s.size("embed_dim", m.embed_dim);
    s.size("encoder_blocks", m.encoder_blocks);
    s.size("heads", m.heads);
    s.size("decoder_dim", m.decoder_dim);
    s.size("decoder_blocks", m.decoder_blocks);
    s.size("decoder_heads", m.decoder_heads);
    s.size("mlp_ratio", m.mlp_ratio);
    s.finish();
    return m;
}

TrainSection parse_train(const json& j) {
    Section s(j, "/train");
    TrainSection t;
    s.size("epochs", t.epochs);
    s.size("batch", t.batch);
    s.number("lr", t.optimizer.lr);
    s.number("beta1", t.optimizer.beta1);
    s.number("beta2", t.optimizer.beta2);
    s.number("eps", t.optimizer.eps);
    s.number("weight_decay", t.optimizer.weight_decay);
    s.u64("seed", t.seed);
    s.finish();
    if (t.batch == 0) throw ConfigError("/train/batch", "must be >= 1");
    t.optimizer.validate();
    return t;
}

AblateConfig parse_ablate(const json& j) {
    Section s(j, "/ablate");
    AblateConfig a;
    s.text("axis", a.axis);
    if (const json* v = s.find("values")) {
        if (!v->is_array()) throw ConfigError("/ablate/values", "expected an array");
        a.values = *v;
    }
    s.finish();
    return a;
}

json weights_json(const LossWeights& w) { return json::array({w.eta, w.lambda, w.mu}); }

} // namespace

SyntheticSpec SyntheticConfig::spec() const {
    return make_planted_spec(channels, planted_groups, smoothness, noise_sigma, leak, common_fraction);
}

ModelConfig RunConfig::model_config(std::size_t groups) const {
    ModelConfig m;
    m.patch = masking.patch;
    m.embed_dim = model.embed_dim;
    m.encoder_blocks = model.encoder_blocks;
    m.heads = model.heads;
    m.decoder_dim = model.decoder_dim;
    m.decoder_blocks = model.decoder_blocks;
    m.decoder_heads = model.decoder_heads;
    m.mlp_ratio = model.mlp_ratio;
    m.groups = groups;
    m.mask_ratio = masking.ratio;
    m.validate();
    return m;
}

TrainConfig RunConfig::train_config() const {
    TrainConfig t;
    t.epochs = train.epochs;
    t.batch = train.batch;
    t.optimizer = train.optimizer;
    t.warmup = loss.warmup;
    t.weights_start = loss.weights_start;
    t.weights_target = loss.weights_target;
    t.terms = loss.terms;
    t.ssim = loss.ssim;
    t.sid = loss.sid;
    t.validate();
    return t;
}

RunConfig parse_config(const json& doc, const std::filesystem::path& base_dir) {
    Section s(doc, "");
    RunConfig c;
    c.base_dir = base_dir;
    if (const json* v = s.find("data")) c.data = parse_data(*v);
    if (const json* v = s.find("grouping")) c.grouping = parse_grouping(*v);
    if (const json* v = s.find("masking")) c.masking = parse_masking(*v);
    if (const json* v = s.find("loss")) c.loss = parse_loss(*v);
    if (const json* v = s.find("model")) c.model = parse_model(*v);
    if (const json* v = s.find("train")) c.train = parse_train(*v);
    if (const json* v = s.find("ablate")) c.ablate = parse_ablate(*v);
    s.finish();
    (void)c.model_config(c.grouping.num_groups);
    (void)c.train_config();
    return c;
}

RunConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("", "cannot open config " + path.string());
    json doc;
    try {
        doc = json::parse(in);
    } catch (const json::parse_error& e) {
        throw ConfigError("", "config " + path.string() + " is not valid JSON: " + e.what());
    }
    return parse_config(doc, path.parent_path());
}

json config_to_json(const RunConfig& c) {
    json data = json::object();
    if (c.data.synthetic) {
        const auto& s = *c.data.synthetic;
        data["synthetic"] = {{"tiles", s.tiles},
                             {"val_tiles", s.val_tiles},
                             {"size", s.size},
                             {"channels", s.channels},
                             {"planted_groups", s.planted_groups},
                             {"smoothness", s.smoothness},
                             {"noise_sigma", s.noise_sigma},
                             {"leak", s.leak},
                             {"common_fraction", s.common_fraction}};
    }
    if (c.data.manifest) data["manifest"] = *c.data.manifest;
    data["paths"] = c.data.paths;
    data["tile"] = c.data.tile;
    data["val_fraction"] = c.data.val_fraction;
    data["sentinel"] = c.data.sentinel;
    data["normalization"] = c.data.normalization;

    json terms = json::array();
    if (c.loss.terms.mae) terms.push_back("MAE");
    if (c.loss.terms.ssim) terms.push_back("SSIM");
    if (c.loss.terms.sid) terms.push_back("SID");

    json out = {
        {"data", data},
        {"grouping",
         {{"strategy", c.grouping.strategy},
          {"num_groups", c.grouping.num_groups},
          {"sr_boundaries", c.grouping.sr_boundaries},
          {"vnir_boundary", c.grouping.vnir_boundary},
          {"restarts", c.grouping.restarts}}},
        {"masking", {{"ratio", c.masking.ratio}, {"patch", c.masking.patch}}},
        {"loss",
         {{"terms", terms},
          {"weights_start", weights_json(c.loss.weights_start)},
          {"weights_target", weights_json(c.loss.weights_target)},
          {"warmup", c.loss.warmup ? json(*c.loss.warmup) : json(nullptr)},
          {"ssim", {{"window", c.loss.ssim.window}, {"c1", c.loss.ssim.c1}, {"c2", c.loss.ssim.c2}}},
          {"sid", {{"alpha", c.loss.sid.alpha}, {"epsilon", c.loss.sid.epsilon}}}}},
        {"model",
         {{"embed_dim", c.model.embed_dim},
          {"encoder_blocks", c.model.encoder_blocks},
          {"heads", c.model.heads},
          {"decoder_dim", c.model.decoder_dim},
          {"decoder_blocks", c.model.decoder_blocks},
          {"decoder_heads", c.model.decoder_heads},
          {"mlp_ratio", c.model.mlp_ratio}}},
        {"train",
         {{"epochs", c.train.epochs},
          {"batch", c.train.batch},
          {"lr", c.train.optimizer.lr},
          {"beta1", c.train.optimizer.beta1},
          {"beta2", c.train.optimizer.beta2},
          {"eps", c.train.optimizer.eps},
          {"weight_decay", c.train.optimizer.weight_decay},
          {"seed", c.train.seed}}},
    };
    if (c.ablate) out["ablate"] = {{"axis", c.ablate->axis}, {"values", c.ablate->values}};
    return out;
}

std::string loss_label(const LossTerms& t) {
    std::string s;
    auto add = [&](bool on, const char* name) {
        if (!on) return;
        if (!s.empty()) s += "+";
        s += name;
    };
    add(t.mae, "MAE");
    add(t.ssim, "SSIM");
    add(t.sid, "SID");
    return s;
}

LossTerms loss_terms_from_label(const std::string& label, const std::string& pointer) {
    LossTerms t{false, false, false};
    std::size_t start = 0;
    while (start <= label.size()) {
        const auto end = label.find('+', start);
        const auto part = label.substr(start, end == std::string::npos ? std::string::npos : end - start);
        if (part == "MAE") t.mae = true;
        else if (part == "SSIM") t.ssim = true;
        else if (part == "SID") t.sid = true;
        else throw ConfigError(pointer, "unknown loss combination " + label);
        if (end == std::string::npos) break;
        start = end + 1;
    }
    return t;
}

} // namespace hypermae
