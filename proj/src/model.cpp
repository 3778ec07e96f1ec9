#include "hypermae/model.hpp"

#include "hypermae/errors.hpp"
#include "hypermae/rng.hpp"

#include <cmath>
#include <numeric>

namespace hypermae {

namespace {

using ad::Tape;
using ad::Var;

std::pair<std::size_t, std::size_t> matrix_dims(const std::vector<std::size_t>& shape) {
    if (shape.size() == 1) return {1, shape[0]};
    if (shape.size() == 2) return {shape[0], shape[1]};
    throw ShapeError("parameters are 1-D or 2-D");
}

std::size_t block_size(const GroupingResult& grouping, std::size_t patch, std::size_t g) {
    return grouping.group_sizes.at(g) * patch * patch;
}

Var linear(Tape& t, const Var& x, const ParameterSet& p, const std::string& name) {
    return ad::add_row(t, ad::matmul(t, x, p.get(name + ".weight")), p.get(name + ".bias"));
}

Var norm(Tape& t, const Var& x, const ParameterSet& p, const std::string& name) {
    return ad::layer_norm(t, x, p.get(name + ".gain"), p.get(name + ".shift"));
}

Var attention(Tape& t, const Var& x, const ParameterSet& p, const std::string& name, std::size_t heads) {
    const std::size_t dim = x->cols, dh = dim / heads;
    const Var qkv = linear(t, x, p, name + ".qkv");
    const double scale = 1.0 / std::sqrt(static_cast<double>(dh));
    std::vector<Var> outs;
    outs.reserve(heads);
    for (std::size_t h = 0; h < heads; ++h) {
        const Var q = ad::slice_cols(t, qkv, h * dh, (h + 1) * dh);
        const Var k = ad::slice_cols(t, qkv, dim + h * dh, dim + (h + 1) * dh);
        const Var v = ad::slice_cols(t, qkv, 2 * dim + h * dh, 2 * dim + (h + 1) * dh);
        const Var a = ad::softmax_rows(t, ad::scale(t, ad::matmul_nt(t, q, k), scale));
        outs.push_back(ad::matmul(t, a, v));
    }
    return linear(t, ad::concat_cols(t, outs), p, name + ".proj");
}

Var block(Tape& t, Var x, const ParameterSet& p, const std::string& name, std::size_t heads) {
    x = ad::add(t, x, attention(t, norm(t, x, p, name + ".norm1"), p, name + ".attn", heads));
    const Var h = ad::gelu(t, linear(t, norm(t, x, p, name + ".norm2"), p, name + ".mlp.fc1"));
    return ad::add(t, x, linear(t, h, p, name + ".mlp.fc2"));
}

void add_linear(ParameterSet& ps, const std::string& name, std::size_t in, std::size_t out, rng::Xoshiro256& gen) {
    const double limit = std::sqrt(6.0 / static_cast<double>(in + out));
    std::vector<double> w(in * out);
    for (auto& v : w) v = gen.uniform(-limit, limit);
    ps.add(name + ".weight", {in, out}, std::move(w), true);
    ps.add(name + ".bias", {out}, std::vector<double>(out, 0.0), false);
}

void add_norm(ParameterSet& ps, const std::string& name, std::size_t dim) {
    ps.add(name + ".gain", {dim}, std::vector<double>(dim, 1.0), false);
    ps.add(name + ".shift", {dim}, std::vector<double>(dim, 0.0), false);
}

std::vector<double> normal_values(std::size_t n, double sigma, rng::Xoshiro256& gen) {
    std::vector<double> v(n);
    for (auto& x : v) x = sigma * gen.normal();
    return v;
}

void add_block(ParameterSet& ps, const std::string& name, std::size_t dim, std::size_t mlp_ratio,
               rng::Xoshiro256& gen) {
    add_norm(ps, name + ".norm1", dim);
    add_linear(ps, name + ".attn.qkv", dim, 3 * dim, gen);
    add_linear(ps, name + ".attn.proj", dim, dim, gen);
    add_norm(ps, name + ".norm2", dim);
    add_linear(ps, name + ".mlp.fc1", dim, mlp_ratio * dim, gen);
    add_linear(ps, name + ".mlp.fc2", mlp_ratio * dim, dim, gen);
}

} // namespace

void ModelConfig::validate() const {
    if (patch == 0) throw ConfigError("/masking/patch", "patch size must be positive");
    if (embed_dim == 0 || embed_dim % 4 != 0) throw ConfigError("/model/embed_dim", "must be a positive multiple of 4");
    if (decoder_dim == 0 || decoder_dim % 4 != 0)
        throw ConfigError("/model/decoder_dim", "must be a positive multiple of 4");
    if (heads == 0 || embed_dim % heads != 0) throw ConfigError("/model/heads", "must divide embed_dim");
    if (decoder_heads == 0 || decoder_dim % decoder_heads != 0)
        throw ConfigError("/model/decoder_heads", "must divide decoder_dim");
    if (groups == 0) throw ConfigError("/grouping/num_groups", "must be positive");
    if (mlp_ratio == 0) throw ConfigError("/model/mlp_ratio", "must be positive");
    if (!(mask_ratio >= 0.0 && mask_ratio <= 1.0)) throw ConfigError("/masking/ratio", "must lie in [0, 1]");
}

ParameterSet::ParameterSet(const ParameterSet& other) {
    for (const auto& p : other.params_) add(p.name, p.shape, p.var->value, p.decay);
}

ParameterSet& ParameterSet::operator=(const ParameterSet& other) {
    if (this != &other) {
        ParameterSet copy(other);
        *this = std::move(copy);
    }
    return *this;
}

ad::Var ParameterSet::add(std::string name, std::vector<std::size_t> shape, std::vector<double> values, bool decay) {
    if (find(name)) throw ConfigError("", "duplicate parameter name " + name);
    const auto [rows, cols] = matrix_dims(shape);
    Var v = ad::parameter(rows, cols, std::move(values));
    params_.push_back(Parameter{std::move(name), std::move(shape), v, decay});
    return v;
}

const Parameter* ParameterSet::find(const std::string& name) const {
    for (const auto& p : params_)
        if (p.name == name) return &p;
    return nullptr;
}

const ad::Var& ParameterSet::get(const std::string& name) const {
    const Parameter* p = find(name);
    if (!p) throw ConfigError("", "unknown parameter " + name);
    return p->var;
}

std::size_t ParameterSet::element_count() const {
    std::size_t n = 0;
    for (const auto& p : params_) n += p.var->size();
    return n;
}

void ParameterSet::zero_grad() {
    for (auto& p : params_) p.var->grad.assign(p.var->size(), 0.0);
}

ParameterSet init_parameters(const ModelConfig& config, const GroupingResult& grouping, std::uint64_t seed) {
    config.validate();
    grouping.validate();
    if (grouping.num_groups != config.groups)
        throw ConfigError("/grouping/num_groups", "grouping has " + std::to_string(grouping.num_groups) +
                                                      " groups, model expects " + std::to_string(config.groups));
    const std::size_t D = config.embed_dim, Dd = config.decoder_dim, G = config.groups;
    rng::Xoshiro256 gen(rng::derive_seed(seed, 0x1417));
    ParameterSet ps;
    for (std::size_t g = 0; g < G; ++g) add_linear(ps, "embed.g" + std::to_string(g), block_size(grouping, config.patch, g), D, gen);
    ps.add("enc.group_embed", {G, D}, normal_values(G * D, 0.02, gen), false);
    for (std::size_t b = 0; b < config.encoder_blocks; ++b)
        add_block(ps, "enc." + std::to_string(b), D, config.mlp_ratio, gen);
    add_norm(ps, "enc.norm", D);
    add_linear(ps, "dec.embed", D, Dd, gen);
    ps.add("dec.mask_token", {Dd}, normal_values(Dd, 0.02, gen), false);
    ps.add("dec.group_embed", {G, Dd}, normal_values(G * Dd, 0.02, gen), false);
    for (std::size_t b = 0; b < config.decoder_blocks; ++b)
        add_block(ps, "dec." + std::to_string(b), Dd, config.mlp_ratio, gen);
    add_norm(ps, "dec.norm", Dd);
    for (std::size_t g = 0; g < G; ++g) add_linear(ps, "head.g" + std::to_string(g), Dd, block_size(grouping, config.patch, g), gen);
    return ps;
}

std::vector<double> sincos_2d(std::size_t rows, std::size_t cols, std::size_t dim) {
    if (dim == 0 || dim % 4 != 0) throw ConfigError("/model/embed_dim", "sin-cos embedding needs a multiple of 4");
    const std::size_t quarter = dim / 4;
    std::vector<double> out(rows * cols * dim);
    for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t c = 0; c < cols; ++c) {
            double* e = out.data() + (r * cols + c) * dim;
            for (std::size_t i = 0; i < quarter; ++i) {
                const double omega = 1.0 / std::pow(10000.0, static_cast<double>(i) / static_cast<double>(quarter));
                e[i] = std::sin(static_cast<double>(r) * omega);
                e[quarter + i] = std::cos(static_cast<double>(r) * omega);
                e[2 * quarter + i] = std::sin(static_cast<double>(c) * omega);
                e[3 * quarter + i] = std::cos(static_cast<double>(c) * omega);
            }
        }
    return out;
}

TokenBlocks extract_tokens(const HyperCube& cube, const GroupingResult& grouping, const PatchGrid& grid) {
    if (grid.height() != cube.shape.height || grid.width() != cube.shape.width)
        throw ShapeError("patch grid does not match the cube extent");
    if (grouping.channels() != cube.shape.channels) throw ShapeError("grouping does not cover the cube channels");
    TokenBlocks t{grid.num_patches(), grouping.num_groups, {}};
    t.rows.reserve(t.patches * t.groups);
    std::vector<float> buf;
    for (std::size_t p = 0; p < t.patches; ++p)
        for (std::size_t g = 0; g < t.groups; ++g) {
            extract_block(cube, grouping, grid, g, p, buf);
            t.rows.emplace_back(buf.begin(), buf.end());
        }
    return t;
}

std::vector<double> tokenize(const HyperCube& cube, const GroupingResult& grouping, const PatchGrid& grid,
                             const ParameterSet& params) {
    const TokenBlocks blocks = extract_tokens(cube, grouping, grid);
    const std::size_t D = params.get("embed.g0.bias")->cols;
    std::vector<double> out(blocks.rows.size() * D);
    for (std::size_t r = 0; r < blocks.rows.size(); ++r) {
        const std::size_t g = r % blocks.groups;
        const auto& w = params.get("embed.g" + std::to_string(g) + ".weight");
        const auto& b = params.get("embed.g" + std::to_string(g) + ".bias");
        const auto& x = blocks.rows[r];
        if (w->rows != x.size()) throw ShapeError("token block size does not match the group embedding");
        double* o = out.data() + r * D;
        for (std::size_t j = 0; j < D; ++j) o[j] = b->value[j];
        for (std::size_t k = 0; k < x.size(); ++k)
            for (std::size_t j = 0; j < D; ++j) o[j] += x[k] * w->value[k * D + j];
    }
    return out;
}

std::vector<double> add_positions(std::vector<double> tokens, const PatchGrid& grid, std::size_t groups,
                                  const std::vector<double>& group_embedding, std::size_t dim) {
    if (tokens.size() != grid.num_patches() * groups * dim || group_embedding.size() != groups * dim)
        throw ShapeError("add_positions: token matrix does not match grid, groups and dim");
    const auto spatial = sincos_2d(grid.rows, grid.cols, dim);
    for (std::size_t p = 0; p < grid.num_patches(); ++p)
        for (std::size_t g = 0; g < groups; ++g) {
            double* t = tokens.data() + (p * groups + g) * dim;
            for (std::size_t j = 0; j < dim; ++j) t[j] += spatial[p * dim + j] + group_embedding[g * dim + j];
        }
    return tokens;
}

MaskedAutoencoder::MaskedAutoencoder(ModelConfig config, GroupingResult grouping, PatchGrid grid)
    : config_(config), grouping_(std::move(grouping)), grid_(grid) {
    config_.validate();
    grouping_.validate();
    if (grouping_.num_groups != config_.groups)
        throw ConfigError("/grouping/num_groups", "grouping has " + std::to_string(grouping_.num_groups) +
                                                      " groups, model expects " + std::to_string(config_.groups));
    if (grid_.patch != config_.patch) throw ConfigError("/masking/patch", "grid patch differs from model patch");
    for (std::size_t g = 0; g < grouping_.num_groups; ++g) members_.push_back(grouping_.members(g));
    enc_pos_ = sincos_2d(grid_.rows, grid_.cols, config_.embed_dim);
    dec_pos_ = sincos_2d(grid_.rows, grid_.cols, config_.decoder_dim);
}

void MaskedAutoencoder::discard_trace() noexcept {
    tape_.clear();
    heads_.clear();
    trace_flags_.reset();
}

ForwardResult MaskedAutoencoder::forward(const ParameterSet& params, const HyperCube& cube, const MaskPlan& plan) {
    discard_trace();
    if (plan.groups() != config_.groups)
        throw ConfigError("/grouping/num_groups", "mask plan has " + std::to_string(plan.groups()) + " groups");
    check_mask_inputs(cube.shape, grouping_, plan, grid_);

    const std::size_t G = config_.groups, N = grid_.num_patches(), P = grid_.patch;
    const std::size_t D = config_.embed_dim, Dd = config_.decoder_dim;
    const auto flags = plan.masked_flags();
    Tape& t = tape_;

    // Encoder input: visible tokens, grouped by group.
    std::vector<Var> embedded;
    std::vector<std::size_t> row_patch, row_group;
    std::vector<float> buf;
    for (std::size_t g = 0; g < G; ++g) {
        const auto& vis = plan.visible[g];
        if (vis.empty()) continue;
        const std::size_t in = block_size(grouping_, P, g);
        std::vector<double> x;
        x.reserve(vis.size() * in);
        for (std::size_t p : vis) {
            extract_block(cube, grouping_, grid_, g, p, buf);
            x.insert(x.end(), buf.begin(), buf.end());
            row_patch.push_back(p);
            row_group.push_back(g);
        }
        embedded.push_back(linear(t, t.constant(vis.size(), in, std::move(x)), params, "embed.g" + std::to_string(g)));
    }
    const std::size_t nvis = row_patch.size();

    std::vector<std::size_t> source(N * G, nvis);  // row of the decoder source for token (p, g)
    for (std::size_t r = 0; r < nvis; ++r) source[row_patch[r] * G + row_group[r]] = r;

    std::vector<Var> dec_source;
    if (nvis > 0) {
        Var x = ad::concat_rows(t, embedded);
        std::vector<double> pos(nvis * D);
        for (std::size_t r = 0; r < nvis; ++r)
            std::copy_n(enc_pos_.data() + row_patch[r] * D, D, pos.data() + r * D);
        x = ad::add(t, x, t.constant(nvis, D, std::move(pos)));
        x = ad::add(t, x, ad::gather_rows(t, params.get("enc.group_embed"), row_group));
        for (std::size_t b = 0; b < config_.encoder_blocks; ++b)
            x = block(t, x, params, "enc." + std::to_string(b), config_.heads);
        x = norm(t, x, params, "enc.norm");
        dec_source.push_back(linear(t, x, params, "dec.embed"));
    }
    dec_source.push_back(params.get("dec.mask_token"));

    // Decoder over every (patch, group) token.
    Var y = ad::gather_rows(t, ad::concat_rows(t, dec_source), source);
    std::vector<double> pos(N * G * Dd);
    std::vector<std::size_t> token_group(N * G);
    for (std::size_t p = 0; p < N; ++p)
        for (std::size_t g = 0; g < G; ++g) {
            std::copy_n(dec_pos_.data() + p * Dd, Dd, pos.data() + (p * G + g) * Dd);
            token_group[p * G + g] = g;
        }
    y = ad::add(t, y, t.constant(N * G, Dd, std::move(pos)));
    y = ad::add(t, y, ad::gather_rows(t, params.get("dec.group_embed"), token_group));
    for (std::size_t b = 0; b < config_.decoder_blocks; ++b)
        y = block(t, y, params, "dec." + std::to_string(b), config_.decoder_heads);
    y = norm(t, y, params, "dec.norm");

    ForwardResult out;
    out.reconstruction = Volume(cube.shape);
    out.prediction = to_volume(cube);
    std::vector<std::size_t> rows(N);
    for (std::size_t g = 0; g < G; ++g) {
        for (std::size_t p = 0; p < N; ++p) rows[p] = p * G + g;
        Var head = linear(t, ad::gather_rows(t, y, rows), params, "head.g" + std::to_string(g));
        for (std::size_t p = 0; p < N; ++p) {
            const std::size_t y0 = (p / grid_.cols) * P, x0 = (p % grid_.cols) * P;
            const double* v = head->value.data() + p * head->cols;
            std::size_t k = 0;
            for (std::size_t c : members_[g])
                for (std::size_t dy = 0; dy < P; ++dy)
                    for (std::size_t dx = 0; dx < P; ++dx, ++k) {
                        out.reconstruction.at(c, y0 + dy, x0 + dx) = v[k];
                        if (flags[g][p]) out.prediction.at(c, y0 + dy, x0 + dx) = v[k];
                    }
        }
        heads_.push_back(std::move(head));
    }
    trace_flags_ = flags;
    trace_shape_ = cube.shape;
    return out;
}

void MaskedAutoencoder::backward(const Volume& grad_prediction) {
    if (!trace_flags_) throw TraceError("backward called without a recorded forward pass");
    if (grad_prediction.shape != trace_shape_ || grad_prediction.values.size() != trace_shape_.size())
        throw ShapeError("gradient shape differs from the traced cube");
    const std::size_t N = grid_.num_patches(), P = grid_.patch;
    const auto& flags = *trace_flags_;
    std::vector<std::pair<Var, std::vector<double>>> seeds;
    for (std::size_t g = 0; g < heads_.size(); ++g) {
        std::vector<double> seed(heads_[g]->size(), 0.0);
        for (std::size_t p = 0; p < N; ++p) {
            if (!flags[g][p]) continue;
            const std::size_t y0 = (p / grid_.cols) * P, x0 = (p % grid_.cols) * P;
            double* s = seed.data() + p * heads_[g]->cols;
            std::size_t k = 0;
            for (std::size_t c : members_[g])
                for (std::size_t dy = 0; dy < P; ++dy)
                    for (std::size_t dx = 0; dx < P; ++dx, ++k) s[k] = grad_prediction.at(c, y0 + dy, x0 + dx);
        }
        seeds.emplace_back(heads_[g], std::move(seed));
    }
    tape_.backward(seeds);
    discard_trace();
}

} // namespace hypermae
