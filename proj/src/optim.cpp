#include "hypermae/optim.hpp"

#include "hypermae/errors.hpp"

#include <cmath>
#include <numbers>

namespace hypermae {

void AdamWConfig::validate() const {
    if (!(lr > 0.0)) throw ConfigError("/train/lr", "learning rate must be positive");
    if (!(beta1 >= 0.0 && beta1 < 1.0)) throw ConfigError("/train/beta1", "must lie in [0, 1)");
    if (!(beta2 >= 0.0 && beta2 < 1.0)) throw ConfigError("/train/beta2", "must lie in [0, 1)");
    if (!(eps > 0.0)) throw ConfigError("/train/eps", "must be positive");
    if (!(weight_decay >= 0.0)) throw ConfigError("/train/weight_decay", "must be >= 0");
}

AdamWState make_adamw_state(const ParameterSet& params) {
    AdamWState s;
    for (const auto& p : params) {
        s.m.emplace_back(p.var->size(), 0.0);
        s.v.emplace_back(p.var->size(), 0.0);
    }
    return s;
}

double cosine_lr(double base, std::size_t epoch, std::size_t total) {
    if (total == 0) return base;
    return base * 0.5 * (1.0 + std::cos(std::numbers::pi * static_cast<double>(epoch) / static_cast<double>(total)));
}

void adamw_step(ParameterSet& params, AdamWState& state, const AdamWConfig& cfg, double lr, bool round_to_float) {
    if (state.m.size() != params.size() || state.v.size() != params.size())
        throw ShapeError("optimizer state does not match the parameter set");
    ++state.step;
    const double t = static_cast<double>(state.step);
    const double c1 = 1.0 - std::pow(cfg.beta1, t);
    const double c2 = 1.0 - std::pow(cfg.beta2, t);
    for (std::size_t i = 0; i < params.size(); ++i) {
        auto& node = *params[i].var;
        node.ensure_grad();
        auto& m = state.m[i];
        auto& v = state.v[i];
        if (m.size() != node.size() || v.size() != node.size()) throw ShapeError("optimizer moment shape mismatch");
        const double decay = params[i].decay ? lr * cfg.weight_decay : 0.0;
        for (std::size_t k = 0; k < node.size(); ++k) {
            const double g = node.grad[k];
            m[k] = cfg.beta1 * m[k] + (1.0 - cfg.beta1) * g;
            v[k] = cfg.beta2 * v[k] + (1.0 - cfg.beta2) * g * g;
            double p = node.value[k] - decay * node.value[k];
            p -= lr * (m[k] / c1) / (std::sqrt(v[k] / c2) + cfg.eps);
            node.value[k] = p;
            if (round_to_float) {
                node.value[k] = static_cast<float>(node.value[k]);
                m[k] = static_cast<float>(m[k]);
                v[k] = static_cast<float>(v[k]);
            }
        }
    }
}

} // namespace hypermae
