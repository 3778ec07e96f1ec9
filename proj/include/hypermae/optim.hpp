#pragma once

#include "hypermae/model.hpp"

#include <cstddef>
#include <cstdint>
#include <vector>

namespace hypermae {

struct AdamWConfig {
    double lr = 1e-3;  ///< base learning rate of the cosine schedule
    double beta1 = 0.9;
    double beta2 = 0.95;
    double eps = 1e-8;
    double weight_decay = 0.05;
    void validate() const;
    friend bool operator==(const AdamWConfig&, const AdamWConfig&) = default;
};

struct AdamWState {
    std::uint64_t step = 0;
    std::vector<std::vector<double>> m;  ///< first moments, parameter order
    std::vector<std::vector<double>> v;  ///< second moments, parameter order
};

/// Zero moments shaped like `params`.
AdamWState make_adamw_state(const ParameterSet& params);

/// base * 0.5 * (1 + cos(pi * epoch / total)); `base` when total is 0.
double cosine_lr(double base, std::size_t epoch, std::size_t total);

/// One AdamW update from the gradients held in `params`: decoupled decay
/// p -= lr*wd*p on decaying parameters, then p -= lr * m_hat / (sqrt(v_hat) + eps).
/// With `round_to_float` the parameters and moments are rounded to float
/// precision afterwards, so that float checkpoints restore the exact state.
void adamw_step(ParameterSet& params, AdamWState& state, const AdamWConfig& cfg, double lr,
                bool round_to_float = false);

} // namespace hypermae
