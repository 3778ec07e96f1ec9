#include "hypermae/rng.hpp"

#include <cmath>
#include <numbers>
#include <numeric>

namespace hypermae::rng {

double Xoshiro256::normal() noexcept {
    // 1 - u keeps the log argument in (0, 1].
    const double u1 = 1.0 - uniform();
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

std::vector<std::size_t> permutation(std::size_t n, Xoshiro256& gen) {
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    shuffle(order, gen);
    return order;
}

} // namespace hypermae::rng
