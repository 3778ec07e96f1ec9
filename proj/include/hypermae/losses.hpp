#pragma once

#include "hypermae/grouping.hpp"
#include "hypermae/hypercube.hpp"
#include "hypermae/masking.hpp"

#include <cstddef>
#include <span>
#include <vector>

namespace hypermae {

/// Weights of the composite objective: eta * MAE + lambda * SSIM_N + mu * SID_N.
struct LossWeights {
    double eta = 1.0;
    double lambda = 0.0;
    double mu = 0.0;

    double sum() const noexcept { return eta + lambda + mu; }
    friend bool operator==(const LossWeights&, const LossWeights&) = default;
};

inline constexpr LossWeights kScheduleStart{1.0, 0.0, 0.0};
inline constexpr LossWeights kScheduleTarget{0.7, 0.15, 0.15};

/// Uniform-window SSIM over fully interior windows, stride 1.
struct SsimParams {
    std::size_t window = 7;
    double c1 = 0.01 * 0.01;
    double c2 = 0.03 * 0.03;
    void validate() const;
};

struct SidParams {
    double alpha = 0.5;
    double epsilon = 1e-8;
    void validate() const;
};

/// Which terms of the composite objective are evaluated at all.
struct LossTerms {
    bool mae = true;
    bool ssim = true;
    bool sid = true;
    friend bool operator==(const LossTerms&, const LossTerms&) = default;
};

struct LossTimings {
    double mae = 0.0;
    double ssim = 0.0;
    double sid = 0.0;
};

/// Term values of one composite-loss evaluation. Terms that were not evaluated
/// hold NaN and carry weight 0.
struct LossReport {
    double total = 0.0;
    double mae = 0.0;
    double ssim_n = 0.0;
    double sid_n = 0.0;
    LossWeights weights;
    LossTimings timings_s;
};

double mae(std::span<const double> pred, std::span<const double> target);
double mae(const Volume& pred, const Volume& target);

/// Mean SSIM over windows and channels. If `grad_y` is non-null it receives
/// d ssim / d y (same layout as y).
double ssim(const Volume& x, const Volume& y, const SsimParams& p = {}, std::vector<double>* grad_y = nullptr);
double ssim_n(const Volume& x, const Volume& y, const SsimParams& p = {});

/// Mean over pixels of the symmetric KL divergence between sum-normalized
/// spectra. Negative components of y are treated as 0. If `grad_y` is non-null
/// it receives d sid / d y.
double sid(const Volume& x, const Volume& y, const SidParams& p = {}, std::vector<double>* grad_y = nullptr);
double sid_n(const Volume& x, const Volume& y, const SidParams& p = {});
double sid_n_from_sid(double sid_value, double alpha);

/// 10 log10(peak^2 / mse); +infinity when mse is 0.
double psnr_from_mse(double mse, double peak = 1.0);
double psnr(const Volume& pred, const Volume& target, double peak = 1.0);

/// Linear interpolation from `start` (epoch 0) to `target` (epoch >= warmup).
LossWeights schedule_weights(std::size_t epoch, std::size_t warmup, const LossWeights& start = kScheduleStart,
                             const LossWeights& target = kScheduleTarget);

struct CompositeLoss {
    LossReport report;
    Volume gradient;  ///< d total / d pred; zero at visible elements
};

/// Builds the composite (pred where masked, target where visible) and evaluates
/// MAE over masked elements plus SSIM_N and SID_N over the whole composite.
CompositeLoss composite_loss(const Volume& pred, const Volume& target, const std::vector<bool>& masked,
                             const LossWeights& w, const SsimParams& sp = {}, const SidParams& dp = {},
                             LossTerms terms = {});

CompositeLoss composite_loss(const Volume& pred, const Volume& target, const MaskPlan& plan,
                             const GroupingResult& grouping, const PatchGrid& grid, const LossWeights& w,
                             const SsimParams& sp = {}, const SidParams& dp = {}, LossTerms terms = {});

} // namespace hypermae
