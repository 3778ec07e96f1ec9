#include "hypermae/losses.hpp"

#include "hypermae/errors.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <string>

namespace hypermae {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

void require_same_shape(const Volume& a, const Volume& b, const char* what) {
    if (a.shape != b.shape || a.values.size() != b.values.size())
        throw ShapeError(std::string(what) + ": inputs differ in shape");
}

} // namespace

void SsimParams::validate() const {
    if (window < 3 || window % 2 == 0) throw ConfigError("/loss/ssim/window", "SSIM window must be odd and >= 3");
    if (!(c1 > 0.0) || !(c2 > 0.0)) throw ConfigError("/loss/ssim", "SSIM constants must be positive");
}

void SidParams::validate() const {
    if (!(alpha > 0.0)) throw ConfigError("/loss/sid/alpha", "alpha must be positive");
    if (!(epsilon > 0.0)) throw ConfigError("/loss/sid/epsilon", "epsilon must be positive");
}

double mae(std::span<const double> pred, std::span<const double> target) {
    if (pred.size() != target.size()) throw ShapeError("mae: inputs differ in size");
    if (pred.empty()) return 0.0;
    double s = 0.0;
    for (std::size_t i = 0; i < pred.size(); ++i) s += std::abs(pred[i] - target[i]);
    return s / static_cast<double>(pred.size());
}

double mae(const Volume& pred, const Volume& target) {
    require_same_shape(pred, target, "mae");
    return mae(std::span<const double>(pred.values), std::span<const double>(target.values));
}

double ssim(const Volume& x, const Volume& y, const SsimParams& p, std::vector<double>* grad_y) {
    p.validate();
    require_same_shape(x, y, "ssim");
    const auto& s = x.shape;
    const std::size_t win = p.window;
    if (s.height < win || s.width < win)
        throw WindowError("image " + std::to_string(s.height) + "x" + std::to_string(s.width) +
                          " is smaller than the SSIM window " + std::to_string(win));
    const std::size_t wy = s.height - win + 1, wx = s.width - win + 1;
    const double n = static_cast<double>(win * win);
    const double count = static_cast<double>(wy * wx * s.channels);

    if (grad_y) grad_y->assign(y.values.size(), 0.0);
    std::vector<double> alpha, beta, gamma;
    if (grad_y) {
        alpha.resize(s.plane());
        beta.resize(s.plane());
        gamma.resize(s.plane());
    }

    double total = 0.0;
    for (std::size_t c = 0; c < s.channels; ++c) {
        const double* xc = x.values.data() + c * s.plane();
        const double* yc = y.values.data() + c * s.plane();
        if (grad_y) {
            std::fill(alpha.begin(), alpha.end(), 0.0);
            std::fill(beta.begin(), beta.end(), 0.0);
            std::fill(gamma.begin(), gamma.end(), 0.0);
        }
        for (std::size_t y0 = 0; y0 < wy; ++y0) {
            for (std::size_t x0 = 0; x0 < wx; ++x0) {
                double sx = 0, sy = 0, sxx = 0, syy = 0, sxy = 0;
                for (std::size_t dy = 0; dy < win; ++dy) {
                    const std::size_t row = (y0 + dy) * s.width + x0;
                    for (std::size_t dx = 0; dx < win; ++dx) {
                        const double a = xc[row + dx], b = yc[row + dx];
                        sx += a;
                        sy += b;
                        sxx += a * a;
                        syy += b * b;
                        sxy += a * b;
                    }
                }
                const double mx = sx / n, my = sy / n;
                const double vx = sxx / n - mx * mx;
                const double vy = syy / n - my * my;
                const double cxy = sxy / n - mx * my;
                const double a1 = 2.0 * mx * my + p.c1;
                const double a2 = 2.0 * cxy + p.c2;
                const double b1 = mx * mx + my * my + p.c1;
                const double b2 = vx + vy + p.c2;
                const double score = (a1 * a2) / (b1 * b2);
                total += score;
                if (!grad_y) continue;
                // d score / d y_k = al + be * x_k + ga * y_k for every k in the window.
                const double bb = b1 * b2;
                const double al = 2.0 * mx * a2 / (n * bb) - 2.0 * a1 * mx / (n * bb) - 2.0 * score * my / (n * b1) +
                                  2.0 * score * my / (n * b2);
                const double be = 2.0 * a1 / (n * bb);
                const double ga = -2.0 * score / (n * b2);
                for (std::size_t dy = 0; dy < win; ++dy) {
                    const std::size_t row = (y0 + dy) * s.width + x0;
                    for (std::size_t dx = 0; dx < win; ++dx) {
                        alpha[row + dx] += al;
                        beta[row + dx] += be;
                        gamma[row + dx] += ga;
                    }
                }
            }
        }
        if (grad_y) {
            double* g = grad_y->data() + c * s.plane();
            for (std::size_t k = 0; k < s.plane(); ++k) g[k] = (alpha[k] + beta[k] * xc[k] + gamma[k] * yc[k]) / count;
        }
    }
    return total / count;
}

double ssim_n(const Volume& x, const Volume& y, const SsimParams& p) { return 0.5 * (1.0 - ssim(x, y, p)); }

double sid(const Volume& x, const Volume& y, const SidParams& p, std::vector<double>* grad_y) {
    p.validate();
    require_same_shape(x, y, "sid");
    const auto& s = x.shape;
    const std::size_t plane = s.plane(), C = s.channels;
    if (plane == 0) return 0.0;
    if (grad_y) grad_y->assign(y.values.size(), 0.0);
    const double eps = p.epsilon;
    std::vector<double> pv(C), qv(C), g(C);
    double total = 0.0;
    for (std::size_t i = 0; i < plane; ++i) {
        double sx = 0.0, sy = 0.0;
        for (std::size_t c = 0; c < C; ++c) {
            sx += std::max(x.values[c * plane + i], 0.0);
            sy += std::max(y.values[c * plane + i], 0.0);
        }
        const double nx = sx + eps, ny = sy + eps;
        double d = 0.0;
        for (std::size_t c = 0; c < C; ++c) {
            pv[c] = std::max(x.values[c * plane + i], 0.0) / nx;
            qv[c] = std::max(y.values[c * plane + i], 0.0) / ny;
            d += (pv[c] - qv[c]) * (std::log(std::max(pv[c], eps)) - std::log(std::max(qv[c], eps)));
        }
        total += d;
        if (!grad_y) continue;
        double dot = 0.0;
        for (std::size_t c = 0; c < C; ++c) {
            const double lp = std::log(std::max(pv[c], eps));
            const double lq = std::log(std::max(qv[c], eps));
            g[c] = -(lp - lq) - (qv[c] > eps ? (pv[c] - qv[c]) / qv[c] : 0.0);
            dot += g[c] * qv[c];
        }
        for (std::size_t c = 0; c < C; ++c) {
            const double yc = y.values[c * plane + i];
            (*grad_y)[c * plane + i] = yc > 0.0 ? (g[c] - dot) / ny / static_cast<double>(plane) : 0.0;
        }
    }
    return total / static_cast<double>(plane);
}

double sid_n_from_sid(double sid_value, double alpha) { return 1.0 - std::exp(-alpha * sid_value); }

double sid_n(const Volume& x, const Volume& y, const SidParams& p) { return sid_n_from_sid(sid(x, y, p), p.alpha); }

double psnr_from_mse(double mse, double peak) {
    if (mse == 0.0) return std::numeric_limits<double>::infinity();
    return 10.0 * std::log10(peak * peak / mse);
}

double psnr(const Volume& pred, const Volume& target, double peak) {
    require_same_shape(pred, target, "psnr");
    if (!(peak > 0.0)) throw ConfigError("/peak", "PSNR peak must be positive");
    double s = 0.0;
    for (std::size_t i = 0; i < pred.values.size(); ++i) s += (pred.values[i] - target.values[i]) * (pred.values[i] - target.values[i]);
    return psnr_from_mse(pred.values.empty() ? 0.0 : s / static_cast<double>(pred.values.size()), peak);
}

LossWeights schedule_weights(std::size_t epoch, std::size_t warmup, const LossWeights& start, const LossWeights& target) {
    if (warmup == 0) throw ConfigError("/loss/warmup", "warmup must be >= 1");
    if (epoch == 0) return start;
    if (epoch >= warmup) return target;
    const double t = static_cast<double>(epoch) / static_cast<double>(warmup);
    return {start.eta + (target.eta - start.eta) * t, start.lambda + (target.lambda - start.lambda) * t,
            start.mu + (target.mu - start.mu) * t};
}

CompositeLoss composite_loss(const Volume& pred, const Volume& target, const std::vector<bool>& masked,
                             const LossWeights& w, const SsimParams& sp, const SidParams& dp, LossTerms terms) {
    require_same_shape(pred, target, "composite_loss");
    if (masked.size() != pred.values.size()) throw ShapeError("composite_loss: mask does not match the cube");
    if (!(w.eta >= 0.0 && w.lambda >= 0.0 && w.mu >= 0.0)) throw ConfigError("/loss/weights", "weights must be >= 0");

    const std::size_t n = pred.values.size();
    CompositeLoss out;
    out.gradient = Volume(pred.shape);
    auto& grad = out.gradient.values;
    auto& r = out.report;
    r.weights = {terms.mae ? w.eta : 0.0, terms.ssim ? w.lambda : 0.0, terms.sid ? w.mu : 0.0};
    const double nan = std::numeric_limits<double>::quiet_NaN();

    Volume composite = target;
    std::size_t masked_count = 0;
    for (std::size_t i = 0; i < n; ++i)
        if (masked[i]) {
            composite.values[i] = pred.values[i];
            ++masked_count;
        }

    r.mae = nan;
    if (terms.mae) {
        const auto t0 = Clock::now();
        double s = 0.0;
        for (std::size_t i = 0; i < n; ++i)
            if (masked[i]) s += std::abs(pred.values[i] - target.values[i]);
        r.mae = masked_count ? s / static_cast<double>(masked_count) : 0.0;
        if (r.weights.eta > 0.0 && masked_count) {
            const double scale = r.weights.eta / static_cast<double>(masked_count);
            for (std::size_t i = 0; i < n; ++i) {
                if (!masked[i]) continue;
                const double d = pred.values[i] - target.values[i];
                grad[i] += d > 0.0 ? scale : (d < 0.0 ? -scale : 0.0);
            }
        }
        r.timings_s.mae = seconds_since(t0);
    }

    r.ssim_n = nan;
    if (terms.ssim) {
        const auto t0 = Clock::now();
        std::vector<double> g;
        const bool want = r.weights.lambda > 0.0;
        const double value = ssim(target, composite, sp, want ? &g : nullptr);
        r.ssim_n = 0.5 * (1.0 - value);
        if (want)
            for (std::size_t i = 0; i < n; ++i)
                if (masked[i]) grad[i] += -0.5 * r.weights.lambda * g[i];
        r.timings_s.ssim = seconds_since(t0);
    }

    r.sid_n = nan;
    if (terms.sid) {
        const auto t0 = Clock::now();
        std::vector<double> g;
        const bool want = r.weights.mu > 0.0;
        const double value = sid(target, composite, dp, want ? &g : nullptr);
        const double decay = std::exp(-dp.alpha * value);
        r.sid_n = 1.0 - decay;
        if (want) {
            const double scale = r.weights.mu * dp.alpha * decay;
            for (std::size_t i = 0; i < n; ++i)
                if (masked[i]) grad[i] += scale * g[i];
        }
        r.timings_s.sid = seconds_since(t0);
    }

    r.total = 0.0;
    if (terms.mae) r.total += r.weights.eta * r.mae;
    if (terms.ssim) r.total += r.weights.lambda * r.ssim_n;
    if (terms.sid) r.total += r.weights.mu * r.sid_n;
    return out;
}

CompositeLoss composite_loss(const Volume& pred, const Volume& target, const MaskPlan& plan,
                             const GroupingResult& grouping, const PatchGrid& grid, const LossWeights& w,
                             const SsimParams& sp, const SidParams& dp, LossTerms terms) {
    require_same_shape(pred, target, "composite_loss");
    return composite_loss(pred, target, masked_elements(pred.shape, grouping, plan, grid), w, sp, dp, terms);
}

} // namespace hypermae
