#include "hypermae/grouping.hpp"

#include "hypermae/errors.hpp"
#include "hypermae/rng.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <limits>
#include <map>
#include <string>

namespace hypermae {

std::string_view to_string(Strategy s) noexcept {
    switch (s) {
    case Strategy::Sci: return "SCI";
    case Strategy::KMeans: return "KMEANS";
    case Strategy::Hac: return "HAC";
    case Strategy::VnirSwir: return "VNIR_SWIR";
    case Strategy::SoilReflectance: return "SOIL_REFLECTANCE";
    }
    return "SCI";
}

Strategy strategy_from_string(std::string_view s) {
    std::string up(s);
    for (auto& ch : up) ch = static_cast<char>(std::toupper(static_cast<unsigned char>(ch)));
    for (auto st : {Strategy::Sci, Strategy::KMeans, Strategy::Hac, Strategy::VnirSwir, Strategy::SoilReflectance})
        if (up == to_string(st)) return st;
    throw ConfigError("", "unknown grouping strategy '" + std::string(s) + "'");
}

std::vector<std::size_t> GroupingResult::members(std::size_t g) const {
    std::vector<std::size_t> out;
    for (std::size_t b = 0; b < assignment.size(); ++b)
        if (assignment[b] == g) out.push_back(b);
    return out;
}

void GroupingResult::validate() const {
    if (assignment.empty()) throw ShapeError("grouping assigns no bands");
    if (group_sizes.size() != num_groups) throw ShapeError("group_sizes length != num_groups");
    std::vector<std::size_t> counts(num_groups, 0);
    for (auto g : assignment) {
        if (g >= num_groups) throw ShapeError("band assigned to a group index >= num_groups");
        ++counts[g];
    }
    if (counts != group_sizes) throw ShapeError("group_sizes do not match the assignment");
    for (auto n : counts)
        if (n == 0) throw ShapeError("grouping has an empty group");
}

GroupingResult make_grouping(std::span<const std::size_t> labels, Strategy strategy) {
    GroupingResult r;
    r.strategy = strategy;
    r.assignment.resize(labels.size());
    std::map<std::size_t, std::size_t> relabel;
    for (std::size_t b = 0; b < labels.size(); ++b) {
        auto [it, inserted] = relabel.try_emplace(labels[b], relabel.size());
        r.assignment[b] = it->second;
    }
    r.num_groups = relabel.size();
    r.group_sizes.assign(r.num_groups, 0);
    for (auto g : r.assignment) ++r.group_sizes[g];
    return r;
}

FeatureMatrix feature_matrix(const ChannelStats& stats) {
    FeatureMatrix f;
    f.rows = stats.size();
    f.cols = 5;
    f.values.resize(f.rows * f.cols);
    f.constant_columns.assign(f.cols, false);
    for (std::size_t r = 0; r < f.rows; ++r) {
        const auto& d = stats[r];
        const double row[5] = {d.mean, d.std, d.dynamic_range, d.coeff_variation, d.self_correlation};
        std::copy(std::begin(row), std::end(row), f.values.begin() + static_cast<std::ptrdiff_t>(r * f.cols));
    }
    if (f.rows == 0) return f;
    const double n = static_cast<double>(f.rows);
    for (std::size_t c = 0; c < f.cols; ++c) {
        double sum = 0.0;
        for (std::size_t r = 0; r < f.rows; ++r) sum += f.values[r * f.cols + c];
        const double mean = sum / n;
        double ss = 0.0;
        for (std::size_t r = 0; r < f.rows; ++r) ss += (f.values[r * f.cols + c] - mean) * (f.values[r * f.cols + c] - mean);
        const double sd = std::sqrt(ss / n);
        // Relative threshold: a column equal up to round-off counts as constant.
        const bool constant = !(sd > 1e-12 * std::max(1.0, std::abs(mean)));
        f.constant_columns[c] = constant;
        for (std::size_t r = 0; r < f.rows; ++r) {
            double& v = f.values[r * f.cols + c];
            v = constant ? 0.0 : (v - mean) / sd;
        }
    }
    return f;
}

std::vector<std::size_t> average_linkage(std::span<const double> distances, std::size_t n, std::size_t g) {
    if (g == 0 || g > n) throw InvalidGroupCount("group count " + std::to_string(g) + " outside [1, " + std::to_string(n) + "]");
    if (distances.size() != n * n) throw ShapeError("distance matrix must be n x n");

    // Slot k holds the cluster whose lowest member is k.
    std::vector<double> d(distances.begin(), distances.end());
    std::vector<std::size_t> label(n), size(n, 1);
    std::vector<bool> active(n, true);
    for (std::size_t i = 0; i < n; ++i) label[i] = i;

    for (std::size_t clusters = n; clusters > g; --clusters) {
        std::size_t bi = 0, bj = 0;
        double best = std::numeric_limits<double>::infinity();
        for (std::size_t i = 0; i < n; ++i) {
            if (!active[i]) continue;
            for (std::size_t j = i + 1; j < n; ++j) {
                if (!active[j]) continue;
                if (d[i * n + j] < best) {
                    best = d[i * n + j];
                    bi = i;
                    bj = j;
                }
            }
        }
        const double wi = static_cast<double>(size[bi]), wj = static_cast<double>(size[bj]);
        for (std::size_t k = 0; k < n; ++k) {
            if (!active[k] || k == bi || k == bj) continue;
            const double merged = (wi * d[bi * n + k] + wj * d[bj * n + k]) / (wi + wj);
            d[bi * n + k] = merged;
            d[k * n + bi] = merged;
        }
        size[bi] += size[bj];
        active[bj] = false;
        for (auto& l : label)
            if (l == bj) l = bi;
    }
    return make_grouping(label, Strategy::Hac).assignment;
}

GroupingResult group_sci(const SciMatrix& m, std::size_t g) {
    if (g == 0 || g > m.size) throw InvalidGroupCount("SCI grouping needs 1 <= g <= C");
    std::vector<double> dist(m.values.size());
    for (std::size_t i = 0; i < m.values.size(); ++i) dist[i] = 1.0 - m.values[i];
    return make_grouping(average_linkage(dist, m.size, g), Strategy::Sci);
}

namespace {

double sq_dist(std::span<const double> a, std::span<const double> b) {
    double s = 0.0;
    for (std::size_t k = 0; k < a.size(); ++k) s += (a[k] - b[k]) * (a[k] - b[k]);
    return s;
}

std::vector<double> euclidean_distances(const FeatureMatrix& f) {
    std::vector<double> d(f.rows * f.rows, 0.0);
    for (std::size_t i = 0; i < f.rows; ++i)
        for (std::size_t j = i + 1; j < f.rows; ++j) {
            const double v = std::sqrt(sq_dist(f.row(i), f.row(j)));
            d[i * f.rows + j] = v;
            d[j * f.rows + i] = v;
        }
    return d;
}

struct LloydRun {
    std::vector<std::size_t> labels;
    double wcss = 0.0;
};

LloydRun lloyd(const FeatureMatrix& f, std::size_t g, std::uint64_t seed) {
    constexpr int kMaxIterations = 300;
    constexpr double kShiftTolerance = 1e-6;
    const std::size_t n = f.rows, dim = f.cols;
    rng::Xoshiro256 gen(seed);

    // k-means++ seeding.
    std::vector<double> centers;
    centers.reserve(g * dim);
    const std::size_t first = static_cast<std::size_t>(gen.below(n));
    centers.insert(centers.end(), f.row(first).begin(), f.row(first).end());
    std::vector<double> nearest(n);
    for (std::size_t i = 0; i < n; ++i) nearest[i] = sq_dist(f.row(i), {centers.data(), dim});
    for (std::size_t k = 1; k < g; ++k) {
        double total = 0.0;
        for (double v : nearest) total += v;
        std::size_t pick = n - 1;
        if (total > 0.0) {
            const double target = gen.uniform() * total;
            double acc = 0.0;
            for (std::size_t i = 0; i < n; ++i) {
                acc += nearest[i];
                if (acc > target) {
                    pick = i;
                    break;
                }
            }
        } else {
            pick = static_cast<std::size_t>(gen.below(n));
        }
        centers.insert(centers.end(), f.row(pick).begin(), f.row(pick).end());
        for (std::size_t i = 0; i < n; ++i)
            nearest[i] = std::min(nearest[i], sq_dist(f.row(i), {centers.data() + k * dim, dim}));
    }

    std::vector<std::size_t> labels(n, 0);
    auto assign = [&] {
        for (std::size_t i = 0; i < n; ++i) {
            double best = std::numeric_limits<double>::infinity();
            for (std::size_t k = 0; k < g; ++k) {
                const double d = sq_dist(f.row(i), {centers.data() + k * dim, dim});
                if (d < best) {
                    best = d;
                    labels[i] = k;
                }
            }
        }
    };
    auto recompute = [&] {
        std::vector<double> next(g * dim, 0.0);
        std::vector<std::size_t> count(g, 0);
        for (std::size_t i = 0; i < n; ++i) {
            ++count[labels[i]];
            for (std::size_t c = 0; c < dim; ++c) next[labels[i] * dim + c] += f(i, c);
        }
        for (std::size_t k = 0; k < g; ++k)
            for (std::size_t c = 0; c < dim; ++c) next[k * dim + c] /= static_cast<double>(count[k]);
        return next;
    };

    for (int it = 0; it < kMaxIterations; ++it) {
        assign();
        // Empty clusters claim the point farthest from its own centroid.
        for (std::size_t k = 0; k < g; ++k) {
            std::vector<std::size_t> count(g, 0);
            for (auto l : labels) ++count[l];
            if (count[k] != 0) continue;
            std::size_t far = n;
            double far_d = -1.0;
            for (std::size_t i = 0; i < n; ++i) {
                if (count[labels[i]] < 2) continue;
                const double d = sq_dist(f.row(i), {centers.data() + labels[i] * dim, dim});
                if (d > far_d) {
                    far_d = d;
                    far = i;
                }
            }
            if (far == n) break;
            labels[far] = k;
        }
        const auto next = recompute();
        double shift = 0.0;
        for (std::size_t k = 0; k < g; ++k)
            shift = std::max(shift, std::sqrt(sq_dist({next.data() + k * dim, dim}, {centers.data() + k * dim, dim})));
        centers = next;
        if (shift < kShiftTolerance) break;
    }

    LloydRun run{labels, 0.0};
    for (std::size_t i = 0; i < n; ++i) run.wcss += sq_dist(f.row(i), {centers.data() + labels[i] * dim, dim});
    run.labels = make_grouping(labels, Strategy::KMeans).assignment;
    return run;
}

} // namespace

GroupingResult group_hac(const FeatureMatrix& f, std::size_t g) {
    if (g == 0 || g > f.rows) throw InvalidGroupCount("HAC grouping needs 1 <= g <= C");
    return make_grouping(average_linkage(euclidean_distances(f), f.rows, g), Strategy::Hac);
}

KMeansFit kmeans(const FeatureMatrix& f, std::size_t g, std::uint64_t seed, std::size_t restarts) {
    if (g == 0 || g > f.rows) throw InvalidGroupCount("k-means needs 1 <= g <= C");
    if (restarts == 0) throw ConfigError("/grouping/restarts", "restarts must be >= 1");
    KMeansFit best;
    best.wcss = std::numeric_limits<double>::infinity();
    for (std::size_t r = 0; r < restarts; ++r) {
        auto run = lloyd(f, g, rng::derive_seed(seed, r));
        if (run.wcss < best.wcss || (run.wcss == best.wcss && run.labels < best.assignment)) {
            best.assignment = std::move(run.labels);
            best.wcss = run.wcss;
        }
    }
    return best;
}

GroupingResult group_kmeans(const FeatureMatrix& f, std::size_t g, std::uint64_t seed, std::size_t restarts) {
    return make_grouping(kmeans(f, g, seed, restarts).assignment, Strategy::KMeans);
}

GroupingResult group_vnir_swir(std::span<const float> wavelengths, double boundary_nm) {
    if (wavelengths.empty()) throw MissingWavelengths("VNIR-SWIR grouping needs wavelengths");
    std::vector<std::size_t> labels(wavelengths.size());
    for (std::size_t b = 0; b < wavelengths.size(); ++b) labels[b] = wavelengths[b] < boundary_nm ? 0 : 1;
    auto r = make_grouping(labels, Strategy::VnirSwir);
    r.warning = r.num_groups < 2;
    return r;
}

GroupingResult group_soil_reflectance(std::span<const float> wavelengths, std::span<const double> boundaries_nm) {
    if (wavelengths.empty()) throw MissingWavelengths("soil-reflectance grouping needs wavelengths");
    for (std::size_t i = 1; i < boundaries_nm.size(); ++i)
        if (!(boundaries_nm[i] > boundaries_nm[i - 1]))
            throw ConfigError("/grouping/sr_boundaries", "boundaries must be strictly increasing");
    std::vector<std::size_t> labels(wavelengths.size());
    for (std::size_t b = 0; b < wavelengths.size(); ++b)
        labels[b] = static_cast<std::size_t>(
            std::upper_bound(boundaries_nm.begin(), boundaries_nm.end(), static_cast<double>(wavelengths[b])) -
            boundaries_nm.begin());
    auto r = make_grouping(labels, Strategy::SoilReflectance);
    r.warning = r.num_groups < boundaries_nm.size() + 1;
    return r;
}

double silhouette_score(const FeatureMatrix& f, const GroupingResult& r) {
    r.validate();
    if (r.num_groups < 2) throw UndefinedScore("silhouette needs at least two groups");
    if (r.channels() != f.rows) throw ShapeError("grouping and feature matrix disagree on band count");
    const auto d = euclidean_distances(f);
    const std::size_t n = f.rows;
    double total = 0.0;
    std::vector<double> sum(r.num_groups);
    for (std::size_t i = 0; i < n; ++i) {
        const std::size_t own = r.assignment[i];
        if (r.group_sizes[own] == 1) continue;
        std::fill(sum.begin(), sum.end(), 0.0);
        for (std::size_t j = 0; j < n; ++j)
            if (j != i) sum[r.assignment[j]] += d[i * n + j];
        const double a = sum[own] / static_cast<double>(r.group_sizes[own] - 1);
        double b = std::numeric_limits<double>::infinity();
        for (std::size_t k = 0; k < r.num_groups; ++k)
            if (k != own) b = std::min(b, sum[k] / static_cast<double>(r.group_sizes[k]));
        const double denom = std::max(a, b);
        if (denom > 0.0) total += (b - a) / denom;
    }
    return total / static_cast<double>(n);
}

double adjusted_rand_index(std::span<const std::size_t> a, std::span<const std::size_t> b) {
    if (a.size() != b.size()) throw ShapeError("ARI labellings differ in length");
    const std::size_t n = a.size();
    auto choose2 = [](double x) { return x * (x - 1.0) / 2.0; };
    std::map<std::pair<std::size_t, std::size_t>, double> table;
    std::map<std::size_t, double> rows, cols;
    for (std::size_t i = 0; i < n; ++i) {
        table[{a[i], b[i]}] += 1.0;
        rows[a[i]] += 1.0;
        cols[b[i]] += 1.0;
    }
    double index = 0.0, sa = 0.0, sb = 0.0;
    for (const auto& [k, v] : table) index += choose2(v);
    for (const auto& [k, v] : rows) sa += choose2(v);
    for (const auto& [k, v] : cols) sb += choose2(v);
    const double total = choose2(static_cast<double>(n));
    const double expected = total > 0.0 ? sa * sb / total : 0.0;
    const double max_index = 0.5 * (sa + sb);
    if (max_index == expected) return 1.0;
    return (index - expected) / (max_index - expected);
}

} // namespace hypermae
