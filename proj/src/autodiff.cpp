#include "hypermae/autodiff.hpp"

#include "hypermae/errors.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

namespace hypermae::ad {

namespace {

void require(bool ok, const char* what) {
    if (!ok) throw ShapeError(std::string("autodiff: ") + what);
}

bool any_grad(std::initializer_list<const Var*> vars) {
    for (const Var* v : vars)
        if ((*v)->requires_grad) return true;
    return false;
}

} // namespace

Var parameter(std::size_t rows, std::size_t cols, std::vector<double> values) {
    require(values.size() == rows * cols, "parameter size mismatch");
    auto n = std::make_shared<Node>();
    n->rows = rows;
    n->cols = cols;
    n->value = std::move(values);
    n->requires_grad = true;
    n->ensure_grad();
    return n;
}

Var Tape::constant(std::size_t rows, std::size_t cols, std::vector<double> values) {
    require(values.size() == rows * cols, "constant size mismatch");
    auto n = std::make_shared<Node>();
    n->rows = rows;
    n->cols = cols;
    n->value = std::move(values);
    return n;
}

Var Tape::record(std::size_t rows, std::size_t cols, std::vector<double> values, bool requires_grad,
                 std::function<void(Node&)> backward) {
    auto n = std::make_shared<Node>();
    n->rows = rows;
    n->cols = cols;
    n->value = std::move(values);
    n->requires_grad = requires_grad;
    if (requires_grad) n->backward = std::move(backward);
    nodes_.push_back(n);
    return n;
}

void Tape::backward(std::span<const std::pair<Var, std::vector<double>>> seeds) {
    if (nodes_.empty()) throw TraceError("backward called without a recorded forward pass");
    for (const auto& [var, g] : seeds) {
        require(g.size() == var->size(), "seed gradient size mismatch");
        if (!var->requires_grad) continue;
        var->ensure_grad();
        for (std::size_t i = 0; i < g.size(); ++i) var->grad[i] += g[i];
    }
    for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) {
        Node& n = **it;
        if (n.requires_grad && n.backward && !n.grad.empty()) n.backward(n);
    }
    nodes_.clear();
}

Var matmul(Tape& t, const Var& a, const Var& b) {
    require(a->cols == b->rows, "matmul inner dimensions differ");
    const std::size_t n = a->rows, k = a->cols, m = b->cols;
    std::vector<double> out(n * m, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        double* o = out.data() + i * m;
        for (std::size_t p = 0; p < k; ++p) {
            const double av = a->value[i * k + p];
            const double* br = b->value.data() + p * m;
            for (std::size_t j = 0; j < m; ++j) o[j] += av * br[j];
        }
    }
    return t.record(n, m, std::move(out), any_grad({&a, &b}), [a, b, n, k, m](Node& self) {
        const double* g = self.grad.data();
        if (a->requires_grad) {
            a->ensure_grad();
            for (std::size_t i = 0; i < n; ++i)
                for (std::size_t p = 0; p < k; ++p) {
                    const double* br = b->value.data() + p * m;
                    const double* gr = g + i * m;
                    double s = 0.0;
                    for (std::size_t j = 0; j < m; ++j) s += gr[j] * br[j];
                    a->grad[i * k + p] += s;
                }
        }
        if (b->requires_grad) {
            b->ensure_grad();
            for (std::size_t i = 0; i < n; ++i)
                for (std::size_t p = 0; p < k; ++p) {
                    const double av = a->value[i * k + p];
                    double* bg = b->grad.data() + p * m;
                    const double* gr = g + i * m;
                    for (std::size_t j = 0; j < m; ++j) bg[j] += av * gr[j];
                }
        }
    });
}

Var matmul_nt(Tape& t, const Var& a, const Var& b) {
    require(a->cols == b->cols, "matmul_nt inner dimensions differ");
    const std::size_t n = a->rows, k = a->cols, m = b->rows;
    std::vector<double> out(n * m);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < m; ++j) {
            const double* ar = a->value.data() + i * k;
            const double* br = b->value.data() + j * k;
            double s = 0.0;
            for (std::size_t p = 0; p < k; ++p) s += ar[p] * br[p];
            out[i * m + j] = s;
        }
    return t.record(n, m, std::move(out), any_grad({&a, &b}), [a, b, n, k, m](Node& self) {
        if (a->requires_grad) a->ensure_grad();
        if (b->requires_grad) b->ensure_grad();
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < m; ++j) {
                const double g = self.grad[i * m + j];
                if (g == 0.0) continue;
                if (a->requires_grad) {
                    double* ag = a->grad.data() + i * k;
                    const double* br = b->value.data() + j * k;
                    for (std::size_t p = 0; p < k; ++p) ag[p] += g * br[p];
                }
                if (b->requires_grad) {
                    double* bg = b->grad.data() + j * k;
                    const double* ar = a->value.data() + i * k;
                    for (std::size_t p = 0; p < k; ++p) bg[p] += g * ar[p];
                }
            }
    });
}

Var add(Tape& t, const Var& a, const Var& b) {
    require(a->rows == b->rows && a->cols == b->cols, "add shapes differ");
    std::vector<double> out(a->size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = a->value[i] + b->value[i];
    return t.record(a->rows, a->cols, std::move(out), any_grad({&a, &b}), [a, b](Node& self) {
        for (const Var* v : {&a, &b}) {
            if (!(*v)->requires_grad) continue;
            (*v)->ensure_grad();
            for (std::size_t i = 0; i < self.grad.size(); ++i) (*v)->grad[i] += self.grad[i];
        }
    });
}

Var add_row(Tape& t, const Var& a, const Var& row) {
    require(row->rows == 1 && row->cols == a->cols, "add_row expects a 1 x cols row");
    const std::size_t n = a->rows, m = a->cols;
    std::vector<double> out(a->value);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < m; ++j) out[i * m + j] += row->value[j];
    return t.record(n, m, std::move(out), any_grad({&a, &row}), [a, row, n, m](Node& self) {
        if (a->requires_grad) {
            a->ensure_grad();
            for (std::size_t i = 0; i < self.grad.size(); ++i) a->grad[i] += self.grad[i];
        }
        if (row->requires_grad) {
            row->ensure_grad();
            for (std::size_t i = 0; i < n; ++i)
                for (std::size_t j = 0; j < m; ++j) row->grad[j] += self.grad[i * m + j];
        }
    });
}

Var scale(Tape& t, const Var& a, double s) {
    std::vector<double> out(a->value);
    for (auto& v : out) v *= s;
    return t.record(a->rows, a->cols, std::move(out), a->requires_grad, [a, s](Node& self) {
        a->ensure_grad();
        for (std::size_t i = 0; i < self.grad.size(); ++i) a->grad[i] += s * self.grad[i];
    });
}

Var layer_norm(Tape& t, const Var& a, const Var& gain, const Var& shift, double eps) {
    const std::size_t n = a->rows, m = a->cols;
    require(gain->rows == 1 && gain->cols == m && shift->rows == 1 && shift->cols == m, "layer_norm affine shape");
    std::vector<double> out(n * m), xhat(n * m), inv(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double* x = a->value.data() + i * m;
        double mean = 0.0;
        for (std::size_t j = 0; j < m; ++j) mean += x[j];
        mean /= static_cast<double>(m);
        double var = 0.0;
        for (std::size_t j = 0; j < m; ++j) var += (x[j] - mean) * (x[j] - mean);
        var /= static_cast<double>(m);
        inv[i] = 1.0 / std::sqrt(var + eps);
        for (std::size_t j = 0; j < m; ++j) {
            xhat[i * m + j] = (x[j] - mean) * inv[i];
            out[i * m + j] = xhat[i * m + j] * gain->value[j] + shift->value[j];
        }
    }
    return t.record(n, m, std::move(out), any_grad({&a, &gain, &shift}),
                    [a, gain, shift, n, m, xhat = std::move(xhat), inv = std::move(inv)](Node& self) {
                        if (gain->requires_grad) gain->ensure_grad();
                        if (shift->requires_grad) shift->ensure_grad();
                        if (a->requires_grad) a->ensure_grad();
                        std::vector<double> dxhat(m);
                        for (std::size_t i = 0; i < n; ++i) {
                            const double* g = self.grad.data() + i * m;
                            const double* xh = xhat.data() + i * m;
                            double mean_d = 0.0, mean_dx = 0.0;
                            for (std::size_t j = 0; j < m; ++j) {
                                if (gain->requires_grad) gain->grad[j] += g[j] * xh[j];
                                if (shift->requires_grad) shift->grad[j] += g[j];
                                dxhat[j] = g[j] * gain->value[j];
                                mean_d += dxhat[j];
                                mean_dx += dxhat[j] * xh[j];
                            }
                            if (!a->requires_grad) continue;
                            mean_d /= static_cast<double>(m);
                            mean_dx /= static_cast<double>(m);
                            for (std::size_t j = 0; j < m; ++j)
                                a->grad[i * m + j] += inv[i] * (dxhat[j] - mean_d - xh[j] * mean_dx);
                        }
                    });
}

Var gelu(Tape& t, const Var& a) {
    std::vector<double> out(a->size());
    for (std::size_t i = 0; i < out.size(); ++i) {
        const double x = a->value[i];
        out[i] = 0.5 * x * (1.0 + std::erf(x / std::numbers::sqrt2));
    }
    return t.record(a->rows, a->cols, std::move(out), a->requires_grad, [a](Node& self) {
        a->ensure_grad();
        const double inv_sqrt_2pi = 1.0 / std::sqrt(2.0 * std::numbers::pi);
        for (std::size_t i = 0; i < self.grad.size(); ++i) {
            const double x = a->value[i];
            const double cdf = 0.5 * (1.0 + std::erf(x / std::numbers::sqrt2));
            const double pdf = inv_sqrt_2pi * std::exp(-0.5 * x * x);
            a->grad[i] += self.grad[i] * (cdf + x * pdf);
        }
    });
}

Var softmax_rows(Tape& t, const Var& a) {
    const std::size_t n = a->rows, m = a->cols;
    std::vector<double> out(n * m);
    for (std::size_t i = 0; i < n; ++i) {
        const double* x = a->value.data() + i * m;
        double* y = out.data() + i * m;
        const double mx = *std::max_element(x, x + m);
        double s = 0.0;
        for (std::size_t j = 0; j < m; ++j) {
            y[j] = std::exp(x[j] - mx);
            s += y[j];
        }
        for (std::size_t j = 0; j < m; ++j) y[j] /= s;
    }
    return t.record(n, m, std::move(out), a->requires_grad, [a, n, m](Node& self) {
        a->ensure_grad();
        for (std::size_t i = 0; i < n; ++i) {
            const double* y = self.value.data() + i * m;
            const double* g = self.grad.data() + i * m;
            double dot = 0.0;
            for (std::size_t j = 0; j < m; ++j) dot += g[j] * y[j];
            for (std::size_t j = 0; j < m; ++j) a->grad[i * m + j] += y[j] * (g[j] - dot);
        }
    });
}

Var slice_cols(Tape& t, const Var& a, std::size_t begin, std::size_t end) {
    require(begin < end && end <= a->cols, "slice_cols range");
    const std::size_t n = a->rows, m = a->cols, w = end - begin;
    std::vector<double> out(n * w);
    for (std::size_t i = 0; i < n; ++i)
        std::copy_n(a->value.data() + i * m + begin, w, out.data() + i * w);
    return t.record(n, w, std::move(out), a->requires_grad, [a, n, m, w, begin](Node& self) {
        a->ensure_grad();
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < w; ++j) a->grad[i * m + begin + j] += self.grad[i * w + j];
    });
}

Var concat_cols(Tape& t, std::span<const Var> parts) {
    require(!parts.empty(), "concat_cols of nothing");
    const std::size_t n = parts.front()->rows;
    std::size_t m = 0;
    bool grad = false;
    for (const auto& p : parts) {
        require(p->rows == n, "concat_cols row counts differ");
        m += p->cols;
        grad = grad || p->requires_grad;
    }
    std::vector<double> out(n * m);
    std::size_t off = 0;
    for (const auto& p : parts) {
        for (std::size_t i = 0; i < n; ++i) std::copy_n(p->value.data() + i * p->cols, p->cols, out.data() + i * m + off);
        off += p->cols;
    }
    std::vector<Var> keep(parts.begin(), parts.end());
    return t.record(n, m, std::move(out), grad, [keep = std::move(keep), n, m](Node& self) {
        std::size_t off = 0;
        for (const auto& p : keep) {
            if (p->requires_grad) {
                p->ensure_grad();
                for (std::size_t i = 0; i < n; ++i)
                    for (std::size_t j = 0; j < p->cols; ++j) p->grad[i * p->cols + j] += self.grad[i * m + off + j];
            }
            off += p->cols;
        }
    });
}

Var concat_rows(Tape& t, std::span<const Var> parts) {
    require(!parts.empty(), "concat_rows of nothing");
    const std::size_t m = parts.front()->cols;
    std::size_t n = 0;
    bool grad = false;
    for (const auto& p : parts) {
        require(p->cols == m, "concat_rows column counts differ");
        n += p->rows;
        grad = grad || p->requires_grad;
    }
    std::vector<double> out;
    out.reserve(n * m);
    for (const auto& p : parts) out.insert(out.end(), p->value.begin(), p->value.end());
    std::vector<Var> keep(parts.begin(), parts.end());
    return t.record(n, m, std::move(out), grad, [keep = std::move(keep)](Node& self) {
        std::size_t off = 0;
        for (const auto& p : keep) {
            if (p->requires_grad) {
                p->ensure_grad();
                for (std::size_t i = 0; i < p->size(); ++i) p->grad[i] += self.grad[off + i];
            }
            off += p->size();
        }
    });
}

Var gather_rows(Tape& t, const Var& a, std::span<const std::size_t> index) {
    const std::size_t m = a->cols;
    std::vector<double> out(index.size() * m);
    for (std::size_t i = 0; i < index.size(); ++i) {
        require(index[i] < a->rows, "gather_rows index out of range");
        std::copy_n(a->value.data() + index[i] * m, m, out.data() + i * m);
    }
    std::vector<std::size_t> idx(index.begin(), index.end());
    return t.record(index.size(), m, std::move(out), a->requires_grad, [a, m, idx = std::move(idx)](Node& self) {
        a->ensure_grad();
        for (std::size_t i = 0; i < idx.size(); ++i)
            for (std::size_t j = 0; j < m; ++j) a->grad[idx[i] * m + j] += self.grad[i * m + j];
    });
}

} // namespace hypermae::ad
