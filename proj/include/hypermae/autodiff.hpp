#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <utility>
#include <vector>

/// Minimal reverse-mode automatic differentiation over dense row-major matrices.
///
/// Every value is a rows x cols matrix of doubles. Operations append a node to a
/// Tape; Tape::backward walks the nodes in reverse creation order. Leaves
/// created with `parameter` live outside the tape and accumulate gradients
/// across backward passes until cleared.
namespace hypermae::ad {

struct Node {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> value;
    std::vector<double> grad;  ///< allocated lazily, same size as value
    bool requires_grad = false;
    std::function<void(Node&)> backward;

    std::size_t size() const noexcept { return value.size(); }
    double at(std::size_t r, std::size_t c) const { return value[r * cols + c]; }
    void ensure_grad() {
        if (grad.size() != value.size()) grad.assign(value.size(), 0.0);
    }
};

using Var = std::shared_ptr<Node>;

/// Trainable leaf owning its value and gradient.
Var parameter(std::size_t rows, std::size_t cols, std::vector<double> values);

class Tape {
public:
    /// Constant input; never receives gradient.
    Var constant(std::size_t rows, std::size_t cols, std::vector<double> values);

    /// Appends an op result; `backward` reads node.grad and accumulates into parents.
    Var record(std::size_t rows, std::size_t cols, std::vector<double> values, bool requires_grad,
               std::function<void(Node&)> backward);

    /// Seeds d(objective)/d(output) for each pair, then runs every recorded
    /// backward function in reverse order. The tape is cleared afterwards.
    /// Throws TraceError when nothing has been recorded.
    void backward(std::span<const std::pair<Var, std::vector<double>>> seeds);

    void clear() noexcept { nodes_.clear(); }
    bool empty() const noexcept { return nodes_.empty(); }
    std::size_t size() const noexcept { return nodes_.size(); }

private:
    std::vector<Var> nodes_;
};

// Operations. Shapes are checked and mismatches raise ShapeError.

/// a[n,k] * b[k,m]
Var matmul(Tape& t, const Var& a, const Var& b);
/// a[n,k] * b[m,k]^T
Var matmul_nt(Tape& t, const Var& a, const Var& b);
Var add(Tape& t, const Var& a, const Var& b);
/// a[n,m] + row[1,m] broadcast over rows
Var add_row(Tape& t, const Var& a, const Var& row);
Var scale(Tape& t, const Var& a, double s);
/// Row-wise layer normalization with affine gain[1,m] and shift[1,m].
Var layer_norm(Tape& t, const Var& a, const Var& gain, const Var& shift, double eps = 1e-5);
/// Exact GELU: x * Phi(x).
Var gelu(Tape& t, const Var& a);
/// Row-wise softmax with max subtraction.
Var softmax_rows(Tape& t, const Var& a);
/// Columns [begin, end).
Var slice_cols(Tape& t, const Var& a, std::size_t begin, std::size_t end);
Var concat_cols(Tape& t, std::span<const Var> parts);
Var concat_rows(Tape& t, std::span<const Var> parts);
/// out row i = a row index[i]; repeated indices accumulate gradient.
Var gather_rows(Tape& t, const Var& a, std::span<const std::size_t> index);

} // namespace hypermae::ad
