#ifndef DGNAEA_AUTODIFF_HPP
#define DGNAEA_AUTODIFF_HPP

// Reverse-mode differentiation over 2-D double matrices.
//
// A Tape records every operation in execution order; backward() walks the
// records in exact reverse order, so gradients are reproducible bit for bit.
// A tape is confined to one thread. Values are cheap handles into a tape and
// must not outlive it.

#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <vector>

#include "dgnaea/kernels.hpp"
#include "dgnaea/matrix.hpp"

namespace dgnaea::ad {

class Tape;

class Value {
public:
    Value() = default;
    Value(Tape* tape, std::size_t id) : tape_(tape), id_(id) {}

    const Matrix& data() const;
    /// Gradient accumulated so far; a zero matrix of the data shape if none.
    Matrix grad() const;
    std::size_t rows() const { return data().rows(); }
    std::size_t cols() const { return data().cols(); }
    double scalar() const;

    Tape* tape() const noexcept { return tape_; }
    std::size_t id() const noexcept { return id_; }
    bool valid() const noexcept { return tape_ != nullptr; }

private:
    Tape* tape_ = nullptr;
    std::size_t id_ = 0;
};

/// Row index list with its inverse grouping, shared by gather and scatter.
struct RowIndex {
    std::vector<std::size_t> index;  // one entry per output (gather) / input (scatter) row
    std::size_t n_rows = 0;          // rows of the node-side matrix
    kernels::RowGroups groups;       // index grouped by node row

    static std::shared_ptr<const RowIndex> make(std::vector<std::size_t> index, std::size_t n_rows);
};

class Tape {
public:
    using BackwardFn = std::function<void(Tape&, std::size_t self)>;

    Tape() = default;
    Tape(const Tape&) = delete;
    Tape& operator=(const Tape&) = delete;

    /// Leaf that never receives gradient.
    Value constant(Matrix m);
    /// Leaf that accumulates gradient across backward() calls.
    Value parameter(Matrix m);

    Value record(Matrix value, std::span<const std::size_t> parents, BackwardFn backward);

    /// Propagates d(loss)/d(node) to every node. Leaf gradients accumulate
    /// across calls; interior gradients are recomputed each call.
    void backward(const Value& loss);
    void zero_grad();

    const Matrix& value(std::size_t id) const { return nodes_[id].value; }
    /// Gradient buffer for `id`, allocated as zeros on first use.
    Matrix& grad_buffer(std::size_t id);
    bool has_grad(std::size_t id) const { return !nodes_[id].grad.empty(); }
    const Matrix& grad_if_any(std::size_t id) const { return nodes_[id].grad; }
    bool requires_grad(std::size_t id) const { return nodes_[id].requires_grad; }
    std::size_t size() const noexcept { return nodes_.size(); }

    /// Id of the first node holding a NaN or Inf, if any.
    std::optional<std::size_t> first_non_finite() const;

    /// Folds piecewise-linear branch decisions (relu masks) into a running
    /// hash. Two evaluations with equal signatures took the same branches.
    void note_branches(std::uint64_t h);
    std::uint64_t branch_signature() const noexcept { return branch_signature_; }

private:
    struct Node {
        Matrix value;
        Matrix grad;
        bool requires_grad = false;
        bool leaf = false;
        BackwardFn backward;
    };
    std::vector<Node> nodes_;
    std::uint64_t branch_signature_ = 0xcbf29ce484222325ULL;
};

// Operations. All operands must live on the same tape.
Value matmul(const Value& a, const Value& b);
Value add(const Value& a, const Value& b);
Value sub(const Value& a, const Value& b);
Value hadamard(const Value& a, const Value& b);
/// a[m x n] + bias[1 x n] broadcast over rows.
Value add_row(const Value& a, const Value& bias);
/// scale * a + shift, elementwise.
Value affine(const Value& a, double scale, double shift);
Value sigmoid(const Value& a);
Value tanh(const Value& a);
/// relu'(0) is 0.
Value relu(const Value& a);
/// Column-wise concatenation. Zero-width parts are allowed.
Value concat(std::span<const Value> parts);
Value concat(std::initializer_list<Value> parts);
/// out[e] = a[index[e]]
Value gather_rows(const Value& a, const std::shared_ptr<const RowIndex>& index);
/// out[v] = sum over e with index[e] == v of a[e], in ascending e.
Value scatter_add_rows(const Value& a, const std::shared_ptr<const RowIndex>& index);
/// Sum of all elements, as 1 x 1.
Value sum(const Value& a);
/// Mean of (a - target)^2 over all elements, as 1 x 1.
Value mean_squared_error(const Value& a, const Value& target);

struct GradCheckReport {
    double max_rel_error = 0.0;
    std::size_t checked = 0;
    std::size_t excluded = 0;   // coordinates whose perturbation crossed a kink
    std::size_t worst_param = 0;
    std::size_t worst_index = 0;
    double worst_analytic = 0.0;
    double worst_numeric = 0.0;
};

using ScalarFn = std::function<Value(Tape&, std::span<const Value>)>;

/// Compares backward() gradients of `f` against central differences
/// (f(p + eps) - f(p - eps)) / (2 eps), coordinate by coordinate.
/// Relative error uses max(|g|, |g_fd|, 1e-8) as denominator. Coordinates
/// where either perturbed evaluation takes a different relu branch than the
/// base evaluation are excluded.
GradCheckReport finite_diff_check(const ScalarFn& f, std::span<const Matrix> params, double eps = 1e-5);

} // namespace dgnaea::ad

#endif // DGNAEA_AUTODIFF_HPP
