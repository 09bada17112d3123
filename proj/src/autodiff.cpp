#include "dgnaea/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace dgnaea::ad {

namespace {

Tape& tape_of(const Value& a) {
    if (!a.valid())
        throw std::invalid_argument("operation on an unbound value");
    return *a.tape();
}

Tape& tape_of(const Value& a, const Value& b) {
    Tape& t = tape_of(a);
    if (b.tape() != &t)
        throw std::invalid_argument("operands recorded on different tapes");
    return t;
}

std::string shape_str(const Matrix& m) {
    return std::to_string(m.rows()) + "x" + std::to_string(m.cols());
}

void require_same_shape(const Value& a, const Value& b, const char* op) {
    if (!a.data().same_shape(b.data()))
        throw std::invalid_argument(std::string(op) + ": shape mismatch " + shape_str(a.data()) + " vs " +
                                    shape_str(b.data()));
}

// Elementwise unary op whose derivative is expressed through input x and output y.
template <typename Fwd, typename Deriv>
Value unary(const Value& a, Fwd fwd, Deriv deriv) {
    Tape& t = tape_of(a);
    const Matrix& x = a.data();
    Matrix y(x.rows(), x.cols());
    for (std::size_t i = 0; i < x.size(); ++i)
        y[i] = fwd(x[i]);
    const std::size_t pid = a.id();
    const std::size_t parents[] = {pid};
    return t.record(std::move(y), parents, [pid, deriv](Tape& tp, std::size_t self) {
        const Matrix& g = tp.grad_if_any(self);
        const Matrix& xin = tp.value(pid);
        const Matrix& yout = tp.value(self);
        Matrix& ga = tp.grad_buffer(pid);
        for (std::size_t i = 0; i < g.size(); ++i)
            ga[i] += g[i] * deriv(xin[i], yout[i]);
    });
}

void accumulate(Matrix& dst, const Matrix& src, double sign = 1.0) {
    for (std::size_t i = 0; i < src.size(); ++i)
        dst[i] += sign * src[i];
}

} // namespace

// --- Value -------------------------------------------------------------------

const Matrix& Value::data() const {
    if (!tape_)
        throw std::logic_error("unbound value");
    return tape_->value(id_);
}

Matrix Value::grad() const {
    const Matrix& g = tape_->grad_if_any(id_);
    if (g.empty())
        return Matrix(data().rows(), data().cols());
    return g;
}

double Value::scalar() const {
    const Matrix& d = data();
    if (d.size() != 1)
        throw std::invalid_argument("value is not a scalar: " + shape_str(d));
    return d[0];
}

std::shared_ptr<const RowIndex> RowIndex::make(std::vector<std::size_t> index, std::size_t n_rows) {
    for (std::size_t v : index)
        if (v >= n_rows)
            throw std::out_of_range("row index " + std::to_string(v) + " out of range for " +
                                    std::to_string(n_rows) + " rows");
    auto r = std::make_shared<RowIndex>();
    r->groups = kernels::RowGroups::build(index, n_rows);
    r->index = std::move(index);
    r->n_rows = n_rows;
    return r;
}

// --- Tape --------------------------------------------------------------------

Value Tape::constant(Matrix m) {
    nodes_.push_back(Node{std::move(m), {}, false, true, {}});
    return Value(this, nodes_.size() - 1);
}

Value Tape::parameter(Matrix m) {
    nodes_.push_back(Node{std::move(m), {}, true, true, {}});
    return Value(this, nodes_.size() - 1);
}

Value Tape::record(Matrix value, std::span<const std::size_t> parents, BackwardFn backward) {
    const bool needs = std::any_of(parents.begin(), parents.end(),
                                   [this](std::size_t p) { return nodes_[p].requires_grad; });
    nodes_.push_back(Node{std::move(value), {}, needs, false, needs ? std::move(backward) : BackwardFn{}});
    return Value(this, nodes_.size() - 1);
}

Matrix& Tape::grad_buffer(std::size_t id) {
    Node& n = nodes_[id];
    if (n.grad.empty())
        n.grad = Matrix(n.value.rows(), n.value.cols());
    return n.grad;
}

void Tape::backward(const Value& loss) {
    if (loss.tape() != this)
        throw std::invalid_argument("loss belongs to another tape");
    if (loss.data().size() != 1)
        throw std::invalid_argument("backward requires a scalar loss, got " + shape_str(loss.data()));
    for (Node& n : nodes_)
        if (!n.leaf)
            n.grad = Matrix();
    grad_buffer(loss.id())[0] += 1.0;
    for (std::size_t id = loss.id() + 1; id-- > 0;) {
        Node& n = nodes_[id];
        if (n.backward && !n.grad.empty())
            n.backward(*this, id);
    }
}

void Tape::zero_grad() {
    for (Node& n : nodes_)
        n.grad = Matrix();
}

std::optional<std::size_t> Tape::first_non_finite() const {
    for (std::size_t i = 0; i < nodes_.size(); ++i)
        if (!nodes_[i].value.all_finite())
            return i;
    return std::nullopt;
}

void Tape::note_branches(std::uint64_t h) {
    branch_signature_ = (branch_signature_ ^ h) * 0x100000001b3ULL;
}

// --- operations --------------------------------------------------------------

Value matmul(const Value& a, const Value& b) {
    Tape& t = tape_of(a, b);
    const Matrix& am = a.data();
    const Matrix& bm = b.data();
    if (am.cols() != bm.rows())
        throw std::invalid_argument("matmul: inner dimensions differ " + shape_str(am) + " * " + shape_str(bm));
    Matrix out(am.rows(), bm.cols());
    kernels::parallel::matmul(am, bm, out);
    const std::size_t ia = a.id(), ib = b.id();
    const std::size_t parents[] = {ia, ib};
    return t.record(std::move(out), parents, [ia, ib](Tape& tp, std::size_t self) {
        const Matrix& g = tp.grad_if_any(self);
        if (tp.requires_grad(ia))
            kernels::parallel::matmul_a_bt_acc(g, tp.value(ib), tp.grad_buffer(ia));
        if (tp.requires_grad(ib))
            kernels::parallel::matmul_at_b_acc(tp.value(ia), g, tp.grad_buffer(ib));
    });
}

namespace {
template <typename Fwd>
Value binary(const Value& a, const Value& b, const char* name, Fwd fwd, double sign_b, bool product) {
    Tape& t = tape_of(a, b);
    require_same_shape(a, b, name);
    const Matrix& am = a.data();
    const Matrix& bm = b.data();
    Matrix out(am.rows(), am.cols());
    for (std::size_t i = 0; i < am.size(); ++i)
        out[i] = fwd(am[i], bm[i]);
    const std::size_t ia = a.id(), ib = b.id();
    const std::size_t parents[] = {ia, ib};
    return t.record(std::move(out), parents, [ia, ib, sign_b, product](Tape& tp, std::size_t self) {
        const Matrix& g = tp.grad_if_any(self);
        if (product) {
            if (tp.requires_grad(ia)) {
                Matrix& ga = tp.grad_buffer(ia);
                const Matrix& bv = tp.value(ib);
                for (std::size_t i = 0; i < g.size(); ++i)
                    ga[i] += g[i] * bv[i];
            }
            if (tp.requires_grad(ib)) {
                Matrix& gb = tp.grad_buffer(ib);
                const Matrix& av = tp.value(ia);
                for (std::size_t i = 0; i < g.size(); ++i)
                    gb[i] += g[i] * av[i];
            }
            return;
        }
        if (tp.requires_grad(ia))
            accumulate(tp.grad_buffer(ia), g);
        if (tp.requires_grad(ib))
            accumulate(tp.grad_buffer(ib), g, sign_b);
    });
}
} // namespace

Value add(const Value& a, const Value& b) {
    return binary(a, b, "add", [](double x, double y) { return x + y; }, 1.0, false);
}

Value sub(const Value& a, const Value& b) {
    return binary(a, b, "sub", [](double x, double y) { return x - y; }, -1.0, false);
}

Value hadamard(const Value& a, const Value& b) {
    return binary(a, b, "hadamard", [](double x, double y) { return x * y; }, 1.0, true);
}

Value add_row(const Value& a, const Value& bias) {
    Tape& t = tape_of(a, bias);
    const Matrix& am = a.data();
    const Matrix& bm = bias.data();
    if (bm.rows() != 1 || bm.cols() != am.cols())
        throw std::invalid_argument("add_row: bias " + shape_str(bm) + " does not match " + shape_str(am));
    Matrix out = am;
    const std::size_t n = am.cols();
    for (std::size_t r = 0; r < am.rows(); ++r)
        for (std::size_t j = 0; j < n; ++j)
            out(r, j) += bm[j];
    const std::size_t ia = a.id(), ib = bias.id();
    const std::size_t parents[] = {ia, ib};
    return t.record(std::move(out), parents, [ia, ib](Tape& tp, std::size_t self) {
        const Matrix& g = tp.grad_if_any(self);
        if (tp.requires_grad(ia))
            accumulate(tp.grad_buffer(ia), g);
        if (tp.requires_grad(ib)) {
            Matrix& gb = tp.grad_buffer(ib);
            const std::size_t cols = g.cols();
            for (std::size_t r = 0; r < g.rows(); ++r)
                for (std::size_t j = 0; j < cols; ++j)
                    gb[j] += g(r, j);
        }
    });
}

Value affine(const Value& a, double scale, double shift) {
    return unary(
        a, [scale, shift](double x) { return scale * x + shift; },
        [scale](double, double) { return scale; });
}

Value sigmoid(const Value& a) {
    return unary(
        a, [](double x) { return 1.0 / (1.0 + std::exp(-x)); },
        [](double, double y) { return y * (1.0 - y); });
}

Value tanh(const Value& a) {
    return unary(
        a, [](double x) { return std::tanh(x); }, [](double, double y) { return 1.0 - y * y; });
}

Value relu(const Value& a) {
    Tape& t = tape_of(a);
    std::uint64_t h = 0x9e3779b97f4a7c15ULL;
    for (double x : a.data().values())
        h = (h ^ static_cast<std::uint64_t>(x > 0.0)) * 0x100000001b3ULL;
    t.note_branches(h);
    return unary(
        a, [](double x) { return x > 0.0 ? x : 0.0; }, [](double x, double) { return x > 0.0 ? 1.0 : 0.0; });
}

Value concat(std::initializer_list<Value> parts) {
    return concat(std::span<const Value>(parts.begin(), parts.size()));
}

Value concat(std::span<const Value> parts) {
    if (parts.empty())
        throw std::invalid_argument("concat: no parts");
    Tape& t = tape_of(parts[0]);
    const std::size_t rows = parts[0].rows();
    std::size_t width = 0;
    std::vector<std::size_t> ids;
    std::vector<std::size_t> widths;
    for (const Value& p : parts) {
        if (p.tape() != &t)
            throw std::invalid_argument("concat: parts recorded on different tapes");
        if (p.rows() != rows)
            throw std::invalid_argument("concat: leading dimension mismatch " + std::to_string(p.rows()) +
                                        " vs " + std::to_string(rows));
        ids.push_back(p.id());
        widths.push_back(p.cols());
        width += p.cols();
    }
    Matrix out(rows, width);
    std::size_t offset = 0;
    for (const Value& p : parts) {
        const Matrix& pm = p.data();
        for (std::size_t r = 0; r < rows; ++r)
            for (std::size_t j = 0; j < pm.cols(); ++j)
                out(r, offset + j) = pm(r, j);
        offset += pm.cols();
    }
    return t.record(std::move(out), ids, [ids, widths](Tape& tp, std::size_t self) {
        const Matrix& g = tp.grad_if_any(self);
        std::size_t off = 0;
        for (std::size_t k = 0; k < ids.size(); ++k) {
            if (tp.requires_grad(ids[k]) && widths[k] > 0) {
                Matrix& gp = tp.grad_buffer(ids[k]);
                for (std::size_t r = 0; r < g.rows(); ++r)
                    for (std::size_t j = 0; j < widths[k]; ++j)
                        gp(r, j) += g(r, off + j);
            }
            off += widths[k];
        }
    });
}

Value gather_rows(const Value& a, const std::shared_ptr<const RowIndex>& index) {
    Tape& t = tape_of(a);
    if (index->n_rows != a.rows())
        throw std::invalid_argument("gather_rows: index built for " + std::to_string(index->n_rows) +
                                    " rows, matrix has " + std::to_string(a.rows()));
    Matrix out(index->index.size(), a.cols());
    kernels::parallel::gather_rows(a.data(), index->index, out);
    const std::size_t ia = a.id();
    const std::size_t parents[] = {ia};
    return t.record(std::move(out), parents, [ia, index](Tape& tp, std::size_t self) {
        kernels::parallel::scatter_add_rows(tp.grad_if_any(self), index->groups, tp.grad_buffer(ia));
    });
}

Value scatter_add_rows(const Value& a, const std::shared_ptr<const RowIndex>& index) {
    Tape& t = tape_of(a);
    if (index->index.size() != a.rows())
        throw std::invalid_argument("scatter_add_rows: " + std::to_string(index->index.size()) +
                                    " indices for " + std::to_string(a.rows()) + " rows");
    Matrix out(index->n_rows, a.cols());
    kernels::parallel::scatter_add_rows(a.data(), index->groups, out);
    const std::size_t ia = a.id();
    const std::size_t parents[] = {ia};
    return t.record(std::move(out), parents, [ia, index](Tape& tp, std::size_t self) {
        const Matrix& g = tp.grad_if_any(self);
        Matrix& ga = tp.grad_buffer(ia);
        const std::size_t f = g.cols();
        for (std::size_t e = 0; e < index->index.size(); ++e) {
            const std::size_t v = index->index[e];
            for (std::size_t j = 0; j < f; ++j)
                ga(e, j) += g(v, j);
        }
    });
}

Value sum(const Value& a) {
    Tape& t = tape_of(a);
    double s = 0.0;
    for (double v : a.data().values())
        s += v;
    const std::size_t ia = a.id();
    const std::size_t parents[] = {ia};
    return t.record(Matrix(1, 1, s), parents, [ia](Tape& tp, std::size_t self) {
        const double g = tp.grad_if_any(self)[0];
        Matrix& ga = tp.grad_buffer(ia);
        for (std::size_t i = 0; i < ga.size(); ++i)
            ga[i] += g;
    });
}

Value mean_squared_error(const Value& a, const Value& target) {
    Tape& t = tape_of(a, target);
    require_same_shape(a, target, "mean_squared_error");
    const Matrix& am = a.data();
    const Matrix& tm = target.data();
    if (am.size() == 0)
        throw std::invalid_argument("mean_squared_error: empty operands");
    double s = 0.0;
    for (std::size_t i = 0; i < am.size(); ++i) {
        const double r = am[i] - tm[i];
        s += r * r;
    }
    const double inv_n = 1.0 / static_cast<double>(am.size());
    const std::size_t ia = a.id(), it = target.id();
    const std::size_t parents[] = {ia, it};
    return t.record(Matrix(1, 1, s * inv_n), parents, [ia, it, inv_n](Tape& tp, std::size_t self) {
        const double g = tp.grad_if_any(self)[0];
        const Matrix& av = tp.value(ia);
        const Matrix& tv = tp.value(it);
        if (tp.requires_grad(ia)) {
            Matrix& ga = tp.grad_buffer(ia);
            for (std::size_t i = 0; i < av.size(); ++i)
                ga[i] += g * 2.0 * (av[i] - tv[i]) * inv_n;
        }
        if (tp.requires_grad(it)) {
            Matrix& gt = tp.grad_buffer(it);
            for (std::size_t i = 0; i < av.size(); ++i)
                gt[i] -= g * 2.0 * (av[i] - tv[i]) * inv_n;
        }
    });
}

// --- gradient check ----------------------------------------------------------

GradCheckReport finite_diff_check(const ScalarFn& f, std::span<const Matrix> params, double eps) {
    GradCheckReport report;

    std::vector<Matrix> analytic;
    std::uint64_t base_signature = 0;
    {
        Tape tape;
        std::vector<Value> leaves;
        for (const Matrix& p : params)
            leaves.push_back(tape.parameter(p));
        Value loss = f(tape, leaves);
        tape.backward(loss);
        base_signature = tape.branch_signature();
        for (const Value& v : leaves)
            analytic.push_back(v.grad());
    }

    std::vector<Matrix> work(params.begin(), params.end());
    auto evaluate = [&](std::uint64_t& signature) {
        Tape tape;
        std::vector<Value> leaves;
        for (const Matrix& p : work)
            leaves.push_back(tape.constant(p));
        const double v = f(tape, leaves).scalar();
        signature = tape.branch_signature();
        return v;
    };

    for (std::size_t pi = 0; pi < work.size(); ++pi) {
        for (std::size_t k = 0; k < work[pi].size(); ++k) {
            const double orig = work[pi][k];
            std::uint64_t sig_plus = 0, sig_minus = 0;
            work[pi][k] = orig + eps;
            const double f_plus = evaluate(sig_plus);
            work[pi][k] = orig - eps;
            const double f_minus = evaluate(sig_minus);
            work[pi][k] = orig;
            if (sig_plus != base_signature || sig_minus != base_signature) {
                ++report.excluded;
                continue;
            }
            const double numeric = (f_plus - f_minus) / (2.0 * eps);
            const double g = analytic[pi][k];
            const double denom = std::max({std::abs(g), std::abs(numeric), 1e-8});
            const double rel = std::abs(g - numeric) / denom;
            ++report.checked;
            if (rel > report.max_rel_error || report.checked == 1) {
                report.max_rel_error = std::max(report.max_rel_error, rel);
                if (rel >= report.max_rel_error) {
                    report.worst_param = pi;
                    report.worst_index = k;
                    report.worst_analytic = g;
                    report.worst_numeric = numeric;
                }
            }
        }
    }
    return report;
}

} // namespace dgnaea::ad
