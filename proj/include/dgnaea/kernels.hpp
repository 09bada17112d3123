#ifndef DGNAEA_KERNELS_HPP
#define DGNAEA_KERNELS_HPP

// Dense and edge-list kernels used by the autodiff core.
//
// Every kernel exists twice: a plain serial reference and an OpenMP version.
// The OpenMP versions partition over output rows only, so each output element
// is accumulated by exactly one thread in the same order as the serial loop.
// Results are bitwise identical between the two; tests rely on this.

#include <cstddef>
#include <span>
#include <vector>

#include "dgnaea/matrix.hpp"

namespace dgnaea::kernels {

/// Edges grouped by target row, each group in ascending edge order.
/// Built once per edge list so scatter_add can run row-parallel.
struct RowGroups {
    std::vector<std::size_t> offsets;  // size n + 1
    std::vector<std::size_t> items;    // edge ids

    static RowGroups build(std::span<const std::size_t> index, std::size_t n);
};

namespace serial {
// out = a * b
void matmul(const Matrix& a, const Matrix& b, Matrix& out);
// out += a^T * g
void matmul_at_b_acc(const Matrix& a, const Matrix& g, Matrix& out);
// out += g * b^T
void matmul_a_bt_acc(const Matrix& g, const Matrix& b, Matrix& out);
// out[e] = src[index[e]]
void gather_rows(const Matrix& src, std::span<const std::size_t> index, Matrix& out);
// out[index[e]] += src[e]
void scatter_add_rows(const Matrix& src, std::span<const std::size_t> index, Matrix& out);
} // namespace serial

namespace parallel {
void matmul(const Matrix& a, const Matrix& b, Matrix& out);
void matmul_at_b_acc(const Matrix& a, const Matrix& g, Matrix& out);
void matmul_a_bt_acc(const Matrix& g, const Matrix& b, Matrix& out);
void gather_rows(const Matrix& src, std::span<const std::size_t> index, Matrix& out);
void scatter_add_rows(const Matrix& src, const RowGroups& groups, Matrix& out);
} // namespace parallel

/// Number of OpenMP threads available (1 when built without OpenMP).
int max_threads();

} // namespace dgnaea::kernels

#endif // DGNAEA_KERNELS_HPP
