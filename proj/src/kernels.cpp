#include "dgnaea/kernels.hpp"

#include <cstdint>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace dgnaea::kernels {

namespace {
// Below this many output rows the fork/join overhead dominates.
constexpr std::int64_t kParallelRows = 64;
} // namespace

RowGroups RowGroups::build(std::span<const std::size_t> index, std::size_t n) {
    RowGroups g;
    g.offsets.assign(n + 1, 0);
    for (std::size_t t : index)
        ++g.offsets[t + 1];
    for (std::size_t i = 0; i < n; ++i)
        g.offsets[i + 1] += g.offsets[i];
    g.items.resize(index.size());
    std::vector<std::size_t> cursor(g.offsets.begin(), g.offsets.end() - 1);
    for (std::size_t e = 0; e < index.size(); ++e)
        g.items[cursor[index[e]]++] = e;
    return g;
}

int max_threads() {
#ifdef _OPENMP
    return omp_get_max_threads();
#else
    return 1;
#endif
}

namespace serial {

void matmul(const Matrix& a, const Matrix& b, Matrix& out) {
    const std::size_t m = a.rows(), k = a.cols(), n = b.cols();
    out.fill(0.0);
    for (std::size_t i = 0; i < m; ++i) {
        double* o = out.data() + i * n;
        for (std::size_t p = 0; p < k; ++p) {
            const double av = a(i, p);
            const double* br = b.data() + p * n;
            for (std::size_t j = 0; j < n; ++j)
                o[j] += av * br[j];
        }
    }
}

void matmul_at_b_acc(const Matrix& a, const Matrix& g, Matrix& out) {
    const std::size_t m = a.rows(), k = a.cols(), n = g.cols();
    for (std::size_t i = 0; i < m; ++i) {
        const double* gr = g.data() + i * n;
        for (std::size_t p = 0; p < k; ++p) {
            const double av = a(i, p);
            double* o = out.data() + p * n;
            for (std::size_t j = 0; j < n; ++j)
                o[j] += av * gr[j];
        }
    }
}

void matmul_a_bt_acc(const Matrix& g, const Matrix& b, Matrix& out) {
    const std::size_t m = g.rows(), n = g.cols(), k = b.rows();
    for (std::size_t i = 0; i < m; ++i) {
        const double* gr = g.data() + i * n;
        for (std::size_t p = 0; p < k; ++p) {
            const double* br = b.data() + p * n;
            double acc = 0.0;
            for (std::size_t j = 0; j < n; ++j)
                acc += gr[j] * br[j];
            out(i, p) += acc;
        }
    }
}

void gather_rows(const Matrix& src, std::span<const std::size_t> index, Matrix& out) {
    const std::size_t f = src.cols();
    for (std::size_t e = 0; e < index.size(); ++e) {
        const double* s = src.data() + index[e] * f;
        double* o = out.data() + e * f;
        for (std::size_t j = 0; j < f; ++j)
            o[j] = s[j];
    }
}

void scatter_add_rows(const Matrix& src, std::span<const std::size_t> index, Matrix& out) {
    const std::size_t f = src.cols();
    for (std::size_t e = 0; e < index.size(); ++e) {
        const double* s = src.data() + e * f;
        double* o = out.data() + index[e] * f;
        for (std::size_t j = 0; j < f; ++j)
            o[j] += s[j];
    }
}

} // namespace serial

namespace parallel {

void matmul(const Matrix& a, const Matrix& b, Matrix& out) {
    const std::int64_t m = static_cast<std::int64_t>(a.rows());
    const std::size_t k = a.cols(), n = b.cols();
#pragma omp parallel for schedule(static) if (m >= kParallelRows)
    for (std::int64_t i = 0; i < m; ++i) {
        double* o = out.data() + i * n;
        for (std::size_t j = 0; j < n; ++j)
            o[j] = 0.0;
        for (std::size_t p = 0; p < k; ++p) {
            const double av = a(i, p);
            const double* br = b.data() + p * n;
            for (std::size_t j = 0; j < n; ++j)
                o[j] += av * br[j];
        }
    }
}

void matmul_at_b_acc(const Matrix& a, const Matrix& g, Matrix& out) {
    const std::size_t m = a.rows(), n = g.cols();
    const std::int64_t k = static_cast<std::int64_t>(a.cols());
    // Partition over rows of out (columns of a); rows of a are summed in order.
#pragma omp parallel for schedule(static) if (static_cast<std::int64_t>(m) >= kParallelRows)
    for (std::int64_t p = 0; p < k; ++p) {
        double* o = out.data() + p * n;
        for (std::size_t i = 0; i < m; ++i) {
            const double av = a(i, p);
            const double* gr = g.data() + i * n;
            for (std::size_t j = 0; j < n; ++j)
                o[j] += av * gr[j];
        }
    }
}

void matmul_a_bt_acc(const Matrix& g, const Matrix& b, Matrix& out) {
    const std::int64_t m = static_cast<std::int64_t>(g.rows());
    const std::size_t n = g.cols(), k = b.rows();
#pragma omp parallel for schedule(static) if (m >= kParallelRows)
    for (std::int64_t i = 0; i < m; ++i) {
        const double* gr = g.data() + i * n;
        for (std::size_t p = 0; p < k; ++p) {
            const double* br = b.data() + p * n;
            double acc = 0.0;
            for (std::size_t j = 0; j < n; ++j)
                acc += gr[j] * br[j];
            out(i, p) += acc;
        }
    }
}

void gather_rows(const Matrix& src, std::span<const std::size_t> index, Matrix& out) {
    const std::size_t f = src.cols();
    const std::int64_t l = static_cast<std::int64_t>(index.size());
#pragma omp parallel for schedule(static) if (l >= kParallelRows)
    for (std::int64_t e = 0; e < l; ++e) {
        const double* s = src.data() + index[e] * f;
        double* o = out.data() + e * f;
        for (std::size_t j = 0; j < f; ++j)
            o[j] = s[j];
    }
}

void scatter_add_rows(const Matrix& src, const RowGroups& groups, Matrix& out) {
    const std::size_t f = src.cols();
    const std::int64_t n = static_cast<std::int64_t>(groups.offsets.size()) - 1;
#pragma omp parallel for schedule(static) if (n >= kParallelRows)
    for (std::int64_t v = 0; v < n; ++v) {
        double* o = out.data() + v * f;
        for (std::size_t q = groups.offsets[v]; q < groups.offsets[v + 1]; ++q) {
            const double* s = src.data() + groups.items[q] * f;
            for (std::size_t j = 0; j < f; ++j)
                o[j] += s[j];
        }
    }
}

} // namespace parallel

} // namespace dgnaea::kernels
