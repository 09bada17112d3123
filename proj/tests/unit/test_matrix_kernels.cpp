#include <doctest.h>

#include "dgnaea/kernels.hpp"
#include "dgnaea/matrix.hpp"
#include "support/fixtures.hpp"

using namespace dgnaea;
using fixtures::random_matrix;

TEST_CASE("matrix literals and shape checks") {
    const Matrix m = Matrix::from_rows({{1, 2, 3}, {4, 5, 6}});
    CHECK(m.rows() == 2);
    CHECK(m.cols() == 3);
    CHECK(m(1, 2) == 6);
    CHECK_THROWS(Matrix::from_rows({{1, 2}, {3}}));
    const double col[] = {1, 2};
    CHECK(Matrix::column(col).cols() == 1);
    CHECK(max_abs_diff(m, Matrix::from_rows({{1, 2, 3}, {4, 5, 7}})) == 1.0);
    Matrix bad(1, 1, std::numeric_limits<double>::quiet_NaN());
    CHECK_FALSE(bad.all_finite());
}

TEST_CASE("serial matmul matches a naive triple loop") {
    fixtures::Rng rng(1);
    const Matrix a = random_matrix(5, 7, rng), b = random_matrix(7, 3, rng);
    Matrix out(5, 3);
    kernels::serial::matmul(a, b, out);
    for (std::size_t i = 0; i < 5; ++i)
        for (std::size_t j = 0; j < 3; ++j) {
            double s = 0.0;
            for (std::size_t p = 0; p < 7; ++p)
                s += a(i, p) * b(p, j);
            CHECK(out(i, j) == doctest::Approx(s).epsilon(1e-14));
        }
}

TEST_CASE("parallel kernels are bitwise identical to the serial ones") {
    fixtures::Rng rng(2);
    for (std::size_t rows : {3u, 64u, 300u}) {
        const Matrix a = random_matrix(rows, 19, rng), b = random_matrix(19, 32, rng);
        Matrix s(rows, 32), p(rows, 32);
        kernels::serial::matmul(a, b, s);
        kernels::parallel::matmul(a, b, p);
        CHECK(s == p);

        const Matrix g = random_matrix(rows, 32, rng);
        Matrix sa(19, 32), pa(19, 32);
        kernels::serial::matmul_at_b_acc(a, g, sa);
        kernels::parallel::matmul_at_b_acc(a, g, pa);
        CHECK(sa == pa);

        Matrix sb(rows, 19), pb(rows, 19);
        kernels::serial::matmul_a_bt_acc(g, b, sb);
        kernels::parallel::matmul_a_bt_acc(g, b, pb);
        CHECK(sb == pb);

        std::vector<std::size_t> idx(rows * 3);
        for (auto& i : idx)
            i = fixtures::uniform_index(rng, 0, rows - 1);
        const Matrix src = random_matrix(idx.size(), 4, rng);
        Matrix ss(rows, 4), ps(rows, 4);
        kernels::serial::scatter_add_rows(src, idx, ss);
        kernels::parallel::scatter_add_rows(src, kernels::RowGroups::build(idx, rows), ps);
        CHECK(ss == ps);

        const Matrix nodes = random_matrix(rows, 4, rng);
        Matrix sg(idx.size(), 4), pg(idx.size(), 4);
        kernels::serial::gather_rows(nodes, idx, sg);
        kernels::parallel::gather_rows(nodes, idx, pg);
        CHECK(sg == pg);
    }
}

TEST_CASE("row groups list edges by target in ascending order") {
    const std::vector<std::size_t> idx = {2, 0, 2, 1, 0};
    const auto g = kernels::RowGroups::build(idx, 4);
    CHECK(g.offsets == std::vector<std::size_t>{0, 2, 3, 5, 5});
    CHECK(g.items == std::vector<std::size_t>{1, 4, 3, 0, 2});
}
