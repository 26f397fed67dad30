#include <doctest.h>

#include <cmath>

#include "vtprune/errors.hpp"
#include "vtprune/linalg.hpp"
#include "vtprune/rng.hpp"

using namespace vtprune;

namespace {

// Independent double-loop oracle for w^T M.
Vector matvec_left_oracle(const Vector& w, const Matrix& m) {
    Vector out(m.cols, 0.0);
    for (std::size_t j = 0; j < m.cols; ++j) {
        for (std::size_t i = 0; i < m.rows; ++i) {
            out[j] += w[i] * m.at(i, j);
        }
    }
    return out;
}

Matrix random_matrix(SeededRng& rng, std::size_t rows, std::size_t cols, double lo, double hi) {
    Matrix m(rows, cols);
    for (double& x : m.data) {
        x = rng.uniform(lo, hi);
    }
    return m;
}

} // namespace

TEST_CASE("softmax of a single element is 1") {
    const Matrix out = softmax_rows(Matrix::from_rows({{3.7}}));
    CHECK(out.at(0, 0) == doctest::Approx(1.0));
}

TEST_CASE("softmax of a zero matrix is uniform") {
    const Matrix out = softmax_rows(Matrix(2, 2, 0.0));
    for (double x : out.data) {
        CHECK(x == doctest::Approx(0.5));
    }
}

TEST_CASE("causal softmax forces the first row onto the diagonal") {
    const Matrix out = softmax_rows(Matrix(2, 2, 0.0), MaskKind::causal);
    CHECK(out.at(0, 0) == doctest::Approx(1.0));
    CHECK(out.at(0, 1) == 0.0);
    CHECK(out.at(1, 0) == doctest::Approx(0.5));
    CHECK(out.at(1, 1) == doctest::Approx(0.5));
}

TEST_CASE("softmax rejects empty input and non-square causal masks") {
    CHECK_THROWS_AS(softmax_rows(Matrix()), InvalidArgument);
    CHECK_THROWS_AS(softmax_rows(Matrix(2, 3, 0.0), MaskKind::causal), DimensionError);
}

TEST_CASE("softmax rows sum to one on random inputs") {
    SeededRng rng(11);
    for (int trial = 0; trial < 50; ++trial) {
        const std::size_t n = 1 + rng.next_below(16);
        const Matrix m = random_matrix(rng, n, n, -30.0, 30.0);
        for (const MaskKind mask : {MaskKind::none, MaskKind::causal}) {
            const Matrix out = softmax_rows(m, mask);
            for (std::size_t i = 0; i < n; ++i) {
                double sum = 0.0;
                for (std::size_t j = 0; j < n; ++j) {
                    sum += out.at(i, j);
                    if (mask == MaskKind::causal && j > i) {
                        CHECK(out.at(i, j) == 0.0);
                    }
                }
                CHECK(std::abs(sum - 1.0) < 1e-9);
            }
        }
    }
}

TEST_CASE("matvec_left selects, preserves, and sums") {
    const Matrix m = Matrix::from_rows({{1.0, 2.0}, {3.0, 4.0}});
    const Vector selected = matvec_left({1.0, 0.0}, m);
    CHECK(selected[0] == 1.0);
    CHECK(selected[1] == 2.0);

    const Vector ones = matvec_left({1.0, 1.0}, Matrix::identity(2));
    CHECK(ones[0] == 1.0);
    CHECK(ones[1] == 1.0);

    // Expected values computed with the double-loop oracle.
    const Matrix a = Matrix::from_rows({{0.2, 0.8}, {0.5, 0.5}});
    const Vector got = matvec_left({1.0, 2.0}, a);
    const Vector want = matvec_left_oracle({1.0, 2.0}, a);
    CHECK(got[0] == doctest::Approx(1.2).epsilon(1e-12));
    CHECK(got[1] == doctest::Approx(1.8).epsilon(1e-12));
    CHECK(got[0] == doctest::Approx(want[0]).epsilon(1e-12));
    CHECK(got[1] == doctest::Approx(want[1]).epsilon(1e-12));
}

TEST_CASE("matvec_left rejects mismatched lengths") {
    CHECK_THROWS_AS(matvec_left({1.0, 2.0, 3.0}, Matrix(2, 2, 0.0)), DimensionError);
}

TEST_CASE("matvec_left matches the oracle on random inputs") {
    SeededRng rng(23);
    for (int trial = 0; trial < 100; ++trial) {
        const std::size_t rows = 1 + rng.next_below(64);
        const std::size_t cols = 1 + rng.next_below(64);
        const Matrix m = random_matrix(rng, rows, cols, -2.0, 2.0);
        Vector w(rows);
        for (double& x : w) {
            x = rng.uniform(-2.0, 2.0);
        }
        const Vector got = matvec_left(w, m);
        const Vector want = matvec_left_oracle(w, m);
        for (std::size_t j = 0; j < cols; ++j) {
            const double scale = std::max(1.0, std::abs(want[j]));
            CHECK(std::abs(got[j] - want[j]) <= 1e-12 * scale);
        }
    }
}

TEST_CASE("column_sums basics") {
    const Vector id = column_sums(Matrix::identity(3));
    for (double x : id) {
        CHECK(x == 1.0);
    }

    const Vector v = column_sums(Matrix::from_rows({{0.5, 0.5}, {1.0, 0.0}}));
    CHECK(v[0] == doctest::Approx(1.5));
    CHECK(v[1] == doctest::Approx(0.5));

    CHECK_THROWS_AS(column_sums(Matrix()), InvalidArgument);
}

TEST_CASE("column sums of a row-stochastic matrix total the row count") {
    SeededRng rng(31);
    for (int trial = 0; trial < 20; ++trial) {
        const std::size_t n = 2 + rng.next_below(12);
        const Matrix stochastic = softmax_rows(random_matrix(rng, n, n, -3.0, 3.0));
        const Vector sums = column_sums(stochastic);
        double total = 0.0;
        for (double x : sums) {
            total += x;
        }
        CHECK(std::abs(total - static_cast<double>(n)) < 1e-9);
    }
}
