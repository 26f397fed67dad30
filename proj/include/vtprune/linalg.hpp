#pragma once

#include <cstddef>
#include <initializer_list>
#include <vector>

namespace vtprune {

using Vector = std::vector<double>;

/// Dense row-major matrix of doubles.
struct Matrix {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> data;

    Matrix() = default;
    Matrix(std::size_t r, std::size_t c, double fill = 0.0)
        : rows(r), cols(c), data(r * c, fill) {}

    static Matrix from_rows(std::initializer_list<std::initializer_list<double>> rows);
    static Matrix identity(std::size_t n);

    double& at(std::size_t r, std::size_t c) { return data[r * cols + c]; }
    double at(std::size_t r, std::size_t c) const { return data[r * cols + c]; }

    double* row(std::size_t r) { return data.data() + r * cols; }
    const double* row(std::size_t r) const { return data.data() + r * cols; }

    bool empty() const { return rows == 0 || cols == 0; }

    bool operator==(const Matrix&) const = default;
};

enum class MaskKind {
    none,
    causal, // entry (i, j) masked out when j > i; matrix must be square
};

/// Row-wise softmax with max-subtraction. Masked positions come out exactly 0.
/// Rejects empty input and rows with no allowed position.
Matrix softmax_rows(const Matrix& m, MaskKind mask = MaskKind::none);

/// out[j] = sum_i w[i] * m(i, j). w must have m.rows entries.
Vector matvec_left(const Vector& w, const Matrix& m);

/// out[j] = sum_i m(i, j). Rejects empty input.
Vector column_sums(const Matrix& m);

Matrix matmul(const Matrix& a, const Matrix& b);
Matrix transpose(const Matrix& m);

void add_inplace(Matrix& a, const Matrix& b);
void relu_inplace(Matrix& m);

/// Throws NumericError if any entry is NaN or infinite.
void check_finite(const Matrix& m, const char* what);
void check_finite(const Vector& v, const char* what);

} // namespace vtprune
