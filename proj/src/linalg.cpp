#include "vtprune/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "vtprune/errors.hpp"

namespace vtprune {

Matrix Matrix::from_rows(std::initializer_list<std::initializer_list<double>> rows) {
    Matrix m;
    m.rows = rows.size();
    m.cols = rows.size() ? rows.begin()->size() : 0;
    m.data.reserve(m.rows * m.cols);
    for (const auto& r : rows) {
        if (r.size() != m.cols) {
            throw DimensionError("from_rows: ragged row lengths");
        }
        m.data.insert(m.data.end(), r.begin(), r.end());
    }
    return m;
}

Matrix Matrix::identity(std::size_t n) {
    Matrix m(n, n);
    for (std::size_t i = 0; i < n; ++i) {
        m.at(i, i) = 1.0;
    }
    return m;
}

void check_finite(const Matrix& m, const char* what) {
    for (double x : m.data) {
        if (!std::isfinite(x)) {
            throw NumericError(std::string(what) + ": non-finite entry");
        }
    }
}

void check_finite(const Vector& v, const char* what) {
    for (double x : v) {
        if (!std::isfinite(x)) {
            throw NumericError(std::string(what) + ": non-finite entry");
        }
    }
}

Matrix softmax_rows(const Matrix& m, MaskKind mask) {
    if (m.empty()) {
        throw InvalidArgument("softmax_rows: empty matrix");
    }
    if (mask == MaskKind::causal && m.rows != m.cols) {
        throw DimensionError("softmax_rows: causal mask requires a square matrix");
    }
    check_finite(m, "softmax_rows input");

    Matrix out(m.rows, m.cols);
    for (std::size_t i = 0; i < m.rows; ++i) {
        const std::size_t allowed = (mask == MaskKind::causal) ? i + 1 : m.cols;
        if (allowed == 0) {
            throw InvalidArgument("softmax_rows: row with all positions masked");
        }
        const double* src = m.row(i);
        double* dst = out.row(i);

        double max_v = -std::numeric_limits<double>::infinity();
        for (std::size_t j = 0; j < allowed; ++j) {
            max_v = std::max(max_v, src[j]);
        }
        double denom = 0.0;
        for (std::size_t j = 0; j < allowed; ++j) {
            dst[j] = std::exp(src[j] - max_v);
            denom += dst[j];
        }
        for (std::size_t j = 0; j < allowed; ++j) {
            dst[j] /= denom;
        }
        // masked tail stays exactly 0
    }
    check_finite(out, "softmax_rows output");
    return out;
}

Vector matvec_left(const Vector& w, const Matrix& m) {
    if (w.size() != m.rows) {
        throw DimensionError("matvec_left: vector length " + std::to_string(w.size()) +
                             " vs matrix rows " + std::to_string(m.rows));
    }
    Vector out(m.cols, 0.0);
    for (std::size_t i = 0; i < m.rows; ++i) {
        const double wi = w[i];
        const double* row = m.row(i);
        for (std::size_t j = 0; j < m.cols; ++j) {
            out[j] += wi * row[j];
        }
    }
    check_finite(out, "matvec_left output");
    return out;
}

Vector column_sums(const Matrix& m) {
    if (m.empty()) {
        throw InvalidArgument("column_sums: empty matrix");
    }
    Vector out(m.cols, 0.0);
    for (std::size_t i = 0; i < m.rows; ++i) {
        const double* row = m.row(i);
        for (std::size_t j = 0; j < m.cols; ++j) {
            out[j] += row[j];
        }
    }
    check_finite(out, "column_sums output");
    return out;
}

Matrix matmul(const Matrix& a, const Matrix& b) {
    if (a.cols != b.rows) {
        throw DimensionError("matmul: inner dimensions " + std::to_string(a.cols) +
                             " vs " + std::to_string(b.rows));
    }
    Matrix out(a.rows, b.cols);
    for (std::size_t i = 0; i < a.rows; ++i) {
        const double* arow = a.row(i);
        double* orow = out.row(i);
        for (std::size_t k = 0; k < a.cols; ++k) {
            const double aik = arow[k];
            const double* brow = b.row(k);
            for (std::size_t j = 0; j < b.cols; ++j) {
                orow[j] += aik * brow[j];
            }
        }
    }
    return out;
}

Matrix transpose(const Matrix& m) {
    Matrix out(m.cols, m.rows);
    for (std::size_t i = 0; i < m.rows; ++i) {
        for (std::size_t j = 0; j < m.cols; ++j) {
            out.at(j, i) = m.at(i, j);
        }
    }
    return out;
}

void add_inplace(Matrix& a, const Matrix& b) {
    if (a.rows != b.rows || a.cols != b.cols) {
        throw DimensionError("add_inplace: shape mismatch");
    }
    for (std::size_t i = 0; i < a.data.size(); ++i) {
        a.data[i] += b.data[i];
    }
}

void relu_inplace(Matrix& m) {
    for (double& x : m.data) {
        x = x > 0.0 ? x : 0.0;
    }
}

} // namespace vtprune
