#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <vector>

#include "softcca/error.hpp"

namespace softcca {

// Dense real matrix, row-major, double precision. The single numeric carrier
// for features, weights and covariances throughout the toolkit.
class Matrix {
public:
    Matrix() = default;
    Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
        : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

    static Matrix identity(std::size_t n) {
        Matrix m(n, n);
        for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
        return m;
    }

    static Matrix from_rows(std::initializer_list<std::initializer_list<double>> rows);

    std::size_t rows() const noexcept { return rows_; }
    std::size_t cols() const noexcept { return cols_; }
    std::size_t size() const noexcept { return data_.size(); }
    bool empty() const noexcept { return data_.empty(); }

    double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
    double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

    double* data() noexcept { return data_.data(); }
    const double* data() const noexcept { return data_.data(); }

    std::span<double> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
    std::span<const double> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }

    Matrix transposed() const;
    bool all_finite() const noexcept;

    Matrix& operator+=(const Matrix& o);
    Matrix& operator-=(const Matrix& o);
    Matrix& operator*=(double s);

    bool same_shape(const Matrix& o) const noexcept {
        return rows_ == o.rows_ && cols_ == o.cols_;
    }

private:
    std::size_t rows_ = 0, cols_ = 0;
    std::vector<double> data_;
};

Matrix operator+(Matrix a, const Matrix& b);
Matrix operator-(Matrix a, const Matrix& b);
Matrix operator*(Matrix a, double s);

// c = a * b
Matrix matmul(const Matrix& a, const Matrix& b);
// c = a^T * b  (without materializing the transpose)
Matrix matmul_tn(const Matrix& a, const Matrix& b);
// c = a * b^T
Matrix matmul_nt(const Matrix& a, const Matrix& b);

double frobenius_norm(const Matrix& a);
double max_abs(const Matrix& a);
double max_abs_diff(const Matrix& a, const Matrix& b);

// Eigendecomposition of a symmetric matrix: a = vectors * diag(values) * vectors^T,
// eigenvalues descending, eigenvectors in columns (orthonormal).
struct SymEig {
    std::vector<double> values;
    Matrix vectors;
};

// Dispatches to cyclic Jacobi for small matrices and LAPACK dsyev above;
// both satisfy the same reconstruction/orthonormality contract.
SymEig sym_eig(const Matrix& a);

// Cyclic Jacobi rotations; max_sweeps sweeps, off-diagonal threshold
// 1e-12 * ||A||_F. Kept independent of the LAPACK path so the two can
// cross-check each other.
SymEig jacobi_sym_eig(const Matrix& a, int max_sweeps = 100);

// (a + ridge*I)^(-1/2) via sym_eig. Throws NumericError naming the smallest
// eigenvalue if the shifted spectrum is not strictly positive.
Matrix inv_sqrt_sym(const Matrix& a, double ridge);

// Sample Pearson correlation; throws DegenerateError on zero variance or n < 2.
double pearson(std::span<const double> u, std::span<const double> v);

} // namespace softcca
