#pragma once

// Shared helpers and independent oracles for the test suites. Everything
// here deliberately avoids the library's optimized code paths: the naive
// loops are the reference the implementation is checked against.

#include <cmath>
#include <vector>

#include "softcca/matrix.hpp"
#include "softcca/rng.hpp"

namespace test_util {

using softcca::Matrix;
using softcca::Rng;

inline Matrix random_matrix(Rng& rng, std::size_t r, std::size_t c, double scale = 1.0) {
    Matrix m(r, c);
    for (std::size_t i = 0; i < m.size(); ++i) m.data()[i] = scale * rng.normal();
    return m;
}

inline Matrix random_symmetric(Rng& rng, std::size_t n, double scale = 1.0) {
    Matrix m(n, n);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j <= i; ++j) {
            const double v = scale * rng.normal();
            m(i, j) = v;
            m(j, i) = v;
        }
    return m;
}

inline Matrix random_spd(Rng& rng, std::size_t n) {
    Matrix a = random_matrix(rng, n + 3, n);
    Matrix s(n, n);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) {
            double acc = 0.0;
            for (std::size_t k = 0; k < a.rows(); ++k) acc += a(k, i) * a(k, j);
            s(i, j) = acc / static_cast<double>(a.rows());
        }
    for (std::size_t i = 0; i < n; ++i) s(i, i) += 0.05;
    return s;
}

// Reference triple-loop product.
inline Matrix naive_matmul(const Matrix& a, const Matrix& b) {
    Matrix c(a.rows(), b.cols());
    for (std::size_t i = 0; i < a.rows(); ++i)
        for (std::size_t j = 0; j < b.cols(); ++j) {
            double s = 0.0;
            for (std::size_t k = 0; k < a.cols(); ++k) s += a(i, k) * b(k, j);
            c(i, j) = s;
        }
    return c;
}

// Reference reconstruction V diag(w) V^T.
inline Matrix naive_reconstruct(const std::vector<double>& w, const Matrix& v) {
    const std::size_t n = w.size();
    Matrix out(n, n);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) {
            double s = 0.0;
            for (std::size_t k = 0; k < n; ++k) s += v(i, k) * w[k] * v(j, k);
            out(i, j) = s;
        }
    return out;
}

// Reference per-pair covariance loop (assumes pre-centered columns).
inline Matrix naive_cov(const Matrix& z) {
    const std::size_t m = z.rows(), k = z.cols();
    Matrix c(k, k);
    for (std::size_t i = 0; i < k; ++i)
        for (std::size_t j = 0; j < k; ++j) {
            double s = 0.0;
            for (std::size_t r = 0; r < m; ++r) s += z(r, i) * z(r, j);
            c(i, j) = s / static_cast<double>(m - 1);
        }
    return c;
}

// Direct evaluation of the Pearson formula.
inline double naive_pearson(const std::vector<double>& u, const std::vector<double>& v) {
    const std::size_t n = u.size();
    double mu = 0, mv = 0;
    for (std::size_t i = 0; i < n; ++i) { mu += u[i]; mv += v[i]; }
    mu /= n;
    mv /= n;
    double suu = 0, svv = 0, suv = 0;
    for (std::size_t i = 0; i < n; ++i) {
        suu += (u[i] - mu) * (u[i] - mu);
        svv += (v[i] - mv) * (v[i] - mv);
        suv += (u[i] - mu) * (v[i] - mv);
    }
    return suv / std::sqrt(suu * svv);
}

} // namespace test_util
