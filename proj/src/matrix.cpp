#include "softcca/matrix.hpp"

#include <algorithm>
#include <cmath>
#include <mutex>
#include <numeric>
#include <sstream>

#include <cblas.h>

extern "C" {
void openblas_set_num_threads(int);
void dsyev_(const char* jobz, const char* uplo, const int* n, double* a,
            const int* lda, double* w, double* work, const int* lwork, int* info);
}

namespace softcca {

namespace {

// BLAS kernels are pinned to one thread: results must not depend on
// machine parallelism, and the benchmark times single-threaded kernels.
void ensure_blas_single_thread() {
    static std::once_flag flag;
    std::call_once(flag, [] { openblas_set_num_threads(1); });
}

// Below this many multiply-adds a plain loop beats the dgemm call overhead.
constexpr std::size_t kBlasCutoff = 16384;

void check_shapes(std::size_t ak, std::size_t bk, const char* what) {
    if (ak != bk) {
        std::ostringstream os;
        os << what << ": inner dimensions differ (" << ak << " vs " << bk << ")";
        throw ShapeError(os.str());
    }
}

std::string shape_str(const Matrix& m) {
    std::ostringstream os;
    os << m.rows() << "x" << m.cols();
    return os.str();
}

} // namespace

Matrix Matrix::from_rows(std::initializer_list<std::initializer_list<double>> rows) {
    const std::size_t r = rows.size();
    const std::size_t c = r == 0 ? 0 : rows.begin()->size();
    Matrix m(r, c);
    std::size_t i = 0;
    for (const auto& row : rows) {
        if (row.size() != c) throw ShapeError("from_rows: ragged initializer");
        std::size_t j = 0;
        for (double v : row) m(i, j++) = v;
        ++i;
    }
    return m;
}

Matrix Matrix::transposed() const {
    Matrix t(cols_, rows_);
    for (std::size_t i = 0; i < rows_; ++i)
        for (std::size_t j = 0; j < cols_; ++j) t(j, i) = (*this)(i, j);
    return t;
}

bool Matrix::all_finite() const noexcept {
    for (double v : data_)
        if (!std::isfinite(v)) return false;
    return true;
}

Matrix& Matrix::operator+=(const Matrix& o) {
    if (!same_shape(o)) throw ShapeError("+=: shapes differ (" + shape_str(*this) + " vs " + shape_str(o) + ")");
    for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += o.data_[i];
    return *this;
}

Matrix& Matrix::operator-=(const Matrix& o) {
    if (!same_shape(o)) throw ShapeError("-=: shapes differ (" + shape_str(*this) + " vs " + shape_str(o) + ")");
    for (std::size_t i = 0; i < data_.size(); ++i) data_[i] -= o.data_[i];
    return *this;
}

Matrix& Matrix::operator*=(double s) {
    for (double& v : data_) v *= s;
    return *this;
}

Matrix operator+(Matrix a, const Matrix& b) { a += b; return a; }
Matrix operator-(Matrix a, const Matrix& b) { a -= b; return a; }
Matrix operator*(Matrix a, double s) { a *= s; return a; }

namespace {

enum class Op { nn, tn, nt };

Matrix gemm(const Matrix& a, const Matrix& b, Op op) {
    std::size_t m, n, k;
    switch (op) {
        case Op::nn:
            check_shapes(a.cols(), b.rows(), "matmul");
            m = a.rows(); n = b.cols(); k = a.cols();
            break;
        case Op::tn:
            check_shapes(a.rows(), b.rows(), "matmul_tn");
            m = a.cols(); n = b.cols(); k = a.rows();
            break;
        case Op::nt:
            check_shapes(a.cols(), b.cols(), "matmul_nt");
            m = a.rows(); n = b.rows(); k = a.cols();
            break;
        default: throw Error("unreachable");
    }
    Matrix c(m, n);
    if (m == 0 || n == 0) return c;
    if (k == 0) return c;

    if (m * n * k >= kBlasCutoff) {
        ensure_blas_single_thread();
        const auto ta = op == Op::tn ? CblasTrans : CblasNoTrans;
        const auto tb = op == Op::nt ? CblasTrans : CblasNoTrans;
        cblas_dgemm(CblasRowMajor, ta, tb, static_cast<int>(m), static_cast<int>(n),
                    static_cast<int>(k), 1.0, a.data(), static_cast<int>(a.cols()),
                    b.data(), static_cast<int>(b.cols()), 0.0, c.data(), static_cast<int>(n));
        return c;
    }

    const double* pa = a.data();
    const double* pb = b.data();
    double* pc = c.data();
    const std::size_t ac = a.cols(), bc = b.cols();
    switch (op) {
        case Op::nn:
            for (std::size_t i = 0; i < m; ++i)
                for (std::size_t l = 0; l < k; ++l) {
                    const double av = pa[i * ac + l];
                    if (av == 0.0) continue;
                    const double* brow = pb + l * bc;
                    double* crow = pc + i * n;
                    for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
                }
            break;
        case Op::tn:
            for (std::size_t l = 0; l < k; ++l)
                for (std::size_t i = 0; i < m; ++i) {
                    const double av = pa[l * ac + i];
                    if (av == 0.0) continue;
                    const double* brow = pb + l * bc;
                    double* crow = pc + i * n;
                    for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
                }
            break;
        case Op::nt:
            for (std::size_t i = 0; i < m; ++i)
                for (std::size_t j = 0; j < n; ++j) {
                    const double* ar = pa + i * ac;
                    const double* br = pb + j * bc;
                    double s = 0.0;
                    for (std::size_t l = 0; l < k; ++l) s += ar[l] * br[l];
                    pc[i * n + j] = s;
                }
            break;
    }
    return c;
}

} // namespace

Matrix matmul(const Matrix& a, const Matrix& b) { return gemm(a, b, Op::nn); }
Matrix matmul_tn(const Matrix& a, const Matrix& b) { return gemm(a, b, Op::tn); }
Matrix matmul_nt(const Matrix& a, const Matrix& b) { return gemm(a, b, Op::nt); }

double frobenius_norm(const Matrix& a) {
    double s = 0.0;
    const double* p = a.data();
    for (std::size_t i = 0; i < a.size(); ++i) s += p[i] * p[i];
    return std::sqrt(s);
}

double max_abs(const Matrix& a) {
    double s = 0.0;
    const double* p = a.data();
    for (std::size_t i = 0; i < a.size(); ++i) s = std::max(s, std::fabs(p[i]));
    return s;
}

double max_abs_diff(const Matrix& a, const Matrix& b) {
    if (!a.same_shape(b)) throw ShapeError("max_abs_diff: shapes differ");
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i)
        s = std::max(s, std::fabs(a.data()[i] - b.data()[i]));
    return s;
}

namespace {

Matrix symmetrized(const Matrix& a) {
    if (a.rows() != a.cols())
        throw ShapeError("sym_eig: matrix is " + shape_str(a) + ", expected square");
    const std::size_t n = a.rows();
    Matrix s(n, n);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) s(i, j) = 0.5 * (a(i, j) + a(j, i));
    return s;
}

void sort_descending(SymEig& e) {
    const std::size_t n = e.values.size();
    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), 0);
    std::stable_sort(idx.begin(), idx.end(),
                     [&](std::size_t a, std::size_t b) { return e.values[a] > e.values[b]; });
    std::vector<double> vals(n);
    Matrix vecs(n, n);
    for (std::size_t j = 0; j < n; ++j) {
        vals[j] = e.values[idx[j]];
        for (std::size_t i = 0; i < n; ++i) vecs(i, j) = e.vectors(i, idx[j]);
    }
    e.values = std::move(vals);
    e.vectors = std::move(vecs);
}

SymEig lapack_sym_eig(const Matrix& sym) {
    ensure_blas_single_thread();
    const int n = static_cast<int>(sym.rows());
    // A symmetric buffer reads the same row- or column-major.
    std::vector<double> a(sym.data(), sym.data() + sym.size());
    std::vector<double> w(n);
    int info = 0;
    int lwork = -1;
    double wkopt = 0.0;
    dsyev_("V", "L", &n, a.data(), &n, w.data(), &wkopt, &lwork, &info);
    lwork = static_cast<int>(wkopt);
    std::vector<double> work(static_cast<std::size_t>(lwork));
    dsyev_("V", "L", &n, a.data(), &n, w.data(), work.data(), &lwork, &info);
    if (info != 0)
        throw NumericError("sym_eig: dsyev failed to converge (info=" + std::to_string(info) + ")");

    // dsyev returns ascending eigenvalues with eigenvectors in column-major
    // columns; reverse to descending and lay the vectors out as our columns.
    SymEig e;
    const std::size_t un = sym.rows();
    e.values.resize(un);
    e.vectors = Matrix(un, un);
    for (std::size_t jd = 0; jd < un; ++jd) {
        const std::size_t ja = un - 1 - jd;
        e.values[jd] = w[ja];
        for (std::size_t i = 0; i < un; ++i) e.vectors(i, jd) = a[ja * un + i];
    }
    return e;
}

} // namespace

SymEig jacobi_sym_eig(const Matrix& a, int max_sweeps) {
    Matrix s = symmetrized(a);
    const std::size_t n = s.rows();
    Matrix v = Matrix::identity(n);

    SymEig e;
    if (n == 0) return e;
    if (n == 1) {
        e.values = {s(0, 0)};
        e.vectors = v;
        return e;
    }

    const double norm = frobenius_norm(s);
    const double threshold = 1e-12 * norm;

    auto off_norm = [&] {
        double acc = 0.0;
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = i + 1; j < n; ++j) acc += 2.0 * s(i, j) * s(i, j);
        return std::sqrt(acc);
    };

    bool converged = norm == 0.0 || off_norm() <= threshold;
    for (int sweep = 0; sweep < max_sweeps && !converged; ++sweep) {
        for (std::size_t p = 0; p + 1 < n; ++p) {
            for (std::size_t q = p + 1; q < n; ++q) {
                const double apq = s(p, q);
                if (std::fabs(apq) <= 1e-300) { s(p, q) = 0.0; s(q, p) = 0.0; continue; }
                const double app = s(p, p), aqq = s(q, q);
                const double tau = (aqq - app) / (2.0 * apq);
                double t;
                if (std::fabs(tau) > 1e153) {
                    t = 1.0 / (2.0 * tau);
                } else {
                    t = (tau >= 0.0 ? 1.0 : -1.0) / (std::fabs(tau) + std::sqrt(1.0 + tau * tau));
                }
                const double c = 1.0 / std::sqrt(1.0 + t * t);
                const double sn = t * c;

                for (std::size_t k = 0; k < n; ++k) {
                    const double skp = s(k, p), skq = s(k, q);
                    s(k, p) = c * skp - sn * skq;
                    s(k, q) = sn * skp + c * skq;
                }
                for (std::size_t k = 0; k < n; ++k) {
                    const double spk = s(p, k), sqk = s(q, k);
                    s(p, k) = c * spk - sn * sqk;
                    s(q, k) = sn * spk + c * sqk;
                }
                s(p, q) = 0.0;
                s(q, p) = 0.0;
                for (std::size_t k = 0; k < n; ++k) {
                    const double vkp = v(k, p), vkq = v(k, q);
                    v(k, p) = c * vkp - sn * vkq;
                    v(k, q) = sn * vkp + c * vkq;
                }
            }
        }
        converged = off_norm() <= threshold;
    }
    if (!converged)
        throw NumericError("sym_eig: Jacobi did not converge in " + std::to_string(max_sweeps) + " sweeps");

    e.values.resize(n);
    for (std::size_t i = 0; i < n; ++i) e.values[i] = s(i, i);
    e.vectors = std::move(v);
    sort_descending(e);
    return e;
}

SymEig sym_eig(const Matrix& a) {
    Matrix s = symmetrized(a);
    if (s.rows() <= 64) return jacobi_sym_eig(s);
    return lapack_sym_eig(s);
}

Matrix inv_sqrt_sym(const Matrix& a, double ridge) {
    if (ridge < 0.0) throw ConfigError("inv_sqrt_sym: ridge must be nonnegative");
    SymEig e = sym_eig(a);
    const std::size_t n = e.values.size();
    double smallest = ridge + (n ? e.values[n - 1] : 0.0);
    if (n == 0 || smallest <= 0.0) {
        std::ostringstream os;
        os << "inv_sqrt_sym: smallest eigenvalue after ridge is " << smallest
           << " (must be positive)";
        throw NumericError(os.str());
    }
    Matrix scaled = e.vectors;
    for (std::size_t j = 0; j < n; ++j) {
        const double f = 1.0 / std::sqrt(e.values[j] + ridge);
        for (std::size_t i = 0; i < n; ++i) scaled(i, j) *= f;
    }
    Matrix b = matmul_nt(scaled, e.vectors);
    // Clean up roundoff asymmetry so the output is symmetric exactly.
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j) {
            const double m = 0.5 * (b(i, j) + b(j, i));
            b(i, j) = m;
            b(j, i) = m;
        }
    return b;
}

double pearson(std::span<const double> u, std::span<const double> v) {
    if (u.size() != v.size()) throw ShapeError("pearson: vector lengths differ");
    const std::size_t n = u.size();
    if (n < 2) throw DegenerateError("pearson: need at least 2 samples");
    double mu = 0.0, mv = 0.0;
    for (std::size_t i = 0; i < n; ++i) { mu += u[i]; mv += v[i]; }
    mu /= static_cast<double>(n);
    mv /= static_cast<double>(n);
    double suu = 0.0, svv = 0.0, suv = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double du = u[i] - mu, dv = v[i] - mv;
        suu += du * du;
        svv += dv * dv;
        suv += du * dv;
    }
    if (suu == 0.0 || svv == 0.0) throw DegenerateError("pearson: zero variance input");
    const double r = suv / std::sqrt(suu * svv);
    return std::clamp(r, -1.0, 1.0);
}

} // namespace softcca
