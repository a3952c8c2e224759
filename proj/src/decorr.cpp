#include "softcca/decorr.hpp"

#include <cmath>
#include <string>

namespace softcca {

Matrix center_columns(const Matrix& z) {
    const std::size_t m = z.rows(), k = z.cols();
    if (m == 0) return z;
    Matrix out = z;
    for (std::size_t j = 0; j < k; ++j) {
        double mean = 0.0;
        for (std::size_t i = 0; i < m; ++i) mean += z(i, j);
        mean /= static_cast<double>(m);
        for (std::size_t i = 0; i < m; ++i) out(i, j) -= mean;
    }
    return out;
}

Matrix minibatch_cov(const Matrix& z) {
    const std::size_t m = z.rows();
    if (m < 2) throw DegenerateError("minibatch_cov: need a batch of at least 2 rows");
    Matrix c = matmul_tn(z, z);
    c *= 1.0 / static_cast<double>(m - 1);
    // Z^T Z is symmetric up to roundoff; make it exact.
    for (std::size_t i = 0; i < c.rows(); ++i)
        for (std::size_t j = i + 1; j < c.cols(); ++j) {
            const double v = 0.5 * (c(i, j) + c(j, i));
            c(i, j) = v;
            c(j, i) = v;
        }
    return c;
}

SdlState::SdlState(std::size_t k, double alpha_) : accum(k, k), alpha(alpha_) {
    if (alpha < 0.0 || alpha >= 1.0)
        throw ConfigError("SdlState: alpha must be in [0, 1), got " + std::to_string(alpha));
}

void SdlState::reset() {
    accum = Matrix(accum.rows(), accum.cols());
    norm_factor = 0.0;
    step = 0;
}

SdlUpdate sdl_update(SdlState& state, const Matrix& z) {
    const std::size_t k = state.dim();
    if (z.cols() != k)
        throw ShapeError("sdl_update: z has " + std::to_string(z.cols()) +
                         " columns, state expects " + std::to_string(k));
    Matrix c_mini = minibatch_cov(z);

    state.accum *= state.alpha;
    state.accum += c_mini;
    state.norm_factor = state.alpha * state.norm_factor + 1.0;
    state.step += 1;

    SdlUpdate r;
    r.approx_cov = state.accum;
    r.approx_cov *= 1.0 / state.norm_factor;
    r.loss = off_diagonal_abs_sum(r.approx_cov);
    return r;
}

Matrix sign_matrix(const Matrix& c) {
    if (c.rows() != c.cols()) throw ShapeError("sign_matrix: input must be square");
    const std::size_t k = c.rows();
    Matrix s(k, k);
    for (std::size_t i = 0; i < k; ++i)
        for (std::size_t j = 0; j < k; ++j) {
            if (i == j || c(i, j) == 0.0) continue;
            s(i, j) = c(i, j) > 0.0 ? 1.0 : -1.0;
        }
    return s;
}

Matrix sdl_gradient(const SdlState& state, const Matrix& approx_cov, const Matrix& z) {
    const std::size_t k = state.dim();
    if (state.step == 0 || state.norm_factor <= 0.0)
        throw StateError("sdl_gradient: state has not been updated");
    if (z.cols() != k || approx_cov.rows() != k || approx_cov.cols() != k)
        throw StateError("sdl_gradient: z/approx_cov do not match the state dimension");
    if (z.rows() < 2) throw StateError("sdl_gradient: batch does not match an update");

    // Both (i,j) and (j,i) appear in the off-diagonal sum, hence the factor 2.
    const double scale = 2.0 / (state.norm_factor * static_cast<double>(z.rows() - 1));
    Matrix g = matmul(z, sign_matrix(approx_cov));
    g *= scale;
    return g;
}

double off_diagonal_abs_sum(const Matrix& c) {
    double s = 0.0;
    for (std::size_t i = 0; i < c.rows(); ++i)
        for (std::size_t j = 0; j < c.cols(); ++j)
            if (i != j) s += std::fabs(c(i, j));
    return s;
}

namespace {

double off_diagonal_sq_half_sum(const Matrix& c) {
    double s = 0.0;
    for (std::size_t i = 0; i < c.rows(); ++i)
        for (std::size_t j = 0; j < c.cols(); ++j)
            if (i != j) s += c(i, j) * c(i, j);
    return 0.5 * s;
}

Matrix zero_diagonal(Matrix c) {
    for (std::size_t i = 0; i < std::min(c.rows(), c.cols()); ++i) c(i, i) = 0.0;
    return c;
}

} // namespace

LossGrad decov_loss_grad(const Matrix& z, DecovVariant variant, SdlState* state) {
    if (variant == DecovVariant::decov_gc && state == nullptr)
        throw ConfigError("decov_gc requires an accumulator state");

    const double m1 = static_cast<double>(z.rows()) - 1.0;
    LossGrad out;
    switch (variant) {
        case DecovVariant::decov: {
            Matrix c = minibatch_cov(z);
            out.loss = off_diagonal_sq_half_sum(c);
            out.grad = matmul(z, zero_diagonal(std::move(c)));
            out.grad *= 2.0 / m1;
            break;
        }
        case DecovVariant::decov_l1: {
            Matrix c = minibatch_cov(z);
            out.loss = off_diagonal_abs_sum(c);
            out.grad = matmul(z, sign_matrix(c));
            out.grad *= 2.0 / m1;
            break;
        }
        case DecovVariant::decov_gc: {
            SdlUpdate u = sdl_update(*state, z);
            out.loss = off_diagonal_sq_half_sum(u.approx_cov);
            out.grad = matmul(z, zero_diagonal(std::move(u.approx_cov)));
            out.grad *= 2.0 / (state->norm_factor * m1);
            break;
        }
    }
    return out;
}

XcovResult xcov_loss_grad(const Matrix& y_code, const Matrix& z_code) {
    if (y_code.rows() != z_code.rows())
        throw ShapeError("xcov: row counts differ (" + std::to_string(y_code.rows()) +
                         " vs " + std::to_string(z_code.rows()) + ")");
    const std::size_t m = y_code.rows();
    if (m < 2) throw DegenerateError("xcov: need a batch of at least 2 rows");

    Matrix yc = center_columns(y_code);
    Matrix zc = center_columns(z_code);
    Matrix cross = matmul_tn(yc, zc);            // p x q
    cross *= 1.0 / static_cast<double>(m);

    XcovResult r;
    double s = 0.0;
    for (std::size_t i = 0; i < cross.size(); ++i) s += cross.data()[i] * cross.data()[i];
    r.loss = 0.5 * s;
    // Centering drops out of the gradient because cross-covariances of the
    // centered blocks are insensitive to per-column shifts.
    r.grad_y = matmul_nt(zc, cross);             // m x p
    r.grad_y *= 1.0 / static_cast<double>(m);
    r.grad_z = matmul(yc, cross);                // m x q
    r.grad_z *= 1.0 / static_cast<double>(m);
    return r;
}

} // namespace softcca
