#pragma once

#include <cstdint>

#include "softcca/matrix.hpp"

namespace softcca {

// Subtract per-column batch means. The training path gets centered inputs
// from the batchnorm layer; this helper is for standalone use.
Matrix center_columns(const Matrix& z);

// C = Z^T Z / (m-1). Caller guarantees z columns are batch-centered.
Matrix minibatch_cov(const Matrix& z);

// Running covariance estimate: accum_t = alpha * accum_{t-1} + C_mini_t,
// normalized by norm_factor_t = alpha * norm_factor_{t-1} + 1. Updates are
// strictly sequential; pure loss/grad reads on a frozen state are thread-safe.
struct SdlState {
    Matrix accum;             // k x k accumulated covariance
    double norm_factor = 0.0; // sum of alpha^i over past steps
    double alpha = 0.9;       // forgetting rate in [0, 1)
    std::uint64_t step = 0;

    SdlState() = default;
    SdlState(std::size_t k, double alpha_);

    std::size_t dim() const { return accum.rows(); }
    void reset();
};

struct SdlUpdate {
    double loss = 0.0;   // sum of |off-diagonal| of approx_cov
    Matrix approx_cov;   // accum / norm_factor after the update
};

// Advances the state with the mini-batch covariance of z and returns the
// decorrelation loss on the updated full-batch approximation.
SdlUpdate sdl_update(SdlState& state, const Matrix& z);

// Entrywise sign of the off-diagonal of approx_cov; diagonal (and exact
// zeros) map to 0.
Matrix sign_matrix(const Matrix& approx_cov);

// d loss / d z under the stop-gradient convention: the history accumulated
// before this batch is a constant, only the current batch's covariance
// contribution is differentiated. approx_cov must come from the matching
// sdl_update call on this z.
Matrix sdl_gradient(const SdlState& state, const Matrix& approx_cov, const Matrix& z);

double off_diagonal_abs_sum(const Matrix& c);

struct LossGrad {
    double loss = 0.0;
    Matrix grad;
};

enum class DecovVariant {
    decov,     // 0.5 * sum of squared off-diagonals of the mini-batch covariance
    decov_l1,  // sum of |off-diagonals| of the mini-batch covariance
    decov_gc,  // decov on the accumulated covariance approximation
};

// decov_gc requires a state (same accumulator and stop-gradient convention
// as SDL); the other variants must not pass one.
LossGrad decov_loss_grad(const Matrix& z, DecovVariant variant, SdlState* state = nullptr);

struct XcovResult {
    double loss = 0.0;
    Matrix grad_y, grad_z;
};

// Cross-covariance penalty between two code blocks: 0.5 * sum of squared
// entries of the mini-batch cross-covariance (both blocks centered
// internally). Penalizes correlation across, not within, the blocks.
XcovResult xcov_loss_grad(const Matrix& y_code, const Matrix& z_code);

} // namespace softcca
