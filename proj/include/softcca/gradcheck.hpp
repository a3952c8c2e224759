#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "softcca/matrix.hpp"

namespace softcca {

// Max relative error between analytic gradients and central finite
// differences of `loss` over every entry of every parameter in `params`.
// `loss` must recompute the objective from the current parameter values.
// rel = |g - fd| / max(1e-5, |g| + |fd|).
double fd_max_rel_err(const std::function<double()>& loss,
                      const std::vector<Matrix*>& params,
                      const std::vector<const Matrix*>& grads, double h = 1e-5);

struct GradCheckResult {
    std::string name;
    double max_rel_err = 0.0;
};

// Finite-difference checks for every loss and layer the toolkit trains
// with, on small random instances (batch sizes 2 and 8, dims <= 16),
// including the composed two-branch and autoencoder objectives.
std::vector<GradCheckResult> run_gradcheck_suite(std::uint64_t seed);

} // namespace softcca
