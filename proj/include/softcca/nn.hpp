#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "softcca/matrix.hpp"
#include "softcca/rng.hpp"

namespace softcca {

enum class LayerKind { affine, relu, batchnorm };

struct LayerSpec {
    LayerKind kind;
    std::size_t in = 0, out = 0; // relu/batchnorm: in == out == dim
};

inline LayerSpec affine_layer(std::size_t in, std::size_t out) { return {LayerKind::affine, in, out}; }
inline LayerSpec relu_layer(std::size_t dim) { return {LayerKind::relu, dim, dim}; }
inline LayerSpec batchnorm_layer(std::size_t dim) { return {LayerKind::batchnorm, dim, dim}; }

struct AffineParams {
    Matrix weight; // in x out
    Matrix bias;   // 1 x out
};

struct BatchNormParams {
    Matrix gamma, beta;              // 1 x dim, learnable
    Matrix running_mean, running_var; // 1 x dim, eval-mode statistics
};

// Feed-forward stack with manual backprop. A model instance is mutated only
// by its owning training loop; eval-mode forward on a frozen model is
// thread-safe.
struct MlpModel {
    std::vector<LayerSpec> layers;
    std::vector<AffineParams> affines;   // one per affine layer, in order
    std::vector<BatchNormParams> norms;  // one per batchnorm layer, in order
    double bn_eps = 1e-5;
    double bn_momentum = 0.9; // weight kept on the old running statistic

    std::size_t input_dim() const { return layers.empty() ? 0 : layers.front().in; }
    std::size_t output_dim() const { return layers.empty() ? 0 : layers.back().out; }
    bool has_batchnorm() const;
};

// Builds and initializes a model: weights uniform(-a, a) with
// a = sqrt(6 / (fan_in + fan_out)), biases 0, gamma 1, beta 0.
MlpModel make_mlp(std::vector<LayerSpec> layers, Rng& rng);

enum class Mode { train, eval };

struct BnBatchStats {
    Matrix mean, var; // 1 x dim (variance uses the 1/m convention)
    Matrix xhat;      // m x dim, normalized pre-scale activations
};

struct ForwardTrace {
    Mode mode = Mode::eval;
    std::vector<Matrix> activations; // activations[0] = input, [i+1] = layer i output
    std::vector<BnBatchStats> bn;    // one per batchnorm layer

    const Matrix& output() const { return activations.back(); }
};

// Train mode uses mini-batch statistics in batchnorm layers and updates the
// running statistics; eval mode uses the stored running statistics.
ForwardTrace forward(MlpModel& model, const Matrix& x, Mode mode);

// Eval-mode forward without mutating the model.
Matrix forward_eval(const MlpModel& model, const Matrix& x);

struct MlpGradients {
    std::vector<AffineParams> affines;                 // weight/bias grads
    std::vector<std::pair<Matrix, Matrix>> bn;          // (gamma, beta) grads
    Matrix input;                                       // grad wrt x (if requested)
};

// Exact gradients of the traced train-mode computation, including the
// dependence of batchnorm on its batch statistics. Set want_input_grad=false
// when the input gradient would be discarded (first layer of a branch).
MlpGradients backward(const MlpModel& model, const ForwardTrace& trace,
                      const Matrix& grad_out, bool want_input_grad = true);

// Trainable parameters and their gradients in matching order.
std::vector<Matrix*> trainable_params(MlpModel& model);
std::vector<const Matrix*> gradient_list(const MlpModel& model, const MlpGradients& grads);

// Every persistent tensor (parameters + running statistics), prefixed names,
// in a deterministic order. Used by checkpointing.
std::vector<std::pair<std::string, Matrix*>> named_state(MlpModel& model, const std::string& prefix);

// SGD with momentum: v <- mu*v - lr*g; p <- p + v.
struct SgdMomentum {
    double lr = 0.01;
    double momentum = 0.9;
    std::vector<Matrix> velocity;

    void step(const std::vector<Matrix*>& params, const std::vector<const Matrix*>& grads);
};

void sgd_step(SgdMomentum& opt, MlpModel& model, const MlpGradients& grads);

} // namespace softcca
