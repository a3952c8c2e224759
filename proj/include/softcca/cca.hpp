#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "softcca/data.hpp"
#include "softcca/decorr.hpp"
#include "softcca/matrix.hpp"
#include "softcca/nn.hpp"

namespace softcca {

struct DistLoss {
    double loss = 0.0;
    Matrix grad_a, grad_b;
};

// Alignment loss between paired embeddings: ||A - B||_F^2 / (2m) with the
// 1/m normalization so the trade-off weight is batch-size independent.
DistLoss l2_dist_loss(const Matrix& z1, const Matrix& z2);

// Whitens a mini-batch: Z * (C_mini + ridge*I)^(-1/2). The exact
// decorrelation kernel existing deep CCA models run every iteration.
Matrix exact_decorrelation_step(const Matrix& z, double ridge);

struct CorrelationReport {
    std::vector<double> per_dim;
    double total = 0.0;
    std::size_t upper_bound = 0; // embedding dimension
};

// Sum over dimensions of the per-dimension Pearson correlation between the
// paired embeddings; zero-variance columns contribute 0.
CorrelationReport correlation_strength(const Matrix& z1, const Matrix& z2);

struct LinearCcaModel {
    Matrix w1, w2;       // d1 x k, d2 x k
    Matrix mean1, mean2; // 1 x d
    std::vector<double> correlations; // descending, clipped to [0, 1]
};

// Closed-form linear CCA: whiten both centered views, take the top-k
// singular pairs of the cross matrix.
LinearCcaModel linear_cca_fit(const Matrix& x1, const Matrix& x2, std::size_t k,
                              double ridge = 1e-4);

// view is 1 or 2.
Matrix linear_cca_project(const LinearCcaModel& m, const Matrix& x, int view);

struct SoftCcaConfig {
    std::vector<std::size_t> hidden; // shared per-branch hidden widths
    std::size_t embed_dim = 0;
    double lambda = 1.0;  // decorrelation weight
    double alpha = 0.9;   // accumulator forgetting rate
    double lr = 0.01;
    double momentum = 0.9;
    std::size_t batch_size = 100;
    std::size_t epochs = 10;
    std::uint64_t seed = 0;
    bool sdl_reset_per_epoch = false;
    bool drop_last = false;
    std::uint64_t max_steps = 0; // 0 = unlimited; used for mid-run checkpoints
};

// Two MLP branches ending in a batchnorm embedding layer, each with its own
// decorrelation accumulator.
struct SoftCcaModel {
    MlpModel branch1, branch2;
    SdlState sdl1, sdl2;
    double lambda = 1.0;
    std::size_t embed_dim = 0;
};

SoftCcaModel soft_cca_init(const SoftCcaConfig& cfg, std::size_t d1, std::size_t d2);

struct SoftCcaStep {
    double dist = 0.0, sdl1 = 0.0, sdl2 = 0.0, total = 0.0;
    MlpGradients grads1, grads2;
};

// One objective evaluation with parameter gradients: forwards both branches
// in train mode (advancing batchnorm running stats and the decorrelation
// accumulators) and backpropagates dist + lambda * (sdl1 + sdl2).
SoftCcaStep soft_cca_loss_grads(SoftCcaModel& model, const Matrix& x1, const Matrix& x2);

struct CcaEpochMetrics {
    std::size_t epoch = 0;
    double dist_loss = 0.0; // epoch means
    double sdl1 = 0.0, sdl2 = 0.0;
    double total = 0.0;
    std::optional<double> heldout_corr;
};

// Runs the joint alignment + decorrelation objective with SGD. Single
// threaded over steps (the accumulators are sequential). Supports stopping
// after max_steps and resuming mid-epoch from persisted counters.
class SoftCcaTrainer {
public:
    SoftCcaTrainer(const SoftCcaConfig& cfg, std::size_t d1, std::size_t d2);

    // emit is called once per completed epoch; step_hook (optional) after
    // every optimizer step. Returns false if max_steps stopped the run early.
    bool run(const PairedDataset& train, const PairedDataset* heldout,
             const std::function<void(const CcaEpochMetrics&)>& emit,
             const std::function<void()>& step_hook = {});

    SoftCcaModel& model() { return model_; }
    const SoftCcaConfig& config() const { return cfg_; }
    SgdMomentum& optimizer() { return opt_; }

    // Persisted progress (checkpointable).
    std::uint64_t epoch = 0;
    std::uint64_t step_in_epoch = 0;
    std::uint64_t global_step = 0;
    double acc_dist = 0.0, acc_sdl1 = 0.0, acc_sdl2 = 0.0; // partial-epoch sums

    Matrix embed(const Matrix& x, int view) const; // eval-mode embedding

private:
    void train_step(const Matrix& x1, const Matrix& x2);

    SoftCcaConfig cfg_;
    SoftCcaModel model_;
    SgdMomentum opt_;
};

struct FoldAccuracies {
    std::vector<double> folds; // percent
    double mean = 0.0;
    double stddev = 0.0;
};

// Cross-view recognition: a linear softmax classifier is trained on
// embeddings from one view and evaluated on embeddings of the other, with
// k-fold cross validation over the labeled evaluation set.
FoldAccuracies cross_view_eval(const std::function<Matrix(const Matrix&)>& embed_train_view,
                               const std::function<Matrix(const Matrix&)>& embed_eval_view,
                               const Matrix& train_view, const Matrix& eval_view,
                               const std::vector<int>& labels, int classes,
                               std::size_t folds, std::uint64_t seed);

} // namespace softcca
