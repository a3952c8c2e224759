#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "softcca/decorr.hpp"
#include "softcca/matrix.hpp"
#include "softcca/nn.hpp"

namespace softcca {

enum class DecorrKind { none, sdl, decov, decov_l1, decov_gc, xcov };

DecorrKind decorr_kind_from_string(const std::string& s);
std::string to_string(DecorrKind k);

struct FaeConfig {
    std::size_t class_dim = 10; // supervised code block
    std::size_t style_dim = 10; // free code block
    std::vector<std::size_t> enc_hidden = {1000, 1000};
    std::vector<std::size_t> dec_hidden = {1000, 1000};
    double lambda1 = 1.0; // classification weight
    double lambda2 = 1.0; // decorrelation weight
    double alpha = 0.9;
    DecorrKind decorr = DecorrKind::sdl;
    double lr = 0.05;
    double momentum = 0.9;
    std::size_t batch_size = 100;
    std::size_t epochs = 10;
    std::uint64_t seed = 0;
    bool sdl_reset_per_epoch = false;
    bool drop_last = false;
    std::uint64_t max_steps = 0;
};

// Autoencoder whose code splits into a supervised block (used directly as
// class logits) and a free block. The decorrelation term sees the code
// through a dedicated batchnorm layer; decoder and classifier read the raw
// code.
struct FaeModel {
    MlpModel encoder;   // input_dim -> class_dim + style_dim
    MlpModel decoder;   // class_dim + style_dim -> input_dim
    MlpModel code_norm; // single batchnorm over the concatenated code
    SdlState sdl;       // used by sdl / decov_gc variants
    std::size_t class_dim = 0, style_dim = 0;
    double y_scale = 1.0; // magnitude for manually injected class codes

    std::size_t code_dim() const { return class_dim + style_dim; }
};

struct FaeEpochMetrics {
    std::size_t epoch = 0;
    double rec = 0.0, cla = 0.0, decorr = 0.0, total = 0.0;
};

struct FaeStep {
    double rec = 0.0, cla = 0.0, decorr = 0.0, total = 0.0;
    MlpGradients enc_grads, dec_grads, bn_grads;
    bool has_bn_grads = false;
};

// One objective evaluation with parameter gradients for
// rec + lambda1 * classification + lambda2 * decorrelation. Advances the
// model's batchnorm running statistics and (for accumulator variants) the
// decorrelation state.
FaeStep fae_loss_grads(FaeModel& model, DecorrKind kind, double lambda1, double lambda2,
                       const Matrix& x, const std::vector<int>& y);

class FaeTrainer {
public:
    FaeTrainer(const FaeConfig& cfg, std::size_t input_dim);

    bool run(const Matrix& images, const std::vector<int>& labels,
             const std::function<void(const FaeEpochMetrics&)>& emit,
             const std::function<void()>& step_hook = {});

    FaeModel& model() { return model_; }
    const FaeConfig& config() const { return cfg_; }
    SgdMomentum& optimizer() { return opt_; }

    std::uint64_t epoch = 0;
    std::uint64_t step_in_epoch = 0;
    std::uint64_t global_step = 0;
    double acc_rec = 0.0, acc_cla = 0.0, acc_decorr = 0.0;

private:
    void train_step(const Matrix& x, const std::vector<int>& y);

    FaeConfig cfg_;
    FaeModel model_;
    SgdMomentum opt_;
};

// Eval-mode code for a batch of images.
Matrix fae_encode(const FaeModel& m, const Matrix& images);
Matrix fae_decode(const FaeModel& m, const Matrix& codes);

// Mean magnitude of the strongest class activation over a reference set;
// stored on the model and used to scale injected one-hot codes.
double compute_y_scale(const FaeModel& m, const Matrix& images);

struct DisentanglementScores {
    double acc_y = 0.0; // percent, from the classification block
    double acc_z = 0.0; // percent, linear probe on the free block
};

DisentanglementScores disentanglement_eval(const FaeModel& m, const Matrix& train_images,
                                           const std::vector<int>& train_labels,
                                           const Matrix& test_images,
                                           const std::vector<int>& test_labels,
                                           std::uint64_t seed);

// Re-synthesizes an image with its style code kept and the class code
// replaced by a scaled one-hot; output clamped to [0, 1].
std::vector<double> style_transfer(const FaeModel& m, std::span<const double> image,
                                   int target_class);

// Grid of style-transfer outputs: one row per style image, one column per
// class. Cells are 28x28; values in [0, 1].
Matrix style_sheet(const FaeModel& m, const Matrix& style_images);

// Binary PGM (P5), 8-bit, row-major.
void write_pgm(const std::string& path, const Matrix& image01);

} // namespace softcca
