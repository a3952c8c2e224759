#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "softcca/decorr.hpp"
#include "softcca/matrix.hpp"

namespace softcca {

// Mean softmax cross-entropy over rows; grad has the shape of logits.
LossGrad softmax_cross_entropy(const Matrix& logits, std::span<const int> labels);

// Row-wise argmax accuracy in [0, 1].
double argmax_accuracy(const Matrix& logits, std::span<const int> labels);

// Multinomial logistic regression trained with minibatch SGD + momentum and
// an L2 penalty. Stands in for the linear SVM used in the reference
// evaluation protocol; both are linear decision functions.
struct SoftmaxClassifier {
    Matrix weight; // d x classes
    Matrix bias;   // 1 x classes
};

struct SoftmaxTrainConfig {
    double lr = 0.2;
    double momentum = 0.9;
    double l2 = 1e-4;
    std::size_t epochs = 40;
    std::size_t batch_size = 128;
    std::uint64_t seed = 0;
};

SoftmaxClassifier train_softmax(const Matrix& x, std::span<const int> labels, int classes,
                                const SoftmaxTrainConfig& cfg);

Matrix classifier_logits(const SoftmaxClassifier& c, const Matrix& x);

double classifier_accuracy(const SoftmaxClassifier& c, const Matrix& x,
                           std::span<const int> labels);

} // namespace softcca
