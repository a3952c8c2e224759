#include "softcca/classifier.hpp"

#include <cmath>
#include <set>

#include "softcca/data.hpp"
#include "softcca/rng.hpp"

namespace softcca {

LossGrad softmax_cross_entropy(const Matrix& logits, std::span<const int> labels) {
    const std::size_t m = logits.rows(), c = logits.cols();
    if (labels.size() != m) throw ShapeError("softmax_cross_entropy: label count mismatch");
    LossGrad out;
    out.grad = Matrix(m, c);
    double loss = 0.0;
    for (std::size_t i = 0; i < m; ++i) {
        const int y = labels[i];
        if (y < 0 || static_cast<std::size_t>(y) >= c)
            throw ConfigError("softmax_cross_entropy: label " + std::to_string(y) +
                              " out of range [0, " + std::to_string(c) + ")");
        double mx = logits(i, 0);
        for (std::size_t j = 1; j < c; ++j) mx = std::max(mx, logits(i, j));
        double z = 0.0;
        for (std::size_t j = 0; j < c; ++j) z += std::exp(logits(i, j) - mx);
        const double logz = std::log(z) + mx;
        loss += logz - logits(i, static_cast<std::size_t>(y));
        for (std::size_t j = 0; j < c; ++j) {
            const double p = std::exp(logits(i, j) - logz);
            out.grad(i, j) = (p - (static_cast<std::size_t>(y) == j ? 1.0 : 0.0)) /
                             static_cast<double>(m);
        }
    }
    out.loss = loss / static_cast<double>(m);
    return out;
}

double argmax_accuracy(const Matrix& logits, std::span<const int> labels) {
    const std::size_t m = logits.rows();
    if (labels.size() != m) throw ShapeError("argmax_accuracy: label count mismatch");
    std::size_t hits = 0;
    for (std::size_t i = 0; i < m; ++i) {
        std::size_t best = 0;
        for (std::size_t j = 1; j < logits.cols(); ++j)
            if (logits(i, j) > logits(i, best)) best = j;
        if (static_cast<int>(best) == labels[i]) ++hits;
    }
    return m == 0 ? 0.0 : static_cast<double>(hits) / static_cast<double>(m);
}

Matrix classifier_logits(const SoftmaxClassifier& c, const Matrix& x) {
    Matrix out = matmul(x, c.weight);
    for (std::size_t i = 0; i < out.rows(); ++i)
        for (std::size_t j = 0; j < out.cols(); ++j) out(i, j) += c.bias(0, j);
    return out;
}

SoftmaxClassifier train_softmax(const Matrix& x, std::span<const int> labels, int classes,
                                const SoftmaxTrainConfig& cfg) {
    const std::size_t n = x.rows(), d = x.cols();
    if (labels.size() != n) throw ShapeError("train_softmax: label count mismatch");
    std::set<int> distinct(labels.begin(), labels.end());
    if (distinct.size() < 2)
        throw DegenerateError("train_softmax: training data contains a single class");

    SoftmaxClassifier cls;
    cls.weight = Matrix(d, static_cast<std::size_t>(classes));
    cls.bias = Matrix(1, static_cast<std::size_t>(classes));
    Matrix vw(d, static_cast<std::size_t>(classes)), vb(1, static_cast<std::size_t>(classes));

    BatchPlan plan{std::min(cfg.batch_size, n), cfg.seed, false};
    std::vector<int> lab(labels.begin(), labels.end());
    for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        for (const auto& idx : batch_indices(n, plan, epoch)) {
            Matrix xb = gather_rows(x, idx);
            std::vector<int> yb = gather_labels(lab, idx);
            LossGrad lg = softmax_cross_entropy(classifier_logits(cls, xb), yb);
            Matrix gw = matmul_tn(xb, lg.grad);
            for (std::size_t i = 0; i < gw.size(); ++i)
                gw.data()[i] += cfg.l2 * cls.weight.data()[i];
            Matrix gb(1, cls.bias.cols());
            for (std::size_t r = 0; r < lg.grad.rows(); ++r)
                for (std::size_t j = 0; j < lg.grad.cols(); ++j) gb(0, j) += lg.grad(r, j);
            for (std::size_t i = 0; i < gw.size(); ++i) {
                vw.data()[i] = cfg.momentum * vw.data()[i] - cfg.lr * gw.data()[i];
                cls.weight.data()[i] += vw.data()[i];
            }
            for (std::size_t i = 0; i < gb.size(); ++i) {
                vb.data()[i] = cfg.momentum * vb.data()[i] - cfg.lr * gb.data()[i];
                cls.bias.data()[i] += vb.data()[i];
            }
        }
    }
    return cls;
}

double classifier_accuracy(const SoftmaxClassifier& c, const Matrix& x,
                           std::span<const int> labels) {
    return argmax_accuracy(classifier_logits(c, x), labels);
}

} // namespace softcca
