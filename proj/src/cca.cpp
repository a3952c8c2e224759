#include "softcca/cca.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "softcca/classifier.hpp"

namespace softcca {

DistLoss l2_dist_loss(const Matrix& z1, const Matrix& z2) {
    if (!z1.same_shape(z2)) throw ShapeError("l2_dist_loss: embedding shapes differ");
    const double m = static_cast<double>(z1.rows());
    DistLoss out;
    out.grad_a = Matrix(z1.rows(), z1.cols());
    double sq = 0.0;
    for (std::size_t i = 0; i < z1.size(); ++i) {
        const double d = z1.data()[i] - z2.data()[i];
        sq += d * d;
        out.grad_a.data()[i] = d / m;
    }
    out.loss = sq / (2.0 * m);
    out.grad_b = out.grad_a;
    out.grad_b *= -1.0;
    return out;
}

Matrix exact_decorrelation_step(const Matrix& z, double ridge) {
    Matrix b = inv_sqrt_sym(minibatch_cov(z), ridge);
    return matmul(z, b);
}

CorrelationReport correlation_strength(const Matrix& z1, const Matrix& z2) {
    if (!z1.same_shape(z2)) throw ShapeError("correlation_strength: shapes differ");
    const std::size_t n = z1.rows(), k = z1.cols();
    if (n < 2) throw DegenerateError("correlation_strength: need at least 2 rows");
    CorrelationReport rep;
    rep.per_dim.resize(k, 0.0);
    rep.upper_bound = k;

    std::vector<double> u(n), v(n);
    for (std::size_t j = 0; j < k; ++j) {
        double mu = 0.0, mv = 0.0;
        for (std::size_t i = 0; i < n; ++i) { mu += z1(i, j); mv += z2(i, j); }
        mu /= static_cast<double>(n);
        mv /= static_cast<double>(n);
        double suu = 0.0, svv = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            suu += (z1(i, j) - mu) * (z1(i, j) - mu);
            svv += (z2(i, j) - mv) * (z2(i, j) - mv);
        }
        if (suu == 0.0 || svv == 0.0) continue; // degenerate column contributes 0
        for (std::size_t i = 0; i < n; ++i) { u[i] = z1(i, j); v[i] = z2(i, j); }
        rep.per_dim[j] = pearson(u, v);
    }
    rep.total = std::accumulate(rep.per_dim.begin(), rep.per_dim.end(), 0.0);
    return rep;
}

namespace {

Matrix column_means(const Matrix& x) {
    Matrix mu(1, x.cols());
    for (std::size_t j = 0; j < x.cols(); ++j) {
        double s = 0.0;
        for (std::size_t i = 0; i < x.rows(); ++i) s += x(i, j);
        mu(0, j) = s / static_cast<double>(x.rows());
    }
    return mu;
}

Matrix centered_by(const Matrix& x, const Matrix& mu) {
    Matrix out = x;
    for (std::size_t i = 0; i < x.rows(); ++i)
        for (std::size_t j = 0; j < x.cols(); ++j) out(i, j) -= mu(0, j);
    return out;
}

} // namespace

LinearCcaModel linear_cca_fit(const Matrix& x1, const Matrix& x2, std::size_t k, double ridge) {
    if (x1.rows() != x2.rows()) throw ShapeError("linear_cca_fit: sample counts differ");
    const std::size_t n = x1.rows();
    if (n < 2) throw DegenerateError("linear_cca_fit: need at least 2 samples");
    const std::size_t d1 = x1.cols(), d2 = x2.cols();
    if (k > std::min(d1, d2))
        throw ConfigError("linear_cca_fit: k=" + std::to_string(k) +
                          " exceeds min view dimension " + std::to_string(std::min(d1, d2)));

    LinearCcaModel model;
    model.mean1 = column_means(x1);
    model.mean2 = column_means(x2);
    Matrix c1 = centered_by(x1, model.mean1);
    Matrix c2 = centered_by(x2, model.mean2);

    const double scale = 1.0 / static_cast<double>(n - 1);
    Matrix s11 = matmul_tn(c1, c1); s11 *= scale;
    Matrix s22 = matmul_tn(c2, c2); s22 *= scale;
    Matrix s12 = matmul_tn(c1, c2); s12 *= scale;

    Matrix w1h = inv_sqrt_sym(s11, ridge);
    Matrix w2h = inv_sqrt_sym(s22, ridge);
    Matrix t = matmul(matmul(w1h, s12), w2h); // d1 x d2

    // Singular pairs of T from the two Gram matrices, sign-aligned so that
    // u_i^T T v_i >= 0.
    SymEig right = sym_eig(matmul_tn(t, t)); // d2 x d2 -> V
    SymEig left = sym_eig(matmul_nt(t, t));  // d1 x d1 -> U

    Matrix u(d1, k), v(d2, k);
    model.correlations.resize(k);
    for (std::size_t j = 0; j < k; ++j) {
        const double lam = std::max(right.values[j], 0.0);
        model.correlations[j] = std::clamp(std::sqrt(lam), 0.0, 1.0);
        for (std::size_t i = 0; i < d2; ++i) v(i, j) = right.vectors(i, j);
        for (std::size_t i = 0; i < d1; ++i) u(i, j) = left.vectors(i, j);
    }
    // Align signs: flip u_i when its response to T v_i is negative.
    Matrix tv = matmul(t, v); // d1 x k
    for (std::size_t j = 0; j < k; ++j) {
        double dot = 0.0;
        for (std::size_t i = 0; i < d1; ++i) dot += u(i, j) * tv(i, j);
        if (dot < 0.0)
            for (std::size_t i = 0; i < d1; ++i) u(i, j) = -u(i, j);
    }

    model.w1 = matmul(w1h, u);
    model.w2 = matmul(w2h, v);
    return model;
}

Matrix linear_cca_project(const LinearCcaModel& m, const Matrix& x, int view) {
    if (view != 1 && view != 2) throw ConfigError("linear_cca_project: view must be 1 or 2");
    const Matrix& mean = view == 1 ? m.mean1 : m.mean2;
    const Matrix& w = view == 1 ? m.w1 : m.w2;
    if (x.cols() != w.rows())
        throw ShapeError("linear_cca_project: input dimension does not match the model");
    return matmul(centered_by(x, mean), w);
}

SoftCcaModel soft_cca_init(const SoftCcaConfig& cfg, std::size_t d1, std::size_t d2) {
    if (cfg.embed_dim == 0) throw ConfigError("soft_cca: embed_dim must be positive");
    auto branch_spec = [&](std::size_t d) {
        std::vector<LayerSpec> layers;
        std::size_t prev = d;
        for (std::size_t h : cfg.hidden) {
            layers.push_back(affine_layer(prev, h));
            layers.push_back(relu_layer(h));
            prev = h;
        }
        layers.push_back(affine_layer(prev, cfg.embed_dim));
        // Batch normalization right before the embedding output keeps the
        // decorrelation input zero-mean/unit-variance per batch.
        layers.push_back(batchnorm_layer(cfg.embed_dim));
        return layers;
    };
    SoftCcaModel m;
    Rng rng1(mix_seed(cfg.seed, 1));
    Rng rng2(mix_seed(cfg.seed, 2));
    m.branch1 = make_mlp(branch_spec(d1), rng1);
    m.branch2 = make_mlp(branch_spec(d2), rng2);
    m.sdl1 = SdlState(cfg.embed_dim, cfg.alpha);
    m.sdl2 = SdlState(cfg.embed_dim, cfg.alpha);
    m.lambda = cfg.lambda;
    m.embed_dim = cfg.embed_dim;
    return m;
}

SoftCcaTrainer::SoftCcaTrainer(const SoftCcaConfig& cfg, std::size_t d1, std::size_t d2)
    : cfg_(cfg), model_(soft_cca_init(cfg, d1, d2)) {
    opt_.lr = cfg.lr;
    opt_.momentum = cfg.momentum;
}

Matrix SoftCcaTrainer::embed(const Matrix& x, int view) const {
    if (view != 1 && view != 2) throw ConfigError("embed: view must be 1 or 2");
    return forward_eval(view == 1 ? model_.branch1 : model_.branch2, x);
}

SoftCcaStep soft_cca_loss_grads(SoftCcaModel& model, const Matrix& x1, const Matrix& x2) {
    ForwardTrace t1 = forward(model.branch1, x1, Mode::train);
    ForwardTrace t2 = forward(model.branch2, x2, Mode::train);
    const Matrix& z1 = t1.output();
    const Matrix& z2 = t2.output();

    DistLoss dist = l2_dist_loss(z1, z2);
    SdlUpdate u1 = sdl_update(model.sdl1, z1);
    SdlUpdate u2 = sdl_update(model.sdl2, z2);

    SoftCcaStep step;
    step.dist = dist.loss;
    step.sdl1 = u1.loss;
    step.sdl2 = u2.loss;
    step.total = dist.loss + model.lambda * (u1.loss + u2.loss);

    Matrix g1 = std::move(dist.grad_a);
    Matrix g2 = std::move(dist.grad_b);
    if (model.lambda != 0.0) {
        Matrix s1 = sdl_gradient(model.sdl1, u1.approx_cov, z1);
        s1 *= model.lambda;
        g1 += s1;
        Matrix s2 = sdl_gradient(model.sdl2, u2.approx_cov, z2);
        s2 *= model.lambda;
        g2 += s2;
    }
    step.grads1 = backward(model.branch1, t1, g1, /*want_input_grad=*/false);
    step.grads2 = backward(model.branch2, t2, g2, /*want_input_grad=*/false);
    return step;
}

void SoftCcaTrainer::train_step(const Matrix& x1, const Matrix& x2) {
    SoftCcaStep step = soft_cca_loss_grads(model_, x1, x2);
    if (!std::isfinite(step.total))
        throw DivergenceError("soft_cca_train: non-finite loss at step " +
                              std::to_string(global_step + 1));

    auto params = trainable_params(model_.branch1);
    auto params2 = trainable_params(model_.branch2);
    params.insert(params.end(), params2.begin(), params2.end());
    auto grads = gradient_list(model_.branch1, step.grads1);
    auto grads2 = gradient_list(model_.branch2, step.grads2);
    grads.insert(grads.end(), grads2.begin(), grads2.end());
    opt_.step(params, grads);

    acc_dist += step.dist;
    acc_sdl1 += step.sdl1;
    acc_sdl2 += step.sdl2;
    step_in_epoch += 1;
    global_step += 1;
}

bool SoftCcaTrainer::run(const PairedDataset& train, const PairedDataset* heldout,
                         const std::function<void(const CcaEpochMetrics&)>& emit,
                         const std::function<void()>& step_hook) {
    if (train.size() < cfg_.batch_size)
        throw ConfigError("soft_cca_train: dataset smaller than one batch");
    BatchPlan plan{cfg_.batch_size, cfg_.seed, cfg_.drop_last};

    while (epoch < cfg_.epochs) {
        const auto batches = batch_indices(train.size(), plan, epoch);
        if (step_in_epoch == 0 && cfg_.sdl_reset_per_epoch) {
            model_.sdl1.reset();
            model_.sdl2.reset();
        }
        while (step_in_epoch < batches.size()) {
            if (cfg_.max_steps != 0 && global_step >= cfg_.max_steps) return false;
            const auto& idx = batches[step_in_epoch];
            train_step(gather_rows(train.view1, idx), gather_rows(train.view2, idx));
            if (step_hook) step_hook();
        }

        CcaEpochMetrics m;
        m.epoch = epoch;
        const double steps = static_cast<double>(batches.size());
        m.dist_loss = acc_dist / steps;
        m.sdl1 = acc_sdl1 / steps;
        m.sdl2 = acc_sdl2 / steps;
        m.total = m.dist_loss + model_.lambda * (m.sdl1 + m.sdl2);
        if (heldout != nullptr) {
            const Matrix e1 = embed(heldout->view1, 1);
            const Matrix e2 = embed(heldout->view2, 2);
            m.heldout_corr = correlation_strength(e1, e2).total;
        }
        emit(m);

        acc_dist = acc_sdl1 = acc_sdl2 = 0.0;
        step_in_epoch = 0;
        epoch += 1;
    }
    return true;
}

FoldAccuracies cross_view_eval(const std::function<Matrix(const Matrix&)>& embed_train_view,
                               const std::function<Matrix(const Matrix&)>& embed_eval_view,
                               const Matrix& train_view, const Matrix& eval_view,
                               const std::vector<int>& labels, int classes,
                               std::size_t folds, std::uint64_t seed) {
    const std::size_t n = train_view.rows();
    if (eval_view.rows() != n || labels.size() != n)
        throw ShapeError("cross_view_eval: views/labels misaligned");
    if (folds < 2 || folds > n) throw ConfigError("cross_view_eval: bad fold count");

    const Matrix emb_a = embed_train_view(train_view);
    const Matrix emb_b = embed_eval_view(eval_view);

    std::vector<std::uint32_t> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = static_cast<std::uint32_t>(i);
    Rng rng(seed);
    rng.shuffle(order);

    FoldAccuracies out;
    for (std::size_t f = 0; f < folds; ++f) {
        const std::size_t lo = f * n / folds, hi = (f + 1) * n / folds;
        std::vector<std::uint32_t> train_idx, test_idx;
        train_idx.reserve(n - (hi - lo));
        test_idx.reserve(hi - lo);
        for (std::size_t i = 0; i < n; ++i)
            (i >= lo && i < hi ? test_idx : train_idx).push_back(order[i]);

        SoftmaxTrainConfig cfg;
        cfg.seed = mix_seed(seed, f + 1);
        SoftmaxClassifier cls = train_softmax(gather_rows(emb_a, train_idx),
                                              gather_labels(labels, train_idx), classes, cfg);
        const double acc = classifier_accuracy(cls, gather_rows(emb_b, test_idx),
                                               gather_labels(labels, test_idx));
        out.folds.push_back(100.0 * acc);
    }
    const double mean = std::accumulate(out.folds.begin(), out.folds.end(), 0.0) /
                        static_cast<double>(out.folds.size());
    double var = 0.0;
    for (double a : out.folds) var += (a - mean) * (a - mean);
    out.mean = mean;
    out.stddev = std::sqrt(var / static_cast<double>(out.folds.size()));
    return out;
}

} // namespace softcca
